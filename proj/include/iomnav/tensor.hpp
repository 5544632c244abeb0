#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include "iomnav/common.hpp"

namespace iomnav {

// Dense row-major 2-D tensor. Row vectors are 1xN, scalars 1x1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<real> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  static Tensor zeros(int r, int c) { return Tensor(r, c); }

  static Tensor scalar(real v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }

  static Tensor row(std::initializer_list<real> vals) {
    Tensor t(1, static_cast<int>(vals.size()));
    int i = 0;
    for (real v : vals) t.data[i++] = v;
    return t;
  }

  static Tensor from_rows(int r, int c, std::initializer_list<real> vals) {
    Tensor t(r, c);
    int i = 0;
    for (real v : vals) t.data[i++] = v;
    return t;
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<real>> rows_list) {
    const int r = static_cast<int>(rows_list.size());
    const int c = r == 0 ? 0 : static_cast<int>(rows_list.begin()->size());
    Tensor t(r, c);
    int i = 0;
    for (const auto& row_vals : rows_list)
      for (real v : row_vals) t.data[i++] = v;
    return t;
  }

  real& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  real at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  int size() const { return rows * cols; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

inline void require_shape(const Tensor& t, int r, int c, const char* what) {
  if (t.rows != r || t.cols != c)
    throw ShapeMismatchError(std::string(what) + ": expected [" + std::to_string(r) + "x" +
                             std::to_string(c) + "], got " + t.shape_str());
}

inline void check_finite(const Tensor& t, const char* what) {
  for (real v : t.data)
    if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite value in ") + what);
}

}  // namespace iomnav
