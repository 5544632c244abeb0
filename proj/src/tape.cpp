#include "iomnav/tape.hpp"

#include <cmath>

namespace iomnav {

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  const int m = a.rows, k = a.cols, n = b.cols;
  for (int i = 0; i < m; ++i) {
    const real* arow = &a.data[static_cast<size_t>(i) * k];
    real* crow = &c.data[static_cast<size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      const real av = arow[p];
      if (av == 0.0) continue;
      const real* brow = &b.data[static_cast<size_t>(p) * n];
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
  const int m = a.rows, k = a.cols, n = b.rows;
  for (int i = 0; i < m; ++i) {
    const real* arow = &a.data[static_cast<size_t>(i) * k];
    real* crow = &c.data[static_cast<size_t>(i) * n];
    for (int j = 0; j < n; ++j) {
      const real* brow = &b.data[static_cast<size_t>(j) * k];
      real acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
  const int k = a.rows, m = a.cols, n = b.cols;
  for (int p = 0; p < k; ++p) {
    const real* arow = &a.data[static_cast<size_t>(p) * m];
    const real* brow = &b.data[static_cast<size_t>(p) * n];
    for (int i = 0; i < m; ++i) {
      const real av = arow[i];
      if (av == 0.0) continue;
      real* crow = &c.data[static_cast<size_t>(i) * n];
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Var Tape::push(Tensor value, std::function<void(Tape&)> back) {
  if (check_finite_) check_finite(value, "tape op output");
  Node n;
  n.grad = Tensor::zeros(value.rows, value.cols);
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  if (av.cols != bv.rows)
    throw ShapeMismatchError("matmul: " + av.shape_str() + " x " + bv.shape_str());
  Tensor out(av.rows, bv.cols);
  gemm_nn(av, bv, out);
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a, b](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    gemm_nt(g, t.nodes_[b].value, t.nodes_[a].grad);  // dA += G * B^T
    gemm_tn(t.nodes_[a].value, g, t.nodes_[b].grad);  // dB += A^T * G
  };
  return self;
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  if (!av.same_shape(bv))
    throw ShapeMismatchError("add: " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = av;
  for (int i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a, b](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[a].grad;
    Tensor& gb = t.nodes_[b].grad;
    for (int i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  };
  return self;
}

Var Tape::add_rowvec(Var a, Var b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  if (bv.rows != 1 || bv.cols != av.cols)
    throw ShapeMismatchError("add_rowvec: " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = av;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) += bv.data[c];
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a, b](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[a].grad;
    Tensor& gb = t.nodes_[b].grad;
    for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) gb.data[c] += g.at(r, c);
  };
  return self;
}

Var Tape::sub(Var a, Var b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  if (!av.same_shape(bv))
    throw ShapeMismatchError("sub: " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = av;
  for (int i = 0; i < out.size(); ++i) out.data[i] -= bv.data[i];
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a, b](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[a].grad;
    Tensor& gb = t.nodes_[b].grad;
    for (int i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] -= g.data[i];
    }
  };
  return self;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  if (!av.same_shape(bv))
    throw ShapeMismatchError("mul: " + av.shape_str() + " vs " + bv.shape_str());
  Tensor out = av;
  for (int i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a, b](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av2 = t.nodes_[a].value;
    const Tensor& bv2 = t.nodes_[b].value;
    Tensor& ga = t.nodes_[a].grad;
    Tensor& gb = t.nodes_[b].grad;
    for (int i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i] * bv2.data[i];
      gb.data[i] += g.data[i] * av2.data[i];
    }
  };
  return self;
}

Var Tape::scale(Var a, real c) {
  Tensor out = nodes_[a].value;
  for (real& v : out.data) v *= c;
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a, c](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[a].grad;
    for (int i = 0; i < g.size(); ++i) ga.data[i] += c * g.data[i];
  };
  return self;
}

Var Tape::transpose(Var a) {
  const Tensor& av = nodes_[a].value;
  Tensor out(av.cols, av.rows);
  for (int r = 0; r < av.rows; ++r)
    for (int c = 0; c < av.cols; ++c) out.at(c, r) = av.at(r, c);
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[a].grad;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) ga.at(c, r) += g.at(r, c);
  };
  return self;
}

Var Tape::relu(Var a) {
  Tensor out = nodes_[a].value;
  for (real& v : out.data) v = v > 0.0 ? v : 0.0;
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av = t.nodes_[a].value;
    Tensor& ga = t.nodes_[a].grad;
    for (int i = 0; i < g.size(); ++i)
      if (av.data[i] > 0.0) ga.data[i] += g.data[i];
  };
  return self;
}

Var Tape::sigmoid(Var a) {
  Tensor out = nodes_[a].value;
  for (real& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& s = t.nodes_[self].value;
    Tensor& ga = t.nodes_[a].grad;
    for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * s.data[i] * (1.0 - s.data[i]);
  };
  return self;
}

Var Tape::tanh_op(Var a) {
  Tensor out = nodes_[a].value;
  for (real& v : out.data) v = std::tanh(v);
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    Tensor& ga = t.nodes_[a].grad;
    for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
  };
  return self;
}

Var Tape::softmax_rows(Var a) {
  Tensor out = nodes_[a].value;
  for (int r = 0; r < out.rows; ++r) {
    real* row = &out.data[static_cast<size_t>(r) * out.cols];
    real mx = row[0];
    for (int c = 1; c < out.cols; ++c) mx = std::max(mx, row[c]);
    real z = 0.0;
    for (int c = 0; c < out.cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      z += row[c];
    }
    for (int c = 0; c < out.cols; ++c) row[c] /= z;
  }
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& s = t.nodes_[self].value;
    Tensor& ga = t.nodes_[a].grad;
    for (int r = 0; r < g.rows; ++r) {
      real dot = 0.0;
      for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * s.at(r, c);
      for (int c = 0; c < g.cols; ++c) ga.at(r, c) += s.at(r, c) * (g.at(r, c) - dot);
    }
  };
  return self;
}

Var Tape::log_softmax_rows(Var a) {
  Tensor out = nodes_[a].value;
  for (int r = 0; r < out.rows; ++r) {
    real* row = &out.data[static_cast<size_t>(r) * out.cols];
    real mx = row[0];
    for (int c = 1; c < out.cols; ++c) mx = std::max(mx, row[c]);
    real z = 0.0;
    for (int c = 0; c < out.cols; ++c) z += std::exp(row[c] - mx);
    const real lse = mx + std::log(z);
    for (int c = 0; c < out.cols; ++c) row[c] -= lse;
  }
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    Tensor& ga = t.nodes_[a].grad;
    for (int r = 0; r < g.rows; ++r) {
      real gsum = 0.0;
      for (int c = 0; c < g.cols; ++c) gsum += g.at(r, c);
      for (int c = 0; c < g.cols; ++c)
        ga.at(r, c) += g.at(r, c) - std::exp(y.at(r, c)) * gsum;
    }
  };
  return self;
}

Var Tape::dropout(Var a, real rate, Rng& rng) {
  const Tensor& av = nodes_[a].value;
  const real keep = 1.0 - rate;
  std::vector<real> mask(static_cast<size_t>(av.size()));
  Tensor out = av;
  for (int i = 0; i < av.size(); ++i) {
    mask[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
    out.data[i] *= mask[i];
  }
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a, mask = std::move(mask)](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[a].grad;
    for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * mask[i];
  };
  return self;
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeMismatchError("concat_cols: no parts");
  const int rows = nodes_[parts[0]].value.rows;
  int cols = 0;
  for (Var p : parts) {
    if (nodes_[p].value.rows != rows) throw ShapeMismatchError("concat_cols: row mismatch");
    cols += nodes_[p].value.cols;
  }
  Tensor out(rows, cols);
  int off = 0;
  for (Var p : parts) {
    const Tensor& pv = nodes_[p].value;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < pv.cols; ++c) out.at(r, off + c) = pv.at(r, c);
    off += pv.cols;
  }
  std::vector<Var> parts_copy(parts.begin(), parts.end());
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, parts_copy = std::move(parts_copy)](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    int off2 = 0;
    for (Var p : parts_copy) {
      Tensor& gp = t.nodes_[p].grad;
      for (int r = 0; r < gp.rows; ++r)
        for (int c = 0; c < gp.cols; ++c) gp.at(r, c) += g.at(r, off2 + c);
      off2 += gp.cols;
    }
  };
  return self;
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  const Tensor& av = nodes_[a].value;
  if (c0 < 0 || c1 > av.cols || c0 >= c1)
    throw ShapeMismatchError("slice_cols: bad range on " + av.shape_str());
  Tensor out(av.rows, c1 - c0);
  for (int r = 0; r < av.rows; ++r)
    for (int c = c0; c < c1; ++c) out.at(r, c - c0) = av.at(r, c);
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a, c0](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[a].grad;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) ga.at(r, c0 + c) += g.at(r, c);
  };
  return self;
}

Var Tape::sum(Var a) {
  const Tensor& av = nodes_[a].value;
  real acc = 0.0;
  for (real v : av.data) acc += v;
  Var self = push(Tensor::scalar(acc), nullptr);
  nodes_[self].back = [self, a](Tape& t) {
    const real g = t.nodes_[self].grad.data[0];
    Tensor& ga = t.nodes_[a].grad;
    for (real& v : ga.data) v += g;
  };
  return self;
}

Var Tape::mean_rows(Var a) {
  const Tensor& av = nodes_[a].value;
  Tensor out(1, av.cols);
  for (int r = 0; r < av.rows; ++r)
    for (int c = 0; c < av.cols; ++c) out.data[c] += av.at(r, c);
  for (real& v : out.data) v /= av.rows;
  Var self = push(std::move(out), nullptr);
  nodes_[self].back = [self, a](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[a].grad;
    const real inv = 1.0 / ga.rows;
    for (int r = 0; r < ga.rows; ++r)
      for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += g.data[c] * inv;
  };
  return self;
}

Var Tape::pick(Var a, int r, int c) {
  const Tensor& av = nodes_[a].value;
  if (r < 0 || r >= av.rows || c < 0 || c >= av.cols)
    throw ShapeMismatchError("pick: index out of range on " + av.shape_str());
  Var self = push(Tensor::scalar(av.at(r, c)), nullptr);
  nodes_[self].back = [self, a, r, c](Tape& t) {
    t.nodes_[a].grad.at(r, c) += t.nodes_[self].grad.data[0];
  };
  return self;
}

void Tape::backward(Var loss) {
  const Tensor& lv = nodes_[loss].value;
  if (lv.rows != 1 || lv.cols != 1)
    throw ShapeMismatchError("backward: loss must be scalar, got " + lv.shape_str());
  nodes_[loss].grad.data[0] = 1.0;
  for (Var i = loss; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

LstmState lstm_step(Tape& t, Var x, Var h, Var c, Var wx, Var wh, Var b) {
  const int hidden = t.val(h).cols;
  Var gates = t.add_rowvec(t.add(t.matmul(x, wx), t.matmul(h, wh)), b);
  Var gi = t.sigmoid(t.slice_cols(gates, 0, hidden));
  Var gf = t.sigmoid(t.slice_cols(gates, hidden, 2 * hidden));
  Var gc = t.tanh_op(t.slice_cols(gates, 2 * hidden, 3 * hidden));
  Var go = t.sigmoid(t.slice_cols(gates, 3 * hidden, 4 * hidden));
  Var c_new = t.add(t.mul(gf, c), t.mul(gi, gc));
  Var h_new = t.mul(go, t.tanh_op(c_new));
  return {h_new, c_new};
}

}  // namespace iomnav
