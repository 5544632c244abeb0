#pragma once

#include <functional>
#include <span>
#include <vector>

#include "iomnav/common.hpp"
#include "iomnav/tensor.hpp"

namespace iomnav {

using Var = int;
inline constexpr Var kNoVar = -1;

// C += A * B
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c);
// C += A * B^T
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c);
// C += A^T * B
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c);

// Eager reverse-mode tape. Values are computed at op creation; backward() walks
// nodes in reverse creation order accumulating gradients into every node.
class Tape {
 public:
  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  Var leaf(Tensor value);
  Var leaf(const Tensor& value, bool copy) { return leaf(Tensor(value)); (void)copy; }
  Var zeros(int rows, int cols) { return leaf(Tensor::zeros(rows, cols)); }

  const Tensor& val(Var v) const { return nodes_[v].value; }
  const Tensor& grad(Var v) const { return nodes_[v].grad; }
  size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);          // same shape
  Var add_rowvec(Var a, Var b);   // (m x n) + (1 x n)
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);          // elementwise
  Var scale(Var a, real c);
  Var transpose(Var a);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh_op(Var a);
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var dropout(Var a, real rate, Rng& rng);  // inverted scaling; call only when training
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, int c0, int c1);
  Var sum(Var a);        // 1x1
  Var mean_rows(Var a);  // (n x c) -> (1 x c)
  Var pick(Var a, int r, int c);  // 1x1

  // Seeds d(loss)=1 and propagates. loss must be 1x1.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;  // accumulates into parent grads
  };

  Var push(Tensor value, std::function<void(Tape&)> back);
  Tensor& grad_mut(Var v) { return nodes_[v].grad; }

  std::vector<Node> nodes_;
  bool check_finite_ = true;
};

// ---- composites -------------------------------------------------------------

// x @ w + b  (b broadcast over rows)
inline Var linear(Tape& t, Var x, Var w, Var b) {
  return t.add_rowvec(t.matmul(x, w), b);
}

struct LstmState {
  Var h = kNoVar;
  Var c = kNoVar;
};

// Standard LSTM cell; gate order along the 4H axis is [input, forget, cell, output].
LstmState lstm_step(Tape& t, Var x, Var h, Var c, Var wx, Var wh, Var b);

// -log softmax(logits)[label], logits 1xN
inline Var cross_entropy(Tape& t, Var logits, int label) {
  return t.scale(t.pick(t.log_softmax_rows(logits), 0, label), -1.0);
}

// -sum(p * log p) with p = softmax(logits)
inline Var entropy_of_logits(Tape& t, Var logits) {
  Var lsm = t.log_softmax_rows(logits);
  return t.scale(t.sum(t.mul(t.softmax_rows(logits), lsm)), -1.0);
}

}  // namespace iomnav
