#include "iomnav/target_memory.hpp"

#include <cmath>

namespace iomnav {

std::array<real, 4> make_pose_feature(const AgentPose& pose, Coord origin,
                                      real norm_scale) {
  return {(pose.q.x - origin.x) / norm_scale, (pose.q.y - origin.y) / norm_scale,
          pose.yaw / 8.0, static_cast<real>(pose.pitch)};
}

OrientationFeature make_orientation_feature(const Detection& det, const AgentPose& pose,
                                            Coord origin, real norm_scale) {
  auto l = make_pose_feature(pose, origin, norm_scale);
  return {det.x_min, det.y_min, det.x_max, det.y_max, det.confidence,
          l[0],      l[1],      l[2],      l[3]};
}

TargetMemory::TargetMemory(int capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw ConfigError("target memory capacity must be >= 1");
}

void TargetMemory::push(const OrientationFeature& d) {
  rows_.push_back(d);
  if (static_cast<int>(rows_.size()) <= capacity_) return;
  size_t worst = 0;
  real worst_d2 = -1.0;
  for (size_t i = 0; i < rows_.size(); ++i) {
    real d2 = 0;
    for (int j = 0; j < 9; ++j) {
      const real diff = rows_[i][j] - d[j];
      d2 += diff * diff;
    }
    if (d2 > worst_d2) {  // strict: ties keep the earliest (oldest) candidate
      worst_d2 = d2;
      worst = i;
    }
  }
  rows_.erase(rows_.begin() + static_cast<long>(worst));
}

Tensor TargetMemory::to_tensor() const {
  Tensor t = Tensor::zeros(static_cast<int>(rows_.size()), 9);
  for (size_t i = 0; i < rows_.size(); ++i)
    for (int j = 0; j < 9; ++j) t.at(static_cast<int>(i), j) = rows_[i][j];
  return t;
}

Var mlp2(Tape& t, Var x, const MlpParams& p) {
  return linear(t, t.relu(linear(t, x, p.w1, p.b1)), p.w2, p.b2);
}

Var encode_goal(Tape& t, Var goal_onehot, Var pose, const MlpParams& goal_mlp,
                const MlpParams& compressor) {
  const Tensor& g = t.val(goal_onehot);
  if (g.rows != 1) throw NotOneHotError("goal must be a single row");
  int ones = 0;
  for (real v : g.data) {
    if (v == 1.0)
      ++ones;
    else if (v != 0.0)
      throw NotOneHotError("goal vector has a component outside {0,1}");
  }
  if (ones != 1) throw NotOneHotError("goal vector must have exactly one 1");
  require_shape(t.val(pose), 1, 4, "pose feature");
  Var p = mlp2(t, goal_onehot, goal_mlp);  // 1 x 64
  std::array<Var, 2> parts{p, pose};
  return mlp2(t, t.concat_cols(parts), compressor);  // 1 x 32
}

AggregateResult aggregate(Tape& t, Var p_hat, const TargetMemory& memory,
                          const AttentionParams& params, bool training,
                          real dropout_rate, Rng* rng) {
  const int n = memory.size();
  if (n == 0) throw EmptyMemoryError("aggregate needs at least one memory row");
  require_shape(t.val(p_hat), 1, 32, "attention query input");

  Var mem = t.leaf(memory.to_tensor());            // n x 9
  Var enc = mlp2(t, mem, params.encoder);          // n x 32
  Var values = t.matmul(enc, params.v_w);          // n x 32
  const real inv_sqrt_dk = 1.0 / std::sqrt(static_cast<real>(kAttHeadDim));

  AggregateResult res;
  res.att = Tensor::zeros(kAttHeads, n);
  std::array<Var, kAttHeads> head_out{};
  for (int h = 0; h < kAttHeads; ++h) {
    Var q = t.matmul(p_hat, params.q_w[h]);        // 1 x 8
    Var k = t.matmul(enc, params.k_w[h]);          // n x 8
    Var logits = t.scale(t.matmul(q, t.transpose(k)), inv_sqrt_dk);  // 1 x n
    Var w = t.softmax_rows(logits);
    for (int j = 0; j < n; ++j) res.att.at(h, j) = t.val(w).at(0, j);
    if (training && dropout_rate > 0.0) w = t.dropout(w, dropout_rate, *rng);
    Var v_h = t.slice_cols(values, h * kAttHeadDim, (h + 1) * kAttHeadDim);
    head_out[h] = t.matmul(w, v_h);                // 1 x 8
  }
  res.f = t.matmul(t.concat_cols(head_out), params.o_w);  // 1 x 32
  return res;
}

}  // namespace iomnav
