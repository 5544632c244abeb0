#pragma once

#include <array>
#include <vector>

#include "iomnav/common.hpp"
#include "iomnav/sim.hpp"
#include "iomnav/tape.hpp"

namespace iomnav {

// D_t = [detection bbox+conf (5) | pose (4)].
using OrientationFeature = std::array<real, 9>;

// l_t: x, y relative to episode start over norm_scale, yaw/8, pitch.
std::array<real, 4> make_pose_feature(const AgentPose& pose, Coord origin, real norm_scale);
OrientationFeature make_orientation_feature(const Detection& det, const AgentPose& pose,
                                            Coord origin, real norm_scale);

// Bounded store of target orientation clues; when full, the row farthest
// (Euclidean) from the incoming feature is dropped, oldest first on ties.
class TargetMemory {
 public:
  explicit TargetMemory(int capacity);

  void push(const OrientationFeature& d);
  int size() const { return static_cast<int>(rows_.size()); }
  int capacity() const { return capacity_; }
  const std::vector<OrientationFeature>& rows() const { return rows_; }
  // n x 9 tensor, insertion order (oldest first).
  Tensor to_tensor() const;

 private:
  int capacity_;
  std::vector<OrientationFeature> rows_;
};

struct MlpParams {
  Var w1 = kNoVar, b1 = kNoVar;
  Var w2 = kNoVar, b2 = kNoVar;
};

// Linear-ReLU-Linear.
Var mlp2(Tape& t, Var x, const MlpParams& p);

struct AttentionParams {
  MlpParams encoder;           // 9 -> 32 -> 32, applied to memory rows
  std::array<Var, 4> q_w{kNoVar, kNoVar, kNoVar, kNoVar};  // 32 -> 8 per head
  std::array<Var, 4> k_w{kNoVar, kNoVar, kNoVar, kNoVar};  // 32 -> 8 per head
  Var v_w = kNoVar;            // 32 -> 32, shared; head i reads slice [8i, 8i+8)
  Var o_w = kNoVar;            // 32 -> 32 output projection
};
inline constexpr int kAttHeads = 4;
inline constexpr int kAttHeadDim = 8;

// P_hat: one-hot goal through k->64->64, concat pose, compress 68->48->32.
Var encode_goal(Tape& t, Var goal_onehot, Var pose, const MlpParams& goal_mlp,
                const MlpParams& compressor);

struct AggregateResult {
  Var f = kNoVar;  // 1 x 32
  Tensor att;      // heads x n softmax weights (pre-dropout), for logging
};

// Multi-head cross-attention of the goal query over the encoded memory.
// Dropout hits the attention weights only while training.
AggregateResult aggregate(Tape& t, Var p_hat, const TargetMemory& memory,
                          const AttentionParams& params, bool training,
                          real dropout_rate, Rng* rng);

}  // namespace iomnav
