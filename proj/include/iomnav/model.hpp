#pragma once

#include <string>
#include <vector>

#include "iomnav/common.hpp"
#include "iomnav/iom.hpp"
#include "iomnav/param_store.hpp"
#include "iomnav/sim.hpp"
#include "iomnav/tape.hpp"
#include "iomnav/target_memory.hpp"

namespace iomnav {

struct ModelConfig {
  int num_classes = 8;       // k
  int iom_capacity = 32;     // e
  int memory_capacity = 20;  // tau
  int patch_radius = 2;
  int s_dim = 128;
  real dropout = 0.1;
  bool no_iom = false;   // M_t forced to zero
  bool no_ntma = false;  // F_t = mean of encoded memory rows
  int patch_dim() const { return (2 * patch_radius + 1) * (2 * patch_radius + 1); }
  int fuse_in() const { return patch_dim() + 5 + 32 + 32; }
};

// All tape variables for one forward pass, mapped from ParameterStore slots.
struct ModelParams {
  IomParams iom;
  MlpParams goal_mlp;     // k -> 64 -> 64
  MlpParams compressor;   // 68 -> 48 -> 32
  AttentionParams att;    // encoder 9 -> 32 -> 32 + 4-head projections
  Var fuse_w = kNoVar, fuse_b = kNoVar;
  Var lstm_wx = kNoVar, lstm_wh = kNoVar, lstm_b = kNoVar;
  Var actor_w = kNoVar, actor_b = kNoVar;
  Var critic_w = kNoVar, critic_b = kNoVar;
};

struct BoundParams {
  std::vector<Var> slots;  // aligned with ParameterStore slot order
  ModelParams p;
};

struct StepInputs {
  Tensor patch;       // 1 x patch_dim
  Tensor detection;   // 1 x 5
  Tensor pose;        // 1 x 4 (normalized l_t)
  Tensor goal;        // 1 x k one-hot
  Tensor iom_matrix;  // e x 10
};

struct PolicyStepResult {
  Var logits = kNoVar;  // 1 x 6
  Var value = kNoVar;   // 1 x 1
  LstmState state;
  Tensor att;  // heads x n attention weights; empty when unused
};

enum class ActMode { Sample, Greedy };

struct ActResult {
  Action action;
  real log_prob = 0;
  real value = 0;
  Tensor h, c;  // recurrent state values to carry forward
  Tensor att;
};

class NavModel {
 public:
  // Creates all parameter slots in `store` with Xavier-uniform weights, zero
  // biases, and forget-gate bias 1.
  static void register_params(const ModelConfig& cfg, ParameterStore& store, Rng& rng);

  // Resolves slot indices by name; store must already hold a matching layout.
  NavModel(const ModelConfig& cfg, const ParameterStore& store);

  const ModelConfig& config() const { return cfg_; }

  BoundParams bind(Tape& t, const std::vector<Tensor>& values) const;

  // One recurrent policy step. prev holds this tape's h/c vars (zero leaves at
  // episode start). rng is only consulted for attention dropout in training.
  PolicyStepResult policy_step(Tape& t, const ModelParams& p, const StepInputs& in,
                               const TargetMemory& memory, const LstmState& prev,
                               bool training, Rng* rng) const;

  LstmState initial_state(Tape& t) const;

  // Convenience evaluation-style step on a throwaway tape.
  ActResult act(const std::vector<Tensor>& values, const StepInputs& in,
                const TargetMemory& memory, const Tensor& h, const Tensor& c,
                ActMode mode, Rng* rng) const;

 private:
  ModelConfig cfg_;
  std::vector<int> slot_of_;           // field order -> store slot
  static std::vector<std::pair<std::string, std::array<int, 2>>> layout(
      const ModelConfig& cfg);
};

// Draw an index from a 1 x n probability row.
int sample_index(const Tensor& probs, Rng& rng);
// Lowest index among maxima.
int argmax_index(const Tensor& row);

}  // namespace iomnav
