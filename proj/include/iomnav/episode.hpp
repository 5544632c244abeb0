#pragma once

#include <memory>
#include <string>
#include <vector>

#include "iomnav/common.hpp"
#include "iomnav/iom.hpp"
#include "iomnav/model.hpp"
#include "iomnav/reward.hpp"
#include "iomnav/scene.hpp"
#include "iomnav/sim.hpp"
#include "iomnav/target_memory.hpp"

namespace iomnav {

struct TraceStep {
  int t = 0;
  int x = 0, y = 0, yaw = 0, pitch = 0;  // pose after the action
  Action action = Action::Done;
  real reward = 0;
  bool collided = false;
  real conf = 0;  // detection confidence the reward used this step
  std::vector<real> att_weights;  // head-averaged, oldest memory row first
};

struct TraceMeta {
  std::string scene_id;
  AgentPose start;
  int target_class = 0;
  RewardScheme scheme = RewardScheme::RM;
  bool success = false;
};

// One navigation episode rolled against parameter snapshots. A segment is one
// tape: begin_segment starts a fresh graph, the recurrent state crosses
// segment boundaries as constants (truncated backprop).
class Rollout {
 public:
  Rollout(const Scene& scene, const NavModel& model, const EnvConfig& env,
          RewardScheme scheme, AgentPose start, int target_class,
          Rng* detector_rng);

  void begin_segment(std::shared_ptr<const std::vector<Tensor>> values, bool training);

  struct StepRecord {
    Var logits = kNoVar;
    Var value = kNoVar;
    int action = 0;
    real reward = 0;
    bool terminal = false;
  };
  // Decide with the policy, apply to the environment, score the step.
  // policy_rng drives action sampling and attention dropout. forced_action
  // >= 0 overrides the decision (teacher forcing); logits are still produced.
  StepRecord step(ActMode mode, Rng* policy_rng, int forced_action = -1);

  // Critic estimate of the current state; leaves recurrent state untouched.
  real bootstrap_value();

  bool finished() const { return finished_; }
  bool success() const { return success_; }
  int steps() const { return t_; }
  int collisions() const { return collisions_; }
  int move_ahead_actions() const { return move_aheads_; }
  real traveled_length() const;
  real total_reward() const { return total_reward_; }

  const std::vector<TraceStep>& trace() const { return trace_; }
  const TraceMeta& meta() const { return meta_; }
  Tape& tape() { return *tape_; }
  const BoundParams& bound() const { return bound_; }
  const ImplicitObstacleMap& iom() const { return iom_; }
  const TargetMemory& memory() const { return memory_; }
  const AgentPose& pose() const { return pose_; }

 private:
  StepInputs make_inputs() const;

  const Scene& scene_;
  const NavModel& model_;
  EnvConfig env_;
  RewardScheme scheme_;
  int target_class_;
  Coord origin_;
  real norm_scale_;
  Rng* detector_rng_;

  ImplicitObstacleMap iom_;
  TargetMemory memory_;
  std::vector<real> dist_field_;

  AgentPose pose_;
  Observation obs_;
  bool prev_collided_ = false;
  bool finished_ = false, success_ = false;
  int t_ = 0, collisions_ = 0, axis_moves_ = 0, diag_moves_ = 0, move_aheads_ = 0;
  real total_reward_ = 0;

  std::unique_ptr<Tape> tape_;
  std::shared_ptr<const std::vector<Tensor>> values_;
  BoundParams bound_;
  bool training_ = false;
  Tensor h_val_, c_val_;
  LstmState state_;

  TraceMeta meta_;
  std::vector<TraceStep> trace_;
};

// Trace files are JSON-lines: a meta header line, then one record per step.
void write_trace(const std::string& path, const TraceMeta& meta,
                 const std::vector<TraceStep>& steps);

struct LoadedTrace {
  TraceMeta meta;
  std::vector<TraceStep> steps;
};
LoadedTrace read_trace(const std::string& path);

// Re-executes a trace against the scene: checks poses and collision flags
// follow from the actions, rewards recompute exactly from the stored
// confidences, and the stored success flag matches.
struct ReplayReport {
  int steps = 0;
  bool ok = true;
  std::string error;  // first mismatch, empty when ok
};
ReplayReport replay_trace(const Scene& scene, const LoadedTrace& trace,
                          const EnvConfig& env);

}  // namespace iomnav
