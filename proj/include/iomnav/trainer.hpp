#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iomnav/episode.hpp"
#include "iomnav/model.hpp"
#include "iomnav/param_store.hpp"
#include "iomnav/scene.hpp"
#include "iomnav/sim.hpp"

namespace iomnav {

struct EpisodeSpec {
  int scene_index = 0;
  AgentPose start;
  int target_class = 0;
};

// Random free start cell, random yaw, level pitch, random class present in the
// scene. Deterministic given the rng state.
EpisodeSpec sample_episode_spec(const Scene& scene, int scene_index, Rng& rng);

// Optimal action sequence: rotate by the minimal signed yaw difference (ties
// toward RotateRight), MoveAhead along the shortest path, turn toward the
// target if needed, Done. nullopt when no success cell is reachable.
std::optional<std::vector<Action>> oracle_actions(const Scene& scene,
                                                  const AgentPose& start,
                                                  int target_class,
                                                  const EnvConfig& env);

struct PretrainConfig {
  int epochs = 20;
  int episodes_per_scene = 4;
  real lr = 1e-4;
  real gamma = 0.99;      // discount for the value-regression targets
  real value_coef = 0.1;  // weight of the critic warm-up term
  uint64_t seed = 1;
};

struct PretrainResult {
  long labeled_episodes = 0;
  long labeled_steps = 0;
  real first_epoch_loss = 0;  // mean per-step cross entropy
  real final_epoch_loss = 0;
  real final_accuracy = 0;  // teacher-forced argmax agreement after training
};

// Behavior cloning against the shortest-path oracle; teacher-forced recurrent
// episodes, one Adam update per episode. Unreachable draws are skipped.
PretrainResult pretrain(const PretrainConfig& cfg, const ModelConfig& mcfg,
                        const EnvConfig& env, const std::vector<Scene>& scenes,
                        ParameterStore& store);

struct TrainConfig {
  int workers = 4;
  long episodes_total = 50000;
  real gamma = 0.99;
  int n_step = 20;
  real entropy_coef = 0.01;
  real value_coef = 0.5;
  real lr = 1e-4;
  uint64_t seed = 1;
  RewardScheme scheme = RewardScheme::RM;
  bool detector_noise = true;
  long checkpoint_every = 0;  // episodes; 0 disables periodic checkpoints
  std::string checkpoint_path;
  std::string log_path;  // JSONL, one line per episode; empty disables
};

struct TrainStats {
  long episodes = 0;
  long updates = 0;
  long skipped_nonfinite = 0;
  real mean_reward_tail = 0;   // over the last (up to) 1000 episodes
  real success_rate_tail = 0;
};

// Advantage actor-critic with n-step returns. Workers roll out against
// parameter snapshots refreshed between segments; gradient applications are
// serialized. workers=1 is bit-deterministic given (seed, scenes).
TrainStats train_rl(const TrainConfig& cfg, const ModelConfig& mcfg,
                    const EnvConfig& env, const std::vector<Scene>& scenes,
                    ParameterStore& store);

}  // namespace iomnav
