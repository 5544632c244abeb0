#pragma once

#include <string>

#include "iomnav/metrics.hpp"
#include "iomnav/model.hpp"
#include "iomnav/sim.hpp"
#include "iomnav/trainer.hpp"
#include "json.hpp"

namespace iomnav {

// Flat run configuration; the JSON schema is exactly these keys and every key
// is optional. Unknown keys are rejected with the offending name.
struct RunConfig {
  // environment
  real success_radius = 3.0;
  real confidence_threshold = 0.4;
  real max_view_range = 10.0;
  int patch_radius = 2;
  int max_steps = 100;
  real noise_sigma = 0.05;
  bool corner_cutting = true;
  // model
  int num_classes = 8;
  int iom_capacity = 32;
  int memory_capacity = 20;
  int s_dim = 128;
  real dropout = 0.1;
  bool no_iom = false;
  bool no_ntma = false;
  std::string reward_scheme = "rm";
  // pretraining
  int pretrain_epochs = 20;
  int pretrain_episodes_per_scene = 4;
  // reinforcement learning
  int workers = 4;
  long episodes_total = 50000;
  real gamma = 0.99;
  int n_step = 20;
  real entropy_coef = 0.01;
  real value_coef = 0.5;
  real lr = 1e-4;
  bool detector_noise_train = true;
  long checkpoint_every = 0;
  // evaluation
  int eval_episodes_per_scene = 5;
  int eval_repeats = 3;
  bool detector_noise_eval = false;
  // corpus
  std::string train_scenes;
  std::string val_scenes;
  std::string test_scenes;
  uint64_t seed = 1;
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::string& origin);
RunConfig load_run_config(const std::string& path);
nlohmann::ordered_json run_config_to_json(const RunConfig& rc);
void save_run_config(const RunConfig& rc, const std::string& path);

EnvConfig env_config(const RunConfig& rc);
ModelConfig model_config(const RunConfig& rc);
TrainConfig train_config(const RunConfig& rc);
PretrainConfig pretrain_config(const RunConfig& rc);
EvalConfig eval_config(const RunConfig& rc);

}  // namespace iomnav
