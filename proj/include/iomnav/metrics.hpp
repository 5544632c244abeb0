#pragma once

#include <map>
#include <string>
#include <vector>

#include "iomnav/common.hpp"
#include "iomnav/model.hpp"
#include "iomnav/param_store.hpp"
#include "iomnav/scene.hpp"
#include "iomnav/sim.hpp"
#include "json.hpp"

namespace iomnav {

struct EpisodeResult {
  bool success = false;
  real length = 0;   // L: geometric length actually traveled
  real optimal = 0;  // L*: oracle shortest length
  int move_ahead_actions = 0;
  int total_actions = 0;
  int collisions = 0;
  std::string scene_id;
};

real success_rate(const std::vector<EpisodeResult>& rs);
// (1/K) sum Suc_i * L_i* / max(L_i, L_i*); a successful episode with
// L = L* = 0 counts 1.
real spl(const std::vector<EpisodeResult>& rs);
// (1/K) sum Suc_i * move_ahead / total actions.
real sae(const std::vector<EpisodeResult>& rs);
// Mean collisions per episode by scene family.
std::map<std::string, real> collision_stats(const std::vector<EpisodeResult>& rs);

struct MetricsReport {
  real sr_all = 0, spl_all = 0, sae_all = 0;
  real sr_ge5 = 0, spl_ge5 = 0, sae_ge5 = 0;
  std::map<std::string, real> collisions_by_group;
  int skipped = 0;   // episode specs without a reachable success cell
  int episodes = 0;  // evaluated specs per repetition
  real att_recency_pref = 0;  // mean extra weight on the newest memory row
};

nlohmann::ordered_json metrics_to_json(const MetricsReport& m);
void write_metrics_json(const MetricsReport& m, const std::string& path);
void write_collisions_csv(const MetricsReport& m, const std::string& path);

struct EvalConfig {
  int episodes_per_scene = 5;
  int repeats = 3;
  uint64_t seed = 1;
  bool detector_noise = false;
  std::string traces_dir;  // when set, first-repetition traces land here
};

// Greedy evaluation over seeded episode specs; metrics are averaged over
// `repeats` runs of the same specs. Reachability-skipped specs are counted,
// not evaluated.
MetricsReport evaluate(const EvalConfig& cfg, const ModelConfig& mcfg,
                       const EnvConfig& env, const std::vector<Scene>& scenes,
                       const ParameterStore& store);

}  // namespace iomnav
