#include "iomnav/metrics.hpp"

#include <filesystem>
#include <fstream>

#include "iomnav/episode.hpp"
#include "iomnav/trainer.hpp"

namespace iomnav {

real success_rate(const std::vector<EpisodeResult>& rs) {
  if (rs.empty()) return 0;
  long wins = 0;
  for (const auto& r : rs) wins += r.success ? 1 : 0;
  return static_cast<real>(wins) / static_cast<real>(rs.size());
}

real spl(const std::vector<EpisodeResult>& rs) {
  if (rs.empty()) return 0;
  real sum = 0;
  for (const auto& r : rs) {
    if (!r.success) continue;
    const real denom = std::max(r.length, r.optimal);
    sum += denom == 0 ? 1.0 : r.optimal / denom;
  }
  return sum / static_cast<real>(rs.size());
}

real sae(const std::vector<EpisodeResult>& rs) {
  if (rs.empty()) return 0;
  real sum = 0;
  for (const auto& r : rs) {
    if (!r.success || r.total_actions == 0) continue;
    sum += static_cast<real>(r.move_ahead_actions) / static_cast<real>(r.total_actions);
  }
  return sum / static_cast<real>(rs.size());
}

std::map<std::string, real> collision_stats(const std::vector<EpisodeResult>& rs) {
  std::map<std::string, std::pair<long, long>> acc;  // family -> (collisions, count)
  for (const auto& r : rs) {
    auto& [c, n] = acc[scene_family(r.scene_id)];
    c += r.collisions;
    ++n;
  }
  std::map<std::string, real> out;
  for (const auto& [fam, cn] : acc)
    out[fam] = static_cast<real>(cn.first) / static_cast<real>(cn.second);
  return out;
}

nlohmann::ordered_json metrics_to_json(const MetricsReport& m) {
  nlohmann::ordered_json j{{"sr_all", m.sr_all},   {"spl_all", m.spl_all},
                           {"sae_all", m.sae_all}, {"sr_ge5", m.sr_ge5},
                           {"spl_ge5", m.spl_ge5}, {"sae_ge5", m.sae_ge5},
                           {"collisions_by_group", m.collisions_by_group},
                           {"skipped", m.skipped}, {"episodes", m.episodes},
                           {"att_recency_pref", m.att_recency_pref}};
  return j;
}

void write_metrics_json(const MetricsReport& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics report " + path);
  out << metrics_to_json(m).dump(2) << "\n";
}

void write_collisions_csv(const MetricsReport& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write collision stats " + path);
  out << "scene_family,mean_collisions\n";
  for (const auto& [fam, mean] : m.collisions_by_group)
    out << fam << "," << mean << "\n";
}

MetricsReport evaluate(const EvalConfig& cfg, const ModelConfig& mcfg,
                       const EnvConfig& env, const std::vector<Scene>& scenes,
                       const ParameterStore& store) {
  if (scenes.empty()) throw ConfigError("evaluate needs at least one scene");
  if (cfg.repeats < 1) throw ConfigError("repeats must be >= 1");
  NavModel model(mcfg, store);
  auto values = std::make_shared<const std::vector<Tensor>>(store.values());

  // Episode specs are fixed across repetitions.
  struct PlannedEpisode {
    EpisodeSpec spec;
    real optimal = 0;
  };
  std::vector<PlannedEpisode> plan;
  MetricsReport report;
  {
    Rng spec_rng(cfg.seed, 501);
    for (size_t si = 0; si < scenes.size(); ++si) {
      for (int k = 0; k < cfg.episodes_per_scene; ++k) {
        EpisodeSpec spec = sample_episode_spec(scenes[si], static_cast<int>(si), spec_rng);
        auto l_star =
            shortest_path_length(scenes[si], spec.start, spec.target_class, env);
        if (!l_star) {
          ++report.skipped;
          continue;
        }
        plan.push_back({spec, *l_star});
      }
    }
  }
  report.episodes = static_cast<int>(plan.size());

  if (!cfg.traces_dir.empty())
    std::filesystem::create_directories(cfg.traces_dir);

  real sr_a = 0, spl_a = 0, sae_a = 0, sr_g = 0, spl_g = 0, sae_g = 0;
  std::map<std::string, real> coll_acc;
  real att_sum = 0;
  long att_n = 0;

  for (int rep = 0; rep < cfg.repeats; ++rep) {
    Rng detector_rng(cfg.seed, 9000 + rep);
    std::vector<EpisodeResult> all, ge5;
    for (size_t pi = 0; pi < plan.size(); ++pi) {
      const PlannedEpisode& pe = plan[pi];
      const Scene& scene = scenes[pe.spec.scene_index];
      Rollout roll(scene, model, env, RewardScheme::RM, pe.spec.start,
                   pe.spec.target_class, cfg.detector_noise ? &detector_rng : nullptr);
      roll.begin_segment(values, false);
      while (!roll.finished()) roll.step(ActMode::Greedy, nullptr);

      EpisodeResult r;
      r.success = roll.success();
      r.length = roll.traveled_length();
      r.optimal = pe.optimal;
      r.move_ahead_actions = roll.move_ahead_actions();
      r.total_actions = roll.steps();
      r.collisions = roll.collisions();
      r.scene_id = scene.scene_id;
      if (r.success && r.length < r.optimal - 1e-9)
        throw Error("evaluation episode beat the oracle path: scene " + scene.scene_id);
      for (const TraceStep& s : roll.trace()) {
        const size_t n = s.att_weights.size();
        if (n >= 2) {
          att_sum += s.att_weights.back() - 1.0 / static_cast<real>(n);
          ++att_n;
        }
      }
      if (rep == 0 && !cfg.traces_dir.empty()) {
        write_trace(cfg.traces_dir + "/ep_" + std::to_string(pi) + "_" +
                        scene.scene_id + ".jsonl",
                    roll.meta(), roll.trace());
      }
      all.push_back(r);
      if (pe.optimal >= 5.0) ge5.push_back(r);
    }
    sr_a += success_rate(all);
    spl_a += spl(all);
    sae_a += sae(all);
    sr_g += success_rate(ge5);
    spl_g += spl(ge5);
    sae_g += sae(ge5);
    for (const auto& [fam, mean] : collision_stats(all)) coll_acc[fam] += mean;
  }

  const real k = static_cast<real>(cfg.repeats);
  report.sr_all = sr_a / k;
  report.spl_all = spl_a / k;
  report.sae_all = sae_a / k;
  report.sr_ge5 = sr_g / k;
  report.spl_ge5 = spl_g / k;
  report.sae_ge5 = sae_g / k;
  for (const auto& [fam, sum] : coll_acc) report.collisions_by_group[fam] = sum / k;
  report.att_recency_pref = att_n > 0 ? att_sum / static_cast<real>(att_n) : 0.0;
  return report;
}

}  // namespace iomnav
