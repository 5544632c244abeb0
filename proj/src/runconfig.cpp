#include "iomnav/runconfig.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

namespace iomnav {

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const std::string& key, T& out,
              const std::string& origin) {
  try {
    out = j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(origin + ": bad value for key '" + key + "'");
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j, const std::string& origin) {
  if (!j.is_object()) throw ConfigError(origin + ": config root must be an object");
  RunConfig rc;
  using Setter = std::function<void(const nlohmann::json&, const std::string&)>;
  const std::vector<std::pair<std::string, Setter>> schema = {
      {"success_radius", [&](auto& v, auto& k) { read_key(v, k, rc.success_radius, origin); }},
      {"confidence_threshold", [&](auto& v, auto& k) { read_key(v, k, rc.confidence_threshold, origin); }},
      {"max_view_range", [&](auto& v, auto& k) { read_key(v, k, rc.max_view_range, origin); }},
      {"patch_radius", [&](auto& v, auto& k) { read_key(v, k, rc.patch_radius, origin); }},
      {"max_steps", [&](auto& v, auto& k) { read_key(v, k, rc.max_steps, origin); }},
      {"noise_sigma", [&](auto& v, auto& k) { read_key(v, k, rc.noise_sigma, origin); }},
      {"corner_cutting", [&](auto& v, auto& k) { read_key(v, k, rc.corner_cutting, origin); }},
      {"num_classes", [&](auto& v, auto& k) { read_key(v, k, rc.num_classes, origin); }},
      {"iom_capacity", [&](auto& v, auto& k) { read_key(v, k, rc.iom_capacity, origin); }},
      {"memory_capacity", [&](auto& v, auto& k) { read_key(v, k, rc.memory_capacity, origin); }},
      {"s_dim", [&](auto& v, auto& k) { read_key(v, k, rc.s_dim, origin); }},
      {"dropout", [&](auto& v, auto& k) { read_key(v, k, rc.dropout, origin); }},
      {"no_iom", [&](auto& v, auto& k) { read_key(v, k, rc.no_iom, origin); }},
      {"no_ntma", [&](auto& v, auto& k) { read_key(v, k, rc.no_ntma, origin); }},
      {"reward_scheme", [&](auto& v, auto& k) { read_key(v, k, rc.reward_scheme, origin); }},
      {"pretrain_epochs", [&](auto& v, auto& k) { read_key(v, k, rc.pretrain_epochs, origin); }},
      {"pretrain_episodes_per_scene", [&](auto& v, auto& k) { read_key(v, k, rc.pretrain_episodes_per_scene, origin); }},
      {"workers", [&](auto& v, auto& k) { read_key(v, k, rc.workers, origin); }},
      {"episodes_total", [&](auto& v, auto& k) { read_key(v, k, rc.episodes_total, origin); }},
      {"gamma", [&](auto& v, auto& k) { read_key(v, k, rc.gamma, origin); }},
      {"n_step", [&](auto& v, auto& k) { read_key(v, k, rc.n_step, origin); }},
      {"entropy_coef", [&](auto& v, auto& k) { read_key(v, k, rc.entropy_coef, origin); }},
      {"value_coef", [&](auto& v, auto& k) { read_key(v, k, rc.value_coef, origin); }},
      {"lr", [&](auto& v, auto& k) { read_key(v, k, rc.lr, origin); }},
      {"detector_noise_train", [&](auto& v, auto& k) { read_key(v, k, rc.detector_noise_train, origin); }},
      {"checkpoint_every", [&](auto& v, auto& k) { read_key(v, k, rc.checkpoint_every, origin); }},
      {"eval_episodes_per_scene", [&](auto& v, auto& k) { read_key(v, k, rc.eval_episodes_per_scene, origin); }},
      {"eval_repeats", [&](auto& v, auto& k) { read_key(v, k, rc.eval_repeats, origin); }},
      {"detector_noise_eval", [&](auto& v, auto& k) { read_key(v, k, rc.detector_noise_eval, origin); }},
      {"train_scenes", [&](auto& v, auto& k) { read_key(v, k, rc.train_scenes, origin); }},
      {"val_scenes", [&](auto& v, auto& k) { read_key(v, k, rc.val_scenes, origin); }},
      {"test_scenes", [&](auto& v, auto& k) { read_key(v, k, rc.test_scenes, origin); }},
      {"seed", [&](auto& v, auto& k) { read_key(v, k, rc.seed, origin); }},
  };
  for (const auto& [key, value] : j.items()) {
    auto it = std::find_if(schema.begin(), schema.end(),
                           [&](const auto& s) { return s.first == key; });
    if (it == schema.end())
      throw ConfigError(origin + ": unknown config key '" + key + "'");
    it->second(value, key);
  }
  if (!reward_scheme_from_name(rc.reward_scheme))
    throw ConfigError(origin + ": reward_scheme must be 'rm' or 'sparse'");
  if (rc.num_classes < 1) throw ConfigError(origin + ": num_classes must be >= 1");
  if (rc.dropout < 0.0 || rc.dropout >= 1.0)
    throw ConfigError(origin + ": dropout must be in [0,1)");
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j, path);
}

nlohmann::ordered_json run_config_to_json(const RunConfig& rc) {
  return nlohmann::ordered_json{
      {"success_radius", rc.success_radius},
      {"confidence_threshold", rc.confidence_threshold},
      {"max_view_range", rc.max_view_range},
      {"patch_radius", rc.patch_radius},
      {"max_steps", rc.max_steps},
      {"noise_sigma", rc.noise_sigma},
      {"corner_cutting", rc.corner_cutting},
      {"num_classes", rc.num_classes},
      {"iom_capacity", rc.iom_capacity},
      {"memory_capacity", rc.memory_capacity},
      {"s_dim", rc.s_dim},
      {"dropout", rc.dropout},
      {"no_iom", rc.no_iom},
      {"no_ntma", rc.no_ntma},
      {"reward_scheme", rc.reward_scheme},
      {"pretrain_epochs", rc.pretrain_epochs},
      {"pretrain_episodes_per_scene", rc.pretrain_episodes_per_scene},
      {"workers", rc.workers},
      {"episodes_total", rc.episodes_total},
      {"gamma", rc.gamma},
      {"n_step", rc.n_step},
      {"entropy_coef", rc.entropy_coef},
      {"value_coef", rc.value_coef},
      {"lr", rc.lr},
      {"detector_noise_train", rc.detector_noise_train},
      {"checkpoint_every", rc.checkpoint_every},
      {"eval_episodes_per_scene", rc.eval_episodes_per_scene},
      {"eval_repeats", rc.eval_repeats},
      {"detector_noise_eval", rc.detector_noise_eval},
      {"train_scenes", rc.train_scenes},
      {"val_scenes", rc.val_scenes},
      {"test_scenes", rc.test_scenes},
      {"seed", rc.seed},
  };
}

void save_run_config(const RunConfig& rc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file " + path);
  out << run_config_to_json(rc).dump(2) << "\n";
}

EnvConfig env_config(const RunConfig& rc) {
  EnvConfig e;
  e.success_radius = rc.success_radius;
  e.confidence_threshold = rc.confidence_threshold;
  e.max_view_range = rc.max_view_range;
  e.patch_radius = rc.patch_radius;
  e.max_steps = rc.max_steps;
  e.noise_sigma = rc.noise_sigma;
  e.corner_cutting = rc.corner_cutting;
  return e;
}

ModelConfig model_config(const RunConfig& rc) {
  ModelConfig m;
  m.num_classes = rc.num_classes;
  m.iom_capacity = rc.iom_capacity;
  m.memory_capacity = rc.memory_capacity;
  m.patch_radius = rc.patch_radius;
  m.s_dim = rc.s_dim;
  m.dropout = rc.dropout;
  m.no_iom = rc.no_iom;
  m.no_ntma = rc.no_ntma;
  return m;
}

TrainConfig train_config(const RunConfig& rc) {
  TrainConfig t;
  t.workers = rc.workers;
  t.episodes_total = rc.episodes_total;
  t.gamma = rc.gamma;
  t.n_step = rc.n_step;
  t.entropy_coef = rc.entropy_coef;
  t.value_coef = rc.value_coef;
  t.lr = rc.lr;
  t.seed = rc.seed;
  t.scheme = *reward_scheme_from_name(rc.reward_scheme);
  t.detector_noise = rc.detector_noise_train;
  t.checkpoint_every = rc.checkpoint_every;
  return t;
}

PretrainConfig pretrain_config(const RunConfig& rc) {
  PretrainConfig p;
  p.epochs = rc.pretrain_epochs;
  p.episodes_per_scene = rc.pretrain_episodes_per_scene;
  p.lr = rc.lr;
  p.gamma = rc.gamma;
  p.seed = rc.seed;
  return p;
}

EvalConfig eval_config(const RunConfig& rc) {
  EvalConfig e;
  e.episodes_per_scene = rc.eval_episodes_per_scene;
  e.repeats = rc.eval_repeats;
  e.seed = rc.seed;
  e.detector_noise = rc.detector_noise_eval;
  return e;
}

}  // namespace iomnav
