#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "iomnav/trainer.hpp"

using namespace iomnav;

namespace {

Scene open_room(int w, int h, std::vector<SceneObject> objects,
                const std::string& id = "room_tr") {
  std::vector<std::string> rows(h, std::string(w, '.'));
  for (int x = 0; x < w; ++x) rows[0][x] = rows[h - 1][x] = '#';
  for (int y = 0; y < h; ++y) rows[y][0] = rows[y][w - 1] = '#';
  return make_scene(id, rows, std::move(objects));
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.num_classes = 4;
  m.iom_capacity = 8;
  m.memory_capacity = 6;
  m.s_dim = 16;
  m.dropout = 0.0;
  return m;
}

EnvConfig quiet_env() {
  EnvConfig env;
  env.noise_sigma = 0.0;
  env.max_steps = 40;
  return env;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("episode specs are valid, deterministic, and diverse") {
  auto scenes = gen_scenes(5, 1, 11, 11, 0.15, 4, "spec");
  const Scene& s = scenes[0];

  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    EpisodeSpec x = sample_episode_spec(s, 3, a);
    EpisodeSpec y = sample_episode_spec(s, 3, b);
    CHECK(x.start.q.x == y.start.q.x);
    CHECK(x.start.q.y == y.start.q.y);
    CHECK(x.start.yaw == y.start.yaw);
    CHECK(x.target_class == y.target_class);
  }

  Rng rng(7);
  std::set<std::pair<int, int>> cells;
  std::set<int> classes;
  for (int i = 0; i < 500; ++i) {
    EpisodeSpec spec = sample_episode_spec(s, 3, rng);
    CHECK(spec.scene_index == 3);
    CHECK(s.is_free(spec.start.q.x, spec.start.q.y));
    CHECK(spec.start.yaw >= 0);
    CHECK(spec.start.yaw < 8);
    CHECK(spec.start.pitch == 0);
    bool present = false;
    for (const SceneObject& o : s.objects) present |= o.class_id == spec.target_class;
    CHECK(present);
    cells.insert({spec.start.q.x, spec.start.q.y});
    classes.insert(spec.target_class);
  }
  CHECK(cells.size() > 10);    // start cells actually vary
  CHECK(classes.size() == 4);  // every class gets drawn
}

TEST_CASE("oracle plans match hand-derived action sequences") {
  Scene s = open_room(9, 9, {{0, 7, 4, 1.0}});
  EnvConfig env = quiet_env();

  SUBCASE("straight approach needs no turning") {
    auto plan = oracle_actions(s, {{2, 4}, 2, 0}, 0, env);
    REQUIRE(plan.has_value());
    const std::vector<Action> want{Action::MoveAhead, Action::MoveAhead, Action::Done};
    CHECK(*plan == want);
  }
  SUBCASE("already standing in range facing the target") {
    auto plan = oracle_actions(s, {{4, 4}, 2, 0}, 0, env);
    REQUIRE(plan.has_value());
    CHECK(plan->size() == 1);
    CHECK(plan->front() == Action::Done);
  }
  SUBCASE("opposite facing resolves the four-turn tie to the right") {
    auto plan = oracle_actions(s, {{4, 4}, 6, 0}, 0, env);
    REQUIRE(plan.has_value());
    const std::vector<Action> want{Action::RotateRight, Action::RotateRight,
                                   Action::RotateRight, Action::RotateRight,
                                   Action::Done};
    CHECK(*plan == want);
  }
  SUBCASE("shorter way around turns left") {
    auto plan = oracle_actions(s, {{4, 4}, 4, 0}, 0, env);
    REQUIRE(plan.has_value());
    const std::vector<Action> want{Action::RotateLeft, Action::RotateLeft, Action::Done};
    CHECK(*plan == want);
  }
  SUBCASE("unreachable target yields no plan") {
    // Wall off the right half; the object becomes unreachable.
    std::vector<std::string> rows = {
        "#########", "#...#...#", "#...#...#", "#...#...#", "#...#..O#",
        "#...#...#", "#...#...#", "#...#...#", "#########"};
    for (auto& r : rows)
      for (auto& c : r)
        if (c == 'O') c = '.';
    Scene split = make_scene("split", rows, {{0, 7, 4, 1.0}});
    CHECK_FALSE(oracle_actions(split, {{2, 4}, 2, 0}, 0, env).has_value());
  }
}

TEST_CASE("forced oracle plans always succeed on replay") {
  auto scenes = gen_scenes(11, 4, 11, 11, 0.15, 4, "orc");
  EnvConfig env = quiet_env();
  env.max_steps = 100;
  ModelConfig mcfg = tiny_model();
  ParameterStore store;
  Rng prng(3);
  NavModel::register_params(mcfg, store, prng);
  NavModel model(mcfg, store);
  auto values = std::make_shared<const std::vector<Tensor>>(store.values());

  Rng rng(2718);
  int replayed = 0;
  for (int i = 0; i < 60; ++i) {
    const Scene& s = scenes[i % scenes.size()];
    EpisodeSpec spec = sample_episode_spec(s, 0, rng);
    auto plan = oracle_actions(s, spec.start, spec.target_class, env);
    if (!plan) continue;  // genuinely unreachable draw
    REQUIRE(static_cast<int>(plan->size()) <= env.max_steps);

    Rollout ep(s, model, env, RewardScheme::RM, spec.start, spec.target_class, nullptr);
    ep.begin_segment(values, false);
    auto path = shortest_path_to_success(s, spec.start.q, spec.target_class, env);
    REQUIRE(path.has_value());
    for (Action a : *plan) {
      REQUIRE_FALSE(ep.finished());
      ep.step(ActMode::Greedy, nullptr, static_cast<int>(a));
    }
    CHECK(ep.finished());
    CHECK(ep.success());
    CHECK(ep.collisions() == 0);
    CHECK(ep.traveled_length() == doctest::Approx(path->length).epsilon(1e-9));
    ++replayed;
  }
  CHECK(replayed > 30);  // the corpus is overwhelmingly reachable
}

TEST_CASE("behavior cloning memorizes a small oracle corpus") {
  std::vector<Scene> scenes = {open_room(9, 9, {{0, 7, 4, 1.0}, {1, 2, 6, 1.0}}, "bc0"),
                               open_room(9, 9, {{0, 2, 2, 1.0}, {1, 6, 6, 1.0}}, "bc1")};
  EnvConfig env = quiet_env();
  ModelConfig mcfg = tiny_model();
  mcfg.num_classes = 2;

  ParameterStore store;
  Rng prng(41);
  NavModel::register_params(mcfg, store, prng);

  PretrainConfig pc;
  pc.epochs = 100;
  pc.episodes_per_scene = 3;
  pc.lr = 3e-3;
  pc.seed = 12;

  PretrainResult res = pretrain(pc, mcfg, env, scenes, store);
  CHECK(res.labeled_episodes == 6);
  CHECK(res.labeled_steps > 0);
  CHECK(res.final_epoch_loss < res.first_epoch_loss);
  CHECK(res.final_accuracy >= 0.85);
}

TEST_CASE("zero pretraining epochs leave parameters untouched") {
  std::vector<Scene> scenes = {open_room(9, 9, {{0, 7, 4, 1.0}}, "b04")};
  EnvConfig env = quiet_env();
  ModelConfig mcfg = tiny_model();
  mcfg.num_classes = 1;
  ParameterStore store;
  Rng prng(43);
  NavModel::register_params(mcfg, store, prng);
  const std::vector<Tensor> before = store.values();

  PretrainConfig pc;
  pc.epochs = 0;
  pc.episodes_per_scene = 2;
  PretrainResult res = pretrain(pc, mcfg, env, scenes, store);
  CHECK(res.labeled_episodes > 0);
  CHECK(res.final_accuracy >= 0.0);
  CHECK(res.final_accuracy <= 1.0);
  CHECK(res.first_epoch_loss == res.final_epoch_loss);
  const std::vector<Tensor>& after = store.values();
  for (size_t i = 0; i < before.size(); ++i)
    for (int j = 0; j < before[i].size(); ++j)
      CHECK(before[i].data[j] == after[i].data[j]);
}

TEST_CASE("pretraining is deterministic for a fixed seed") {
  std::vector<Scene> scenes = {open_room(9, 9, {{0, 6, 3, 1.0}}, "pd")};
  EnvConfig env = quiet_env();
  ModelConfig mcfg = tiny_model();
  mcfg.num_classes = 1;
  PretrainConfig pc;
  pc.epochs = 4;
  pc.episodes_per_scene = 2;
  pc.lr = 1e-3;

  auto run = [&]() {
    ParameterStore store;
    Rng prng(44);
    NavModel::register_params(mcfg, store, prng);
    pretrain(pc, mcfg, env, scenes, store);
    return store.values();
  };
  const std::vector<Tensor> a = run(), b = run();
  for (size_t i = 0; i < a.size(); ++i)
    for (int j = 0; j < a[i].size(); ++j) CHECK(a[i].data[j] == b[i].data[j]);
}

TEST_CASE("training configuration is validated") {
  std::vector<Scene> scenes = {open_room(9, 9, {{0, 7, 4, 1.0}}, "tv")};
  EnvConfig env = quiet_env();
  ModelConfig mcfg = tiny_model();
  mcfg.num_classes = 1;
  ParameterStore store;
  Rng prng(45);
  NavModel::register_params(mcfg, store, prng);

  TrainConfig tc;
  tc.episodes_total = 1;
  tc.workers = 0;
  CHECK_THROWS_AS(train_rl(tc, mcfg, env, scenes, store), ConfigError);
  tc.workers = 1;
  tc.gamma = 1.5;
  CHECK_THROWS_AS(train_rl(tc, mcfg, env, scenes, store), ConfigError);
  tc.gamma = 0.99;
  tc.n_step = 0;
  CHECK_THROWS_AS(train_rl(tc, mcfg, env, scenes, store), ConfigError);
  tc.n_step = 5;
  CHECK_THROWS_AS(train_rl(tc, mcfg, env, {}, store), ConfigError);
  tc.log_path = "/definitely/not/here.log";
  CHECK_THROWS_AS(train_rl(tc, mcfg, env, scenes, store), IoError);
}

TEST_CASE("single-worker training is bit-deterministic") {
  std::vector<Scene> scenes = {open_room(9, 9, {{0, 7, 4, 1.0}, {1, 2, 6, 1.0}}, "det")};
  EnvConfig env = quiet_env();
  env.max_steps = 30;
  ModelConfig mcfg = tiny_model();
  mcfg.num_classes = 2;

  TrainConfig tc;
  tc.workers = 1;
  tc.episodes_total = 6;
  tc.n_step = 5;
  tc.lr = 1e-3;
  tc.seed = 5;
  tc.detector_noise = true;

  auto run = [&](const std::string& log) {
    ParameterStore store;
    Rng prng(46);
    NavModel::register_params(mcfg, store, prng);
    TrainConfig local = tc;
    local.log_path = log;
    TrainStats st = train_rl(local, mcfg, env, scenes, store);
    return std::make_pair(st, store.values());
  };
  const std::string log_a = temp_path("train_a.jsonl"), log_b = temp_path("train_b.jsonl");
  auto [sa, va] = run(log_a);
  auto [sb, vb] = run(log_b);

  CHECK(sa.episodes == 6);
  CHECK(sa.skipped_nonfinite == 0);
  CHECK(sa.updates >= 1);
  CHECK(sa.updates == sb.updates);
  CHECK(slurp(log_a) == slurp(log_b));
  CHECK_FALSE(slurp(log_a).empty());
  for (size_t i = 0; i < va.size(); ++i)
    for (int j = 0; j < va[i].size(); ++j) CHECK(va[i].data[j] == vb[i].data[j]);

  // The log is well-formed JSONL with the promised keys, in episode order.
  std::ifstream in(log_a);
  std::string line;
  long expect_ep = 0;
  long last_version = -1;
  while (std::getline(in, line)) {
    nlohmann::json rec = nlohmann::json::parse(line);
    CHECK(rec.at("episode").get<long>() == expect_ep);
    CHECK(rec.at("worker").get<int>() == 0);
    CHECK(rec.contains("reward"));
    CHECK(rec.at("steps").get<int>() >= 1);
    CHECK(rec.contains("success"));
    CHECK(rec.at("collisions").get<int>() >= 0);
    const long v = rec.at("version").get<long>();
    CHECK(v >= last_version);
    last_version = v;
    ++expect_ep;
  }
  CHECK(expect_ep == 6);
  std::remove(log_a.c_str());
  std::remove(log_b.c_str());
}

TEST_CASE("training writes a loadable checkpoint of the final parameters") {
  std::vector<Scene> scenes = {open_room(9, 9, {{0, 7, 4, 1.0}}, "ck")};
  EnvConfig env = quiet_env();
  env.max_steps = 25;
  ModelConfig mcfg = tiny_model();
  mcfg.num_classes = 1;
  ParameterStore store;
  Rng prng(47);
  NavModel::register_params(mcfg, store, prng);

  TrainConfig tc;
  tc.workers = 1;
  tc.episodes_total = 3;
  tc.n_step = 6;
  tc.seed = 9;
  tc.checkpoint_every = 2;
  tc.checkpoint_path = temp_path("train_ck.json");
  train_rl(tc, mcfg, env, scenes, store);

  ParameterStore loaded;
  Rng prng2(48);
  NavModel::register_params(mcfg, loaded, prng2);
  loaded.load(tc.checkpoint_path);
  const auto& a = store.values();
  const auto& b = loaded.values();
  for (size_t i = 0; i < a.size(); ++i)
    for (int j = 0; j < a[i].size(); ++j) CHECK(a[i].data[j] == b[i].data[j]);
  std::remove(tc.checkpoint_path.c_str());
}

TEST_CASE("multi-worker training completes the requested episode count") {
  std::vector<Scene> scenes = {open_room(9, 9, {{0, 7, 4, 1.0}}, "mw")};
  EnvConfig env = quiet_env();
  env.max_steps = 20;
  ModelConfig mcfg = tiny_model();
  mcfg.num_classes = 1;
  ParameterStore store;
  Rng prng(49);
  NavModel::register_params(mcfg, store, prng);

  TrainConfig tc;
  tc.workers = 2;
  tc.episodes_total = 4;
  tc.n_step = 5;
  tc.seed = 11;
  TrainStats st = train_rl(tc, mcfg, env, scenes, store);
  CHECK(st.episodes == 4);
  CHECK(st.updates >= 1);
}
