#include "iomnav/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <fstream>
#include <mutex>
#include <numbers>
#include <thread>

#include "json.hpp"

namespace iomnav {

EpisodeSpec sample_episode_spec(const Scene& scene, int scene_index, Rng& rng) {
  std::vector<int> free_cells;
  for (int i = 0; i < static_cast<int>(scene.cells.size()); ++i)
    if (scene.cells[i] == Cell::Free) free_cells.push_back(i);
  if (free_cells.empty()) throw ConfigError("scene has no free cells");
  std::vector<int> classes;
  for (const SceneObject& o : scene.objects)
    if (std::find(classes.begin(), classes.end(), o.class_id) == classes.end())
      classes.push_back(o.class_id);
  if (classes.empty()) throw ConfigError("scene " + scene.scene_id + " has no objects");
  std::sort(classes.begin(), classes.end());

  EpisodeSpec spec;
  spec.scene_index = scene_index;
  const int cell = free_cells[static_cast<size_t>(rng.randint(free_cells.size()))];
  spec.start = {{cell % scene.width, cell / scene.width},
                static_cast<int>(rng.randint(8)), 0};
  spec.target_class = classes[static_cast<size_t>(rng.randint(classes.size()))];
  return spec;
}

namespace {

int yaw_of_delta(Coord d) {
  for (int y = 0; y < 8; ++y) {
    Coord e = yaw_delta(y);
    if (e.x == d.x && e.y == d.y) return y;
  }
  throw Error("not a unit step");
}

void append_rotations(std::vector<Action>& out, int& yaw, int desired) {
  int diff = ((desired - yaw) % 8 + 8) % 8;
  if (diff <= 4)  // tie at 4 turns right
    out.insert(out.end(), diff, Action::RotateRight);
  else
    out.insert(out.end(), 8 - diff, Action::RotateLeft);
  yaw = desired;
}

}  // namespace

std::optional<std::vector<Action>> oracle_actions(const Scene& scene,
                                                  const AgentPose& start,
                                                  int target_class,
                                                  const EnvConfig& env) {
  auto path = shortest_path_to_success(scene, start.q, target_class, env);
  if (!path) return std::nullopt;
  std::vector<Action> out;
  int yaw = start.yaw;
  for (size_t i = 1; i < path->cells.size(); ++i) {
    Coord d{path->cells[i].x - path->cells[i - 1].x,
            path->cells[i].y - path->cells[i - 1].y};
    append_rotations(out, yaw, yaw_of_delta(d));
    out.push_back(Action::MoveAhead);
  }
  const Coord goal = path->cells.back();
  AgentPose pose{goal, yaw, start.pitch};
  if (!success(scene, pose, target_class, detect(scene, pose, target_class, env), true,
               env)) {
    // Turn toward the nearest instance; the success mask guarantees this works.
    int oi = scene.nearest_object(goal, target_class);
    const real bearing = std::atan2(static_cast<real>(scene.objects[oi].x - goal.x),
                                    -static_cast<real>(scene.objects[oi].y - goal.y)) *
                         180.0 / std::numbers::pi_v<real>;
    const int desired = (static_cast<int>(std::lround(bearing / 45.0)) % 8 + 8) % 8;
    append_rotations(out, yaw, desired);
  }
  out.push_back(Action::Done);
  return out;
}

namespace {

struct LabeledEpisode {
  int scene_index;
  AgentPose start;
  int target_class;
  std::vector<Action> actions;
};

std::vector<LabeledEpisode> build_label_corpus(const PretrainConfig& cfg,
                                               const EnvConfig& env,
                                               const std::vector<Scene>& scenes) {
  std::vector<LabeledEpisode> corpus;
  Rng rng(cfg.seed, 77);
  for (size_t si = 0; si < scenes.size(); ++si) {
    int made = 0, attempts = 0;
    while (made < cfg.episodes_per_scene && attempts < cfg.episodes_per_scene * 20) {
      ++attempts;
      EpisodeSpec spec = sample_episode_spec(scenes[si], static_cast<int>(si), rng);
      auto actions = oracle_actions(scenes[si], spec.start, spec.target_class, env);
      if (!actions || static_cast<int>(actions->size()) > env.max_steps) continue;
      corpus.push_back({spec.scene_index, spec.start, spec.target_class,
                        std::move(*actions)});
      ++made;
    }
  }
  return corpus;
}

// Teacher-forced pass over one labeled episode. Returns (sum CE value, hits).
// When store != nullptr a gradient step on mean CE plus a value-regression
// term toward the episode's discounted returns is applied; warming the critic
// here keeps the first actor-critic advantages from wrecking the cloned
// policy.
std::pair<real, long> pretrain_episode(const PretrainConfig& cfg, const NavModel& model,
                                       const EnvConfig& env, const Scene& scene,
                                       const LabeledEpisode& ep,
                                       std::shared_ptr<const std::vector<Tensor>> values,
                                       ParameterStore* store) {
  Rollout roll(scene, model, env, RewardScheme::RM, ep.start, ep.target_class, nullptr);
  roll.begin_segment(values, false);
  Tape& t = roll.tape();
  Var loss = kNoVar;
  real ce_sum = 0;
  long hits = 0;
  std::vector<Rollout::StepRecord> recs;
  for (Action a : ep.actions) {
    Rollout::StepRecord rec = roll.step(ActMode::Greedy, nullptr, static_cast<int>(a));
    if (argmax_index(t.val(rec.logits)) == rec.action) ++hits;
    Var ce = cross_entropy(t, rec.logits, rec.action);
    ce_sum += t.val(ce).at(0, 0);
    loss = loss == kNoVar ? ce : t.add(loss, ce);
    recs.push_back(rec);
    if (roll.finished()) break;
  }
  if (store && loss != kNoVar) {
    real ret = 0.0;  // oracle episodes end with Done, so no bootstrap
    for (auto it = recs.rbegin(); it != recs.rend(); ++it) {
      ret = it->reward + cfg.gamma * ret;
      Var vdiff = t.sub(it->value, t.leaf(Tensor::scalar(ret)));
      loss = t.add(loss, t.scale(t.mul(vdiff, vdiff), cfg.value_coef));
    }
    Var mean = t.scale(loss, 1.0 / static_cast<real>(recs.size()));
    t.backward(mean);
    harvest_grads(t, roll.bound().slots, *store);
    store->apply_update(cfg.lr);
  }
  return {ce_sum, hits};
}

}  // namespace

PretrainResult pretrain(const PretrainConfig& cfg, const ModelConfig& mcfg,
                        const EnvConfig& env, const std::vector<Scene>& scenes,
                        ParameterStore& store) {
  if (scenes.empty()) throw ConfigError("pretrain needs at least one scene");
  NavModel model(mcfg, store);
  std::vector<LabeledEpisode> corpus = build_label_corpus(cfg, env, scenes);
  if (corpus.empty()) throw ConfigError("no reachable oracle episodes for pretraining");

  PretrainResult res;
  res.labeled_episodes = static_cast<long>(corpus.size());
  for (const LabeledEpisode& ep : corpus)
    res.labeled_steps += static_cast<long>(ep.actions.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    real ce_total = 0;
    for (const LabeledEpisode& ep : corpus) {
      auto values = std::make_shared<const std::vector<Tensor>>(store.values());
      auto [ce, hits] = pretrain_episode(cfg, model, env, scenes[ep.scene_index], ep,
                                         values, &store);
      (void)hits;
      ce_total += ce;
    }
    const real mean_ce = ce_total / static_cast<real>(res.labeled_steps);
    if (epoch == 0) res.first_epoch_loss = mean_ce;
    res.final_epoch_loss = mean_ce;
  }

  // Clean accuracy pass with frozen parameters.
  real ce_total = 0;
  long hits = 0;
  auto values = std::make_shared<const std::vector<Tensor>>(store.values());
  for (const LabeledEpisode& ep : corpus) {
    auto [ce, h] = pretrain_episode(cfg, model, env, scenes[ep.scene_index], ep, values,
                                    nullptr);
    ce_total += ce;
    hits += h;
  }
  if (cfg.epochs == 0) res.first_epoch_loss = res.final_epoch_loss =
      ce_total / static_cast<real>(res.labeled_steps);
  res.final_accuracy = static_cast<real>(hits) / static_cast<real>(res.labeled_steps);
  return res;
}

// ---- reinforcement learning -------------------------------------------------

namespace {

struct SharedTrain {
  std::mutex mu;  // guards store, log, tail stats, checkpointing
  ParameterStore* store = nullptr;
  std::ofstream log;
  long completed = 0;
  long updates = 0;
  long skipped = 0;
  std::deque<std::pair<real, bool>> tail;  // (reward, success)
};

void worker_loop(int wid, const TrainConfig& cfg, const NavModel& model,
                 const EnvConfig& env, const std::vector<Scene>& scenes,
                 SharedTrain& sh, std::atomic<long>& next_episode) {
  Rng episode_rng(cfg.seed, 1000 + wid);
  Rng policy_rng(cfg.seed, 2000 + wid);
  Rng detector_rng(cfg.seed, 3000 + wid);
  long local_i = 0;

  while (true) {
    const long ep = next_episode.fetch_add(1);
    if (ep >= cfg.episodes_total) break;
    const int scene_index = static_cast<int>(local_i % scenes.size());
    ++local_i;
    const Scene& scene = scenes[scene_index];
    EpisodeSpec spec = sample_episode_spec(scene, scene_index, episode_rng);

    ParamSnapshot snap;
    {
      std::lock_guard lk(sh.mu);
      snap = sh.store->snapshot();
    }

    try {
      Rollout roll(scene, model, env, cfg.scheme, spec.start, spec.target_class,
                   cfg.detector_noise ? &detector_rng : nullptr);
      roll.begin_segment(snap.values, true);
      std::vector<Rollout::StepRecord> seg;
      while (!roll.finished()) {
        seg.push_back(roll.step(ActMode::Sample, &policy_rng));
        if (static_cast<int>(seg.size()) < cfg.n_step && !roll.finished()) continue;

        Tape& t = roll.tape();
        real ret = roll.finished() ? 0.0 : roll.bootstrap_value();
        Var loss = kNoVar;
        for (auto it = seg.rbegin(); it != seg.rend(); ++it) {
          ret = it->reward + cfg.gamma * ret;
          const real adv = ret - t.val(it->value).at(0, 0);
          Var pol = t.scale(t.pick(t.log_softmax_rows(it->logits), 0, it->action), -adv);
          Var vdiff = t.sub(it->value, t.leaf(Tensor::scalar(ret)));
          Var vloss = t.scale(t.mul(vdiff, vdiff), cfg.value_coef);
          Var ent = t.scale(entropy_of_logits(t, it->logits), -cfg.entropy_coef);
          Var step_loss = t.add(t.add(pol, vloss), ent);
          loss = loss == kNoVar ? step_loss : t.add(loss, step_loss);
        }
        t.backward(loss);
        std::vector<Tensor> grads = collect_grads(t, roll.bound().slots);
        seg.clear();
        {
          std::lock_guard lk(sh.mu);
          sh.store->accumulate_all(grads);
          try {
            sh.store->apply_update(cfg.lr);
            ++sh.updates;
          } catch (const NonFiniteError&) {
            sh.store->zero_grads();
            ++sh.skipped;
          }
          snap = sh.store->snapshot();
        }
        if (!roll.finished()) roll.begin_segment(snap.values, true);
      }

      std::lock_guard lk(sh.mu);
      ++sh.completed;
      sh.tail.emplace_back(roll.total_reward(), roll.success());
      if (sh.tail.size() > 1000) sh.tail.pop_front();
      if (sh.log.is_open()) {
        nlohmann::ordered_json line{{"episode", ep},
                                    {"worker", wid},
                                    {"reward", roll.total_reward()},
                                    {"steps", roll.steps()},
                                    {"success", roll.success()},
                                    {"collisions", roll.collisions()},
                                    {"version", snap.version}};
        sh.log << line.dump() << "\n";
      }
      if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
          sh.completed % cfg.checkpoint_every == 0)
        sh.store->save(cfg.checkpoint_path);
    } catch (const NonFiniteError&) {
      std::lock_guard lk(sh.mu);
      ++sh.completed;
      ++sh.skipped;
    }
  }
}

}  // namespace

TrainStats train_rl(const TrainConfig& cfg, const ModelConfig& mcfg,
                    const EnvConfig& env, const std::vector<Scene>& scenes,
                    ParameterStore& store) {
  if (scenes.empty()) throw ConfigError("train_rl needs at least one scene");
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (cfg.gamma <= 0.0 || cfg.gamma > 1.0) throw ConfigError("gamma must be in (0,1]");
  if (cfg.n_step < 1) throw ConfigError("n_step must be >= 1");
  NavModel model(mcfg, store);

  SharedTrain sh;
  sh.store = &store;
  if (!cfg.log_path.empty()) {
    sh.log.open(cfg.log_path);
    if (!sh.log) throw IoError("cannot write training log " + cfg.log_path);
  }

  std::atomic<long> next_episode{0};
  if (cfg.workers == 1) {
    worker_loop(0, cfg, model, env, scenes, sh, next_episode);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < cfg.workers; ++w)
      threads.emplace_back(worker_loop, w, std::cref(cfg), std::cref(model),
                           std::cref(env), std::cref(scenes), std::ref(sh),
                           std::ref(next_episode));
    for (auto& th : threads) th.join();
  }
  if (!cfg.checkpoint_path.empty()) store.save(cfg.checkpoint_path);

  TrainStats stats;
  stats.episodes = sh.completed;
  stats.updates = sh.updates;
  stats.skipped_nonfinite = sh.skipped;
  if (!sh.tail.empty()) {
    real rsum = 0;
    long wins = 0;
    for (const auto& [r, s] : sh.tail) {
      rsum += r;
      wins += s ? 1 : 0;
    }
    stats.mean_reward_tail = rsum / static_cast<real>(sh.tail.size());
    stats.success_rate_tail = static_cast<real>(wins) / static_cast<real>(sh.tail.size());
  }
  return stats;
}

}  // namespace iomnav
