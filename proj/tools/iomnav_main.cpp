// Command-line front end: corpus generation, pretraining, RL training,
// evaluation, the ablation grid, obstacle-map inspection, and trace replay.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iomnav/episode.hpp"
#include "iomnav/iom.hpp"
#include "iomnav/metrics.hpp"
#include "iomnav/model.hpp"
#include "iomnav/runconfig.hpp"
#include "iomnav/scene.hpp"
#include "iomnav/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace iomnav;

namespace {

struct CommonOpts {
  std::string config_path;
  RunConfig rc;
};

// Registers every RunConfig field as a flag so command-line values override
// the config file.
void add_config_overrides(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--success-radius", rc.success_radius);
  cmd->add_option("--confidence-threshold", rc.confidence_threshold);
  cmd->add_option("--max-view-range", rc.max_view_range);
  cmd->add_option("--patch-radius", rc.patch_radius);
  cmd->add_option("--max-steps", rc.max_steps);
  cmd->add_option("--noise-sigma", rc.noise_sigma);
  cmd->add_flag("--corner-cutting,!--no-corner-cutting", rc.corner_cutting);
  cmd->add_option("--num-classes", rc.num_classes);
  cmd->add_option("--iom-capacity", rc.iom_capacity);
  cmd->add_option("--memory-capacity", rc.memory_capacity);
  cmd->add_option("--s-dim", rc.s_dim);
  cmd->add_option("--dropout", rc.dropout);
  cmd->add_flag("--no-iom", rc.no_iom, "Replace the obstacle embedding with zeros");
  cmd->add_flag("--no-ntma", rc.no_ntma, "Replace attention with plain memory averaging");
  cmd->add_option("--reward-scheme", rc.reward_scheme)->check(CLI::IsMember({"rm", "sparse"}));
  cmd->add_option("--pretrain-epochs", rc.pretrain_epochs);
  cmd->add_option("--pretrain-episodes-per-scene", rc.pretrain_episodes_per_scene);
  cmd->add_option("--workers", rc.workers);
  cmd->add_option("--episodes", rc.episodes_total);
  cmd->add_option("--gamma", rc.gamma);
  cmd->add_option("--n-step", rc.n_step);
  cmd->add_option("--entropy-coef", rc.entropy_coef);
  cmd->add_option("--value-coef", rc.value_coef);
  cmd->add_option("--lr", rc.lr);
  cmd->add_flag("--train-noise,!--no-train-noise", rc.detector_noise_train);
  cmd->add_option("--checkpoint-every", rc.checkpoint_every);
  cmd->add_option("--eval-episodes-per-scene", rc.eval_episodes_per_scene);
  cmd->add_option("--eval-repeats", rc.eval_repeats);
  cmd->add_flag("--eval-noise,!--no-eval-noise", rc.detector_noise_eval);
  cmd->add_option("--train-scenes", rc.train_scenes);
  cmd->add_option("--val-scenes", rc.val_scenes);
  cmd->add_option("--test-scenes", rc.test_scenes);
  cmd->add_option("--seed", rc.seed);
}

void write_provenance(const RunConfig& rc, const std::string& out_stem) {
  save_run_config(rc, out_stem + ".resolved_config.json");
}

std::vector<Scene> load_corpus(const std::string& dir, const RunConfig& rc,
                               const char* what) {
  if (dir.empty())
    throw ConfigError(std::string("no ") + what +
                      " scene directory configured (set --train-scenes / config)");
  return load_scene_dir(dir, rc.num_classes);
}

void init_params(ParameterStore& store, const ModelConfig& mcfg, uint64_t seed,
                 const std::string& init_checkpoint) {
  Rng init_rng(seed, 42);
  NavModel::register_params(mcfg, store, init_rng);
  if (!init_checkpoint.empty()) store.load(init_checkpoint);
}

int cmd_gen_scenes(const RunConfig& rc, const std::string& out_dir, int families,
                   int width, int height, real density, int n_train, int n_val,
                   int n_test) {
  fs::create_directories(out_dir);
  const int per_family = n_train + n_val + n_test;
  nlohmann::ordered_json manifest;
  manifest["families"] = nlohmann::json::array();
  for (const std::string& split : {"train", "val", "test"})
    fs::create_directories(fs::path(out_dir) / split);
  for (int f = 0; f < families; ++f) {
    const std::string family = "room" + std::to_string(f);
    std::vector<Scene> scenes = gen_scenes(rc.seed + 1000 * f, per_family, width,
                                           height, density, rc.num_classes, family);
    auto split_of = [&](int i) {
      if (i < n_train) return "train";
      if (i < n_train + n_val) return "val";
      return "test";
    };
    for (int i = 0; i < per_family; ++i) {
      const fs::path p =
          fs::path(out_dir) / split_of(i) / (scenes[i].scene_id + ".json");
      save_scene(scenes[i], p.string());
    }
    manifest["families"].push_back({{"name", family},
                                    {"train", n_train},
                                    {"val", n_val},
                                    {"test", n_test}});
  }
  manifest["width"] = width;
  manifest["height"] = height;
  manifest["density"] = density;
  manifest["num_classes"] = rc.num_classes;
  manifest["seed"] = rc.seed;
  std::ofstream mout(fs::path(out_dir) / "manifest.json");
  mout << manifest.dump(2) << "\n";
  RunConfig resolved = rc;
  resolved.train_scenes = (fs::path(out_dir) / "train").string();
  resolved.val_scenes = (fs::path(out_dir) / "val").string();
  resolved.test_scenes = (fs::path(out_dir) / "test").string();
  write_provenance(resolved, (fs::path(out_dir) / "corpus").string());
  std::cout << "wrote " << families * per_family << " scenes to " << out_dir << "\n";
  return 0;
}

int cmd_pretrain(const RunConfig& rc, const std::string& out, const std::string& init) {
  std::vector<Scene> scenes = load_corpus(rc.train_scenes, rc, "train");
  ParameterStore store;
  const ModelConfig mcfg = model_config(rc);
  init_params(store, mcfg, rc.seed, init);
  PretrainResult res = pretrain(pretrain_config(rc), mcfg, env_config(rc), scenes, store);
  store.save(out);
  write_provenance(rc, out);
  nlohmann::ordered_json j{{"labeled_episodes", res.labeled_episodes},
                           {"labeled_steps", res.labeled_steps},
                           {"first_epoch_loss", res.first_epoch_loss},
                           {"final_epoch_loss", res.final_epoch_loss},
                           {"final_accuracy", res.final_accuracy},
                           {"checkpoint", out}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_train(const RunConfig& rc, const std::string& out, const std::string& init,
              const std::string& log_path) {
  std::vector<Scene> scenes = load_corpus(rc.train_scenes, rc, "train");
  ParameterStore store;
  const ModelConfig mcfg = model_config(rc);
  init_params(store, mcfg, rc.seed, init);
  TrainConfig tcfg = train_config(rc);
  tcfg.checkpoint_path = out;
  tcfg.log_path = log_path.empty() ? out + ".log.jsonl" : log_path;
  TrainStats stats = train_rl(tcfg, mcfg, env_config(rc), scenes, store);
  write_provenance(rc, out);
  nlohmann::ordered_json j{{"episodes", stats.episodes},
                           {"updates", stats.updates},
                           {"skipped_nonfinite", stats.skipped_nonfinite},
                           {"mean_reward_tail", stats.mean_reward_tail},
                           {"success_rate_tail", stats.success_rate_tail},
                           {"checkpoint", out},
                           {"log", tcfg.log_path}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_eval(const RunConfig& rc, const std::string& checkpoint,
             const std::string& report_path, const std::string& csv_path,
             const std::string& traces_dir, const std::string& scenes_dir) {
  const std::string dir = scenes_dir.empty() ? rc.test_scenes : scenes_dir;
  std::vector<Scene> scenes = load_corpus(dir, rc, "test");
  ParameterStore store;
  const ModelConfig mcfg = model_config(rc);
  init_params(store, mcfg, rc.seed, checkpoint);
  EvalConfig ecfg = eval_config(rc);
  ecfg.traces_dir = traces_dir;
  MetricsReport report = evaluate(ecfg, mcfg, env_config(rc), scenes, store);
  std::cout << metrics_to_json(report).dump(2) << "\n";
  if (!report_path.empty()) {
    write_metrics_json(report, report_path);
    write_provenance(rc, report_path);
  }
  if (!csv_path.empty()) write_collisions_csv(report, csv_path);
  return 0;
}

int cmd_ablate(const RunConfig& rc, const std::string& out_dir,
               const std::string& init) {
  std::vector<Scene> train_scenes = load_corpus(rc.train_scenes, rc, "train");
  const std::string test_dir = rc.test_scenes.empty() ? rc.train_scenes : rc.test_scenes;
  std::vector<Scene> test_scenes = load_corpus(test_dir, rc, "test");
  fs::create_directories(out_dir);

  nlohmann::ordered_json rows = nlohmann::json::array();
  std::ofstream csv(fs::path(out_dir) / "ablation.csv");
  csv << "iom,ntma,reward,sr_all,spl_all,sae_all,sr_ge5,spl_ge5,sae_ge5\n";
  for (int use_iom = 1; use_iom >= 0; --use_iom) {
    for (int use_ntma = 1; use_ntma >= 0; --use_ntma) {
      for (const std::string scheme : {"rm", "sparse"}) {
        RunConfig arm = rc;
        arm.no_iom = use_iom == 0;
        arm.no_ntma = use_ntma == 0;
        arm.reward_scheme = scheme;
        const std::string tag = std::string(use_iom ? "iom" : "noiom") + "_" +
                                (use_ntma ? "ntma" : "nontma") + "_" + scheme;
        const std::string ckpt = (fs::path(out_dir) / (tag + ".ckpt.json")).string();

        ParameterStore store;
        const ModelConfig mcfg = model_config(arm);
        init_params(store, mcfg, arm.seed, init);
        if (arm.pretrain_epochs > 0)
          pretrain(pretrain_config(arm), mcfg, env_config(arm), train_scenes, store);
        TrainConfig tcfg = train_config(arm);
        tcfg.checkpoint_path = ckpt;
        tcfg.log_path = ckpt + ".log.jsonl";
        train_rl(tcfg, mcfg, env_config(arm), train_scenes, store);
        MetricsReport rep =
            evaluate(eval_config(arm), mcfg, env_config(arm), test_scenes, store);

        nlohmann::ordered_json row{{"iom", use_iom == 1},
                                   {"ntma", use_ntma == 1},
                                   {"reward", scheme},
                                   {"sr_all", rep.sr_all},
                                   {"spl_all", rep.spl_all},
                                   {"sae_all", rep.sae_all},
                                   {"sr_ge5", rep.sr_ge5},
                                   {"spl_ge5", rep.spl_ge5},
                                   {"sae_ge5", rep.sae_ge5}};
        rows.push_back(row);
        csv << use_iom << "," << use_ntma << "," << scheme << "," << rep.sr_all << ","
            << rep.spl_all << "," << rep.sae_all << "," << rep.sr_ge5 << ","
            << rep.spl_ge5 << "," << rep.sae_ge5 << "\n";
        csv.flush();
        std::cout << row.dump() << "\n";
      }
    }
  }
  std::ofstream jout(fs::path(out_dir) / "ablation.json");
  jout << rows.dump(2) << "\n";
  write_provenance(rc, (fs::path(out_dir) / "ablation").string());
  return 0;
}

int cmd_inspect_iom(const RunConfig& rc, const std::string& checkpoint,
                    const std::string& scene_file, const std::string& out_path) {
  Scene scene = load_scene(scene_file, rc.num_classes);
  ParameterStore store;
  const ModelConfig mcfg = model_config(rc);
  init_params(store, mcfg, rc.seed, checkpoint);
  NavModel model(mcfg, store);
  auto values = std::make_shared<const std::vector<Tensor>>(store.values());

  Rng spec_rng(rc.seed, 501);
  EpisodeSpec spec = sample_episode_spec(scene, 0, spec_rng);
  Rollout roll(scene, model, env_config(rc), *reward_scheme_from_name(rc.reward_scheme),
               spec.start, spec.target_class, nullptr);
  roll.begin_segment(values, false);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw IoError("cannot write " + out_path);
    out = &file;
  }
  while (!roll.finished()) {
    roll.step(ActMode::Greedy, nullptr);
    nlohmann::ordered_json line{{"t", roll.steps() - 1},
                                {"x", roll.pose().q.x},
                                {"y", roll.pose().q.y},
                                {"entries", roll.iom().to_json()}};
    *out << line.dump() << "\n";
  }
  return 0;
}

int cmd_replay(const RunConfig& rc, const std::string& trace_path,
               const std::string& scene_path, const std::string& scenes_dir) {
  LoadedTrace trace = read_trace(trace_path);
  Scene scene;
  if (!scene_path.empty()) {
    scene = load_scene(scene_path, rc.num_classes);
  } else {
    const std::string dir = scenes_dir.empty() ? rc.test_scenes : scenes_dir;
    if (dir.empty())
      throw ConfigError("replay needs --scene or a scene directory");
    bool found = false;
    for (Scene& s : load_scene_dir(dir, rc.num_classes)) {
      if (s.scene_id == trace.meta.scene_id) {
        scene = std::move(s);
        found = true;
        break;
      }
    }
    if (!found)
      throw ConfigError("scene " + trace.meta.scene_id + " not found in " + dir);
  }
  ReplayReport rep = replay_trace(scene, trace, env_config(rc));
  nlohmann::ordered_json j{{"trace", trace_path},
                           {"steps", rep.steps},
                           {"ok", rep.ok},
                           {"error", rep.error}};
  std::cout << j.dump(2) << "\n";
  return rep.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indoor target-driven navigation with an implicit obstacle map"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON run config; flags override file values")
      ->expected(1);

  // Pre-scan for --config so subcommand flag defaults come from the file.
  RunConfig rc;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      rc = load_run_config(argv[i + 1]);
      break;
    }
  }

  auto* gen = app.add_subcommand("gen-scenes", "Generate a scene corpus with splits");
  std::string gen_out = "corpus";
  int gen_families = 2, gen_width = 11, gen_height = 11;
  int gen_train = 20, gen_val = 5, gen_test = 5;
  real gen_density = 0.15;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--families", gen_families, "Number of scene families");
  gen->add_option("--width", gen_width);
  gen->add_option("--height", gen_height);
  gen->add_option("--density", gen_density, "Interior obstacle density");
  gen->add_option("--train", gen_train, "Training scenes per family");
  gen->add_option("--val", gen_val, "Validation scenes per family");
  gen->add_option("--test", gen_test, "Test scenes per family");
  add_config_overrides(gen, rc);

  auto* pre = app.add_subcommand("pretrain", "Behavior-clone the shortest-path oracle");
  std::string pre_out = "pretrained.ckpt.json", pre_init;
  pre->add_option("--out", pre_out, "Checkpoint to write");
  pre->add_option("--init", pre_init, "Optional checkpoint to start from");
  add_config_overrides(pre, rc);

  auto* trn = app.add_subcommand("train", "Reinforcement-learn the navigation policy");
  std::string trn_out = "trained.ckpt.json", trn_init, trn_log;
  trn->add_option("--out", trn_out, "Checkpoint to write");
  trn->add_option("--init", trn_init, "Checkpoint to start from (e.g. pretrained)");
  trn->add_option("--log", trn_log, "Training log path (default <out>.log.jsonl)");
  add_config_overrides(trn, rc);

  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint with greedy episodes");
  std::string evl_ckpt, evl_report, evl_csv, evl_traces, evl_scenes;
  evl->add_option("--checkpoint", evl_ckpt, "Checkpoint to evaluate")->required();
  evl->add_option("--report", evl_report, "Metrics JSON output path");
  evl->add_option("--csv", evl_csv, "Collision stats CSV output path");
  evl->add_option("--traces", evl_traces, "Directory for episode traces");
  evl->add_option("--scenes", evl_scenes, "Scene dir (default: test_scenes)");
  add_config_overrides(evl, rc);

  auto* abl = app.add_subcommand("ablate", "Run the 8-arm IOM/NTMA/reward grid");
  std::string abl_out = "ablation", abl_init;
  abl->add_option("--out", abl_out, "Output directory");
  abl->add_option("--init", abl_init, "Optional shared init checkpoint");
  add_config_overrides(abl, rc);

  auto* ins = app.add_subcommand("inspect-iom", "Dump obstacle-map evolution for an episode");
  std::string ins_ckpt, ins_scene, ins_out;
  ins->add_option("--checkpoint", ins_ckpt, "Checkpoint to roll out")->required();
  ins->add_option("--scene", ins_scene, "Scene file")->required();
  ins->add_option("--out", ins_out, "Output JSONL (default stdout)");
  add_config_overrides(ins, rc);

  auto* rpl = app.add_subcommand("replay", "Re-execute a trace and verify it");
  std::string rpl_trace, rpl_scene, rpl_scenes;
  rpl->add_option("--trace", rpl_trace, "Trace file")->required();
  rpl->add_option("--scene", rpl_scene, "Scene file");
  rpl->add_option("--scenes", rpl_scenes, "Scene dir to search by scene_id");
  add_config_overrides(rpl, rc);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_scenes(rc, gen_out, gen_families, gen_width, gen_height,
                            gen_density, gen_train, gen_val, gen_test);
    if (pre->parsed()) return cmd_pretrain(rc, pre_out, pre_init);
    if (trn->parsed()) return cmd_train(rc, trn_out, trn_init, trn_log);
    if (evl->parsed())
      return cmd_eval(rc, evl_ckpt, evl_report, evl_csv, evl_traces, evl_scenes);
    if (abl->parsed()) return cmd_ablate(rc, abl_out, abl_init);
    if (ins->parsed()) return cmd_inspect_iom(rc, ins_ckpt, ins_scene, ins_out);
    if (rpl->parsed()) return cmd_replay(rc, rpl_trace, rpl_scene, rpl_scenes);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
