#include "iomnav/episode.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "json.hpp"

namespace iomnav {

namespace {

void softmax_row(const Tensor& logits, std::vector<real>& out) {
  out.resize(logits.cols);
  real mx = logits.at(0, 0);
  for (int i = 1; i < logits.cols; ++i) mx = std::max(mx, logits.at(0, i));
  real sum = 0;
  for (int i = 0; i < logits.cols; ++i) {
    out[i] = std::exp(logits.at(0, i) - mx);
    sum += out[i];
  }
  for (real& v : out) v /= sum;
}

}  // namespace

Rollout::Rollout(const Scene& scene, const NavModel& model, const EnvConfig& env,
                 RewardScheme scheme, AgentPose start, int target_class,
                 Rng* detector_rng)
    : scene_(scene),
      model_(model),
      env_(env),
      scheme_(scheme),
      target_class_(target_class),
      origin_(start.q),
      norm_scale_(static_cast<real>(std::max(scene.width, scene.height))),
      detector_rng_(detector_rng),
      iom_(model.config().iom_capacity, origin_, norm_scale_),
      memory_(model.config().memory_capacity),
      pose_(start) {
  if (!scene_.is_free(start.q.x, start.q.y))
    throw ConfigError("episode start cell is not free in scene " + scene.scene_id);
  if (!scene_.has_class(target_class_))
    throw ConfigError("target class " + std::to_string(target_class_) +
                      " absent from scene " + scene.scene_id);
  dist_field_ = distance_field_to_class(scene_, target_class_, env_.corner_cutting);
  obs_ = observe(scene_, pose_, target_class_, env_, false, detector_rng_);
  if (obs_.detection.confidence > 0)
    memory_.push(make_orientation_feature(obs_.detection, pose_, origin_, norm_scale_));
  meta_ = {scene_.scene_id, start, target_class_, scheme_, false};
}

void Rollout::begin_segment(std::shared_ptr<const std::vector<Tensor>> values,
                            bool training) {
  values_ = std::move(values);
  tape_ = std::make_unique<Tape>();
  bound_ = model_.bind(*tape_, *values_);
  training_ = training;
  if (h_val_.size() == 0)
    state_ = model_.initial_state(*tape_);
  else
    state_ = {tape_->leaf(h_val_), tape_->leaf(c_val_)};
}

StepInputs Rollout::make_inputs() const {
  StepInputs in;
  const auto& patch = obs_.local_patch;
  in.patch = Tensor(1, static_cast<int>(patch.size()));
  for (size_t i = 0; i < patch.size(); ++i) in.patch.data[i] = patch[i];
  auto d = obs_.detection.as_array();
  in.detection = Tensor(1, 5);
  for (int i = 0; i < 5; ++i) in.detection.data[i] = d[i];
  auto l = make_pose_feature(pose_, origin_, norm_scale_);
  in.pose = Tensor(1, 4);
  for (int i = 0; i < 4; ++i) in.pose.data[i] = l[i];
  in.goal = Tensor::zeros(1, model_.config().num_classes);
  in.goal.at(0, target_class_) = 1.0;
  if (!model_.config().no_iom) in.iom_matrix = iom_.to_matrix();
  return in;
}

Rollout::StepRecord Rollout::step(ActMode mode, Rng* policy_rng, int forced_action) {
  if (finished_) throw Error("step on a finished episode");
  if (!tape_) throw Error("step without an active segment");

  PolicyStepResult ps = model_.policy_step(*tape_, bound_.p, make_inputs(), memory_,
                                           state_, training_, policy_rng);
  state_ = ps.state;
  h_val_ = tape_->val(state_.h);
  c_val_ = tape_->val(state_.c);

  const Tensor& logits = tape_->val(ps.logits);
  int a;
  if (forced_action >= 0) {
    a = forced_action;
  } else if (mode == ActMode::Greedy) {
    a = argmax_index(logits);
  } else {
    if (!policy_rng) throw ConfigError("sample mode needs an rng");
    std::vector<real> probs;
    softmax_row(logits, probs);
    const real u = policy_rng->uniform();
    real cum = 0;
    a = logits.cols - 1;
    for (int i = 0; i < logits.cols; ++i) {
      cum += probs[i];
      if (u < cum) {
        a = i;
        break;
      }
    }
  }

  const Action act = static_cast<Action>(a);
  const Coord pre = pose_.q;
  const real dist_prev = dist_field_[scene_.idx(pre.x, pre.y)];
  StepResult sr = iomnav::step(scene_, pose_, act, env_);

  if (act == Action::MoveAhead) {
    ++move_aheads_;
    iom_.record_outcome(pre, pose_.yaw, !sr.collided, sr.pose.q);
    if (!sr.collided) {
      Coord d = yaw_delta(pose_.yaw);
      if (d.x != 0 && d.y != 0)
        ++diag_moves_;
      else
        ++axis_moves_;
    } else {
      ++collisions_;
    }
  }

  const bool done_issued = act == Action::Done;
  Observation new_obs;
  if (done_issued) {
    new_obs = obs_;  // Done is judged on what the agent just saw
  } else {
    new_obs = observe(scene_, sr.pose, target_class_, env_, sr.collided, detector_rng_);
    if (new_obs.detection.confidence > 0)
      memory_.push(make_orientation_feature(new_obs.detection, sr.pose, origin_,
                                            norm_scale_));
  }

  success_ = done_issued &&
             iomnav::success(scene_, sr.pose, target_class_, obs_.detection, true, env_);

  RewardContext ctx;
  ctx.collided_now = sr.collided;
  ctx.collided_prev = prev_collided_;
  ctx.moved_forward = act == Action::MoveAhead && !sr.collided;
  ctx.target_found_now = new_obs.detection.confidence >= env_.confidence_threshold;
  ctx.dist_now = dist_field_[scene_.idx(sr.pose.q.x, sr.pose.q.y)];
  ctx.dist_prev = dist_prev;
  ctx.success_now = success_;
  ctx.pre_coord = pre;
  ctx.post_coord = sr.pose.q;
  const real r = compute_reward(ctx, scheme_);

  prev_collided_ = sr.collided;
  pose_ = sr.pose;
  obs_ = new_obs;
  total_reward_ += r;

  TraceStep rec;
  rec.t = t_;
  rec.x = pose_.q.x;
  rec.y = pose_.q.y;
  rec.yaw = pose_.yaw;
  rec.pitch = pose_.pitch;
  rec.action = act;
  rec.reward = r;
  rec.collided = sr.collided;
  rec.conf = new_obs.detection.confidence;
  if (ps.att.size() > 0) {
    rec.att_weights.resize(ps.att.cols);
    for (int j = 0; j < ps.att.cols; ++j) {
      real s = 0;
      for (int h = 0; h < ps.att.rows; ++h) s += ps.att.at(h, j);
      rec.att_weights[j] = s / ps.att.rows;
    }
  }
  trace_.push_back(std::move(rec));

  ++t_;
  if (done_issued || t_ >= env_.max_steps) {
    finished_ = true;
    meta_.success = success_;
  }
  return {ps.logits, ps.value, a, r, finished_};
}

real Rollout::bootstrap_value() {
  if (!tape_) throw Error("bootstrap without an active segment");
  PolicyStepResult ps =
      model_.policy_step(*tape_, bound_.p, make_inputs(), memory_, state_, false, nullptr);
  return tape_->val(ps.value).at(0, 0);
}

real Rollout::traveled_length() const {
  return axis_moves_ + diag_moves_ * std::numbers::sqrt2_v<real>;
}

// ---- trace I/O --------------------------------------------------------------

void write_trace(const std::string& path, const TraceMeta& meta,
                 const std::vector<TraceStep>& steps) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace file " + path);
  nlohmann::ordered_json head{{"scene_id", meta.scene_id},
                              {"start_x", meta.start.q.x},
                              {"start_y", meta.start.q.y},
                              {"start_yaw", meta.start.yaw},
                              {"start_pitch", meta.start.pitch},
                              {"target_class", meta.target_class},
                              {"scheme", reward_scheme_name(meta.scheme)},
                              {"success", meta.success}};
  out << head.dump() << "\n";
  for (const TraceStep& s : steps) {
    nlohmann::ordered_json rec{
        {"t", s.t},           {"x", s.x},
        {"y", s.y},           {"yaw", s.yaw},
        {"pitch", s.pitch},   {"action", action_name(s.action)},
        {"reward", s.reward}, {"collided", s.collided},
        {"conf", s.conf},     {"att_weights", s.att_weights}};
    out << rec.dump() << "\n";
  }
  if (!out) throw IoError("failed writing trace file " + path);
}

LoadedTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read trace file " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty trace file " + path);
  LoadedTrace t;
  try {
    nlohmann::json head = nlohmann::json::parse(line);
    t.meta.scene_id = head.at("scene_id").get<std::string>();
    t.meta.start.q = {head.at("start_x").get<int>(), head.at("start_y").get<int>()};
    t.meta.start.yaw = head.at("start_yaw").get<int>();
    t.meta.start.pitch = head.at("start_pitch").get<int>();
    t.meta.target_class = head.at("target_class").get<int>();
    auto scheme = reward_scheme_from_name(head.at("scheme").get<std::string>());
    if (!scheme) throw IoError("unknown reward scheme in trace " + path);
    t.meta.scheme = *scheme;
    t.meta.success = head.at("success").get<bool>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json rec = nlohmann::json::parse(line);
      TraceStep s;
      s.t = rec.at("t").get<int>();
      s.x = rec.at("x").get<int>();
      s.y = rec.at("y").get<int>();
      s.yaw = rec.at("yaw").get<int>();
      s.pitch = rec.at("pitch").get<int>();
      auto act = action_from_name(rec.at("action").get<std::string>());
      if (!act) throw IoError("unknown action in trace " + path);
      s.action = *act;
      s.reward = rec.at("reward").get<real>();
      s.collided = rec.at("collided").get<bool>();
      s.conf = rec.at("conf").get<real>();
      s.att_weights = rec.at("att_weights").get<std::vector<real>>();
      t.steps.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed trace " + path + ": " + e.what());
  }
  return t;
}

ReplayReport replay_trace(const Scene& scene, const LoadedTrace& trace,
                          const EnvConfig& env) {
  ReplayReport rep;
  auto fail = [&](const std::string& msg) {
    rep.ok = false;
    if (rep.error.empty()) rep.error = msg;
  };
  std::vector<real> dist_field =
      distance_field_to_class(scene, trace.meta.target_class, env.corner_cutting);
  AgentPose pose = trace.meta.start;
  bool prev_collided = false;
  bool success_recomputed = false;
  for (size_t i = 0; i < trace.steps.size(); ++i) {
    const TraceStep& s = trace.steps[i];
    ++rep.steps;
    const Coord pre = pose.q;
    const real dist_prev = dist_field[scene.idx(pre.x, pre.y)];
    StepResult sr = step(scene, pose, s.action, env);
    if (sr.pose.q.x != s.x || sr.pose.q.y != s.y || sr.pose.yaw != s.yaw ||
        sr.pose.pitch != s.pitch)
      fail("pose mismatch at t=" + std::to_string(s.t));
    if (sr.collided != s.collided)
      fail("collision flag mismatch at t=" + std::to_string(s.t));

    const bool done_issued = s.action == Action::Done;
    bool success_now = false;
    if (done_issued) {
      // The stored conf for Done is the decision-time confidence.
      int oi = scene.nearest_object(sr.pose.q, trace.meta.target_class);
      real d = oi < 0 ? std::numeric_limits<real>::infinity()
                      : std::hypot(static_cast<real>(scene.objects[oi].x - sr.pose.q.x),
                                   static_cast<real>(scene.objects[oi].y - sr.pose.q.y));
      success_now = s.conf >= env.confidence_threshold && d <= env.success_radius;
    }
    RewardContext ctx;
    ctx.collided_now = s.collided;
    ctx.collided_prev = prev_collided;
    ctx.moved_forward = s.action == Action::MoveAhead && !s.collided;
    ctx.target_found_now = s.conf >= env.confidence_threshold;
    ctx.dist_now = dist_field[scene.idx(s.x, s.y)];
    ctx.dist_prev = dist_prev;
    ctx.success_now = success_now;
    ctx.pre_coord = pre;
    ctx.post_coord = {s.x, s.y};
    const real r = compute_reward(ctx, trace.meta.scheme);
    if (r != s.reward) fail("reward mismatch at t=" + std::to_string(s.t));
    prev_collided = s.collided;
    pose = sr.pose;
    if (i + 1 == trace.steps.size()) success_recomputed = success_now;
  }
  if (success_recomputed != trace.meta.success) fail("success flag mismatch");
  return rep;
}

}  // namespace iomnav
