#include "iomnav/model.hpp"

#include <cmath>

namespace iomnav {

std::vector<std::pair<std::string, std::array<int, 2>>> NavModel::layout(
    const ModelConfig& cfg) {
  const int e = cfg.iom_capacity;
  const int k = cfg.num_classes;
  const int s = cfg.s_dim;
  return {
      {"iom.ln1.w", {10, 32}},    {"iom.ln1.b", {1, 32}},
      {"iom.ln2.w", {e, 1}},      {"iom.ln2.b", {1, 1}},
      {"mem.enc.w1", {9, 32}},    {"mem.enc.b1", {1, 32}},
      {"mem.enc.w2", {32, 32}},   {"mem.enc.b2", {1, 32}},
      {"goal.w1", {k, 64}},       {"goal.b1", {1, 64}},
      {"goal.w2", {64, 64}},      {"goal.b2", {1, 64}},
      {"comp.w1", {68, 48}},      {"comp.b1", {1, 48}},
      {"comp.w2", {48, 32}},      {"comp.b2", {1, 32}},
      {"att.q0.w", {32, 8}},      {"att.q1.w", {32, 8}},
      {"att.q2.w", {32, 8}},      {"att.q3.w", {32, 8}},
      {"att.k0.w", {32, 8}},      {"att.k1.w", {32, 8}},
      {"att.k2.w", {32, 8}},      {"att.k3.w", {32, 8}},
      {"att.v.w", {32, 32}},      {"att.o.w", {32, 32}},
      {"fuse.w", {cfg.fuse_in(), s}}, {"fuse.b", {1, s}},
      {"lstm.wx", {s, 4 * s}},    {"lstm.wh", {s, 4 * s}},
      {"lstm.b", {1, 4 * s}},
      {"actor.w", {s, kNumActions}}, {"actor.b", {1, kNumActions}},
      {"critic.w", {s, 1}},       {"critic.b", {1, 1}},
  };
}

void NavModel::register_params(const ModelConfig& cfg, ParameterStore& store, Rng& rng) {
  for (const auto& [name, shape] : layout(cfg)) {
    Tensor v = Tensor::zeros(shape[0], shape[1]);
    const auto dot = name.rfind('.');
    const bool is_bias = name[dot + 1] == 'b';
    if (!is_bias) {
      const real lim = std::sqrt(6.0 / (shape[0] + shape[1]));
      for (real& x : v.data) x = rng.uniform(-lim, lim);
    } else if (name == "lstm.b") {
      for (int j = cfg.s_dim; j < 2 * cfg.s_dim; ++j) v.at(0, j) = 1.0;  // forget gate
    }
    store.add(name, std::move(v));
  }
}

NavModel::NavModel(const ModelConfig& cfg, const ParameterStore& store) : cfg_(cfg) {
  for (const auto& [name, shape] : layout(cfg_)) {
    const int slot = store.slot(name);
    const Tensor& v = store.value(slot);
    if (v.rows != shape[0] || v.cols != shape[1])
      throw ConfigError("parameter " + name + " has shape " + v.shape_str() +
                        ", expected " + std::to_string(shape[0]) + "x" +
                        std::to_string(shape[1]));
    slot_of_.push_back(slot);
  }
}

BoundParams NavModel::bind(Tape& t, const std::vector<Tensor>& values) const {
  if (values.size() != slot_of_.size())
    throw ConfigError("parameter snapshot has " + std::to_string(values.size()) +
                      " slots, model needs " + std::to_string(slot_of_.size()));
  BoundParams bp;
  bp.slots.resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) bp.slots[i] = t.leaf(values[i]);
  auto v = [&](int field) { return bp.slots[slot_of_[field]]; };
  ModelParams& p = bp.p;
  p.iom = {v(0), v(1), v(2), v(3)};
  p.att.encoder = {v(4), v(5), v(6), v(7)};
  p.goal_mlp = {v(8), v(9), v(10), v(11)};
  p.compressor = {v(12), v(13), v(14), v(15)};
  for (int h = 0; h < kAttHeads; ++h) {
    p.att.q_w[h] = v(16 + h);
    p.att.k_w[h] = v(20 + h);
  }
  p.att.v_w = v(24);
  p.att.o_w = v(25);
  p.fuse_w = v(26);
  p.fuse_b = v(27);
  p.lstm_wx = v(28);
  p.lstm_wh = v(29);
  p.lstm_b = v(30);
  p.actor_w = v(31);
  p.actor_b = v(32);
  p.critic_w = v(33);
  p.critic_b = v(34);
  return bp;
}

LstmState NavModel::initial_state(Tape& t) const {
  return {t.zeros(1, cfg_.s_dim), t.zeros(1, cfg_.s_dim)};
}

PolicyStepResult NavModel::policy_step(Tape& t, const ModelParams& p, const StepInputs& in,
                                       const TargetMemory& memory, const LstmState& prev,
                                       bool training, Rng* rng) const {
  require_shape(in.patch, 1, cfg_.patch_dim(), "local patch");
  require_shape(in.detection, 1, 5, "detection");
  require_shape(in.pose, 1, 4, "pose feature");
  require_shape(in.goal, 1, cfg_.num_classes, "goal one-hot");

  Var patch = t.leaf(in.patch);
  Var det = t.leaf(in.detection);

  Var m;
  if (cfg_.no_iom) {
    m = t.zeros(1, 32);
  } else {
    require_shape(in.iom_matrix, cfg_.iom_capacity, 10, "obstacle map matrix");
    m = iom_embed(t, t.leaf(in.iom_matrix), p.iom);
  }

  PolicyStepResult res;
  Var f;
  if (memory.size() == 0) {
    f = t.zeros(1, 32);
  } else if (cfg_.no_ntma) {
    f = t.mean_rows(mlp2(t, t.leaf(memory.to_tensor()), p.att.encoder));
  } else {
    Var pose = t.leaf(in.pose);
    Var p_hat = encode_goal(t, t.leaf(in.goal), pose, p.goal_mlp, p.compressor);
    AggregateResult agg = aggregate(t, p_hat, memory, p.att, training, cfg_.dropout, rng);
    f = agg.f;
    res.att = std::move(agg.att);
  }

  std::array<Var, 4> parts{patch, det, m, f};
  Var s = linear(t, t.concat_cols(parts), p.fuse_w, p.fuse_b);
  res.state = lstm_step(t, s, prev.h, prev.c, p.lstm_wx, p.lstm_wh, p.lstm_b);
  res.logits = linear(t, res.state.h, p.actor_w, p.actor_b);
  res.value = linear(t, res.state.h, p.critic_w, p.critic_b);
  return res;
}

ActResult NavModel::act(const std::vector<Tensor>& values, const StepInputs& in,
                        const TargetMemory& memory, const Tensor& h, const Tensor& c,
                        ActMode mode, Rng* rng) const {
  Tape t;
  BoundParams bp = bind(t, values);
  LstmState prev;
  if (h.size() == 0)
    prev = initial_state(t);
  else
    prev = {t.leaf(h), t.leaf(c)};
  PolicyStepResult step = policy_step(t, bp.p, in, memory, prev, false, nullptr);
  Tensor probs = t.val(t.softmax_rows(step.logits));
  Tensor log_probs = t.val(t.log_softmax_rows(step.logits));
  int a;
  if (mode == ActMode::Greedy) {
    a = argmax_index(probs);
  } else {
    if (!rng) throw ConfigError("sample mode needs an rng");
    a = sample_index(probs, *rng);
  }
  ActResult res;
  res.action = static_cast<Action>(a);
  res.log_prob = log_probs.at(0, a);
  res.value = t.val(step.value).at(0, 0);
  res.h = t.val(step.state.h);
  res.c = t.val(step.state.c);
  res.att = std::move(step.att);
  return res;
}

int sample_index(const Tensor& probs, Rng& rng) {
  const real u = rng.uniform();
  real cum = 0;
  for (int i = 0; i < probs.cols; ++i) {
    cum += probs.at(0, i);
    if (u < cum) return i;
  }
  return probs.cols - 1;
}

int argmax_index(const Tensor& row) {
  int best = 0;
  for (int i = 1; i < row.cols; ++i)
    if (row.at(0, i) > row.at(0, best)) best = i;
  return best;
}

}  // namespace iomnav
