#include "iomnav/param_store.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace iomnav {

int ParameterStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw Error("duplicate parameter slot: " + name);
  check_finite(init, name.c_str());
  const int slot = static_cast<int>(values_.size());
  index_[name] = slot;
  names_.push_back(name);
  grads_.emplace_back(init.rows, init.cols);
  adam_m_.emplace_back(init.rows, init.cols);
  adam_v_.emplace_back(init.rows, init.cols);
  flat_offsets_.push_back(flat_size_);
  flat_size_ += static_cast<size_t>(init.size());
  values_.push_back(std::move(init));
  return slot;
}

int ParameterStore::slot(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter slot: " + name);
  return it->second;
}

void ParameterStore::accumulate(int slot, const Tensor& g) {
  Tensor& acc = grads_[slot];
  if (!acc.same_shape(g))
    throw ShapeMismatchError("gradient shape mismatch for " + names_[slot]);
  for (int i = 0; i < g.size(); ++i) acc.data[i] += g.data[i];
}

void ParameterStore::accumulate_all(const std::vector<Tensor>& grads) {
  for (size_t s = 0; s < grads.size(); ++s) accumulate(static_cast<int>(s), grads[s]);
}

void ParameterStore::zero_grads() {
  for (Tensor& g : grads_)
    std::fill(g.data.begin(), g.data.end(), 0.0);
}

void ParameterStore::apply_update(real learning_rate) {
  real sq_norm = 0.0;
  for (const Tensor& g : grads_)
    for (real v : g.data) {
      if (!std::isfinite(v)) throw NonFiniteError("non-finite gradient; update aborted");
      sq_norm += v * v;
    }
  real scale = 1.0;
  if (adam_.clip_norm > 0.0) {
    const real norm = std::sqrt(sq_norm);
    if (norm > adam_.clip_norm) scale = adam_.clip_norm / norm;
  }
  ++adam_t_;
  const real bc1 = 1.0 - std::pow(adam_.beta1, static_cast<real>(adam_t_));
  const real bc2 = 1.0 - std::pow(adam_.beta2, static_cast<real>(adam_t_));
  for (size_t s = 0; s < values_.size(); ++s) {
    Tensor& w = values_[s];
    Tensor& g = grads_[s];
    Tensor& m = adam_m_[s];
    Tensor& v = adam_v_[s];
    for (int i = 0; i < w.size(); ++i) {
      const real gi = g.data[i] * scale;
      m.data[i] = adam_.beta1 * m.data[i] + (1.0 - adam_.beta1) * gi;
      v.data[i] = adam_.beta2 * v.data[i] + (1.0 - adam_.beta2) * gi * gi;
      const real mhat = m.data[i] / bc1;
      const real vhat = v.data[i] / bc2;
      w.data[i] -= learning_rate * mhat / (std::sqrt(vhat) + adam_.eps);
    }
  }
  zero_grads();
  ++version_;
}

ParamSnapshot ParameterStore::snapshot() const {
  return {std::make_shared<const std::vector<Tensor>>(values_), version_};
}

std::pair<int, size_t> ParameterStore::locate_flat(size_t i) const {
  if (i >= flat_size_) throw Error("flat index out of range");
  int slot = static_cast<int>(flat_offsets_.size()) - 1;
  while (flat_offsets_[slot] > i) --slot;
  return {slot, i - flat_offsets_[slot]};
}

real ParameterStore::get_flat(size_t i) const {
  auto [slot, off] = locate_flat(i);
  return values_[slot].data[off];
}

void ParameterStore::set_flat(size_t i, real v) {
  auto [slot, off] = locate_flat(i);
  values_[slot].data[off] = v;
}

real ParameterStore::get_flat_grad(size_t i) const {
  auto [slot, off] = locate_flat(i);
  return grads_[slot].data[off];
}

void ParameterStore::save(const std::string& path) const {
  nlohmann::ordered_json j;
  j["format"] = "iomnav-checkpoint-v1";
  j["version"] = version_;
  j["adam_t"] = adam_t_;
  nlohmann::ordered_json slots = nlohmann::ordered_json::object();
  for (size_t s = 0; s < values_.size(); ++s) {
    nlohmann::ordered_json entry;
    entry["shape"] = {values_[s].rows, values_[s].cols};
    entry["data"] = values_[s].data;
    entry["adam_m"] = adam_m_[s].data;
    entry["adam_v"] = adam_v_[s].data;
    slots[names_[s]] = std::move(entry);
  }
  j["slots"] = std::move(slots);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

void ParameterStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != std::string("iomnav-checkpoint-v1"))
    throw IoError("unsupported checkpoint format in " + path);
  const auto& slots = j.at("slots");
  if (slots.size() != values_.size())
    throw IoError("checkpoint slot count mismatch in " + path);
  for (size_t s = 0; s < values_.size(); ++s) {
    const std::string& nm = names_[s];
    if (!slots.contains(nm)) throw IoError("checkpoint missing slot " + nm);
    const auto& entry = slots.at(nm);
    const auto shape = entry.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] != values_[s].rows || shape[1] != values_[s].cols)
      throw IoError("checkpoint shape mismatch for slot " + nm);
    entry.at("data").get_to(values_[s].data);
    entry.at("adam_m").get_to(adam_m_[s].data);
    entry.at("adam_v").get_to(adam_v_[s].data);
    if (values_[s].data.size() != static_cast<size_t>(values_[s].size()))
      throw IoError("checkpoint data length mismatch for slot " + nm);
    check_finite(values_[s], nm.c_str());
  }
  version_ = j.value("version", 0ULL);
  adam_t_ = j.value("adam_t", 0L);
}

std::vector<Var> lift_params(Tape& tape, const std::vector<Tensor>& values) {
  std::vector<Var> vars;
  vars.reserve(values.size());
  for (const Tensor& t : values) vars.push_back(tape.leaf(t));
  return vars;
}

void harvest_grads(const Tape& tape, const std::vector<Var>& param_vars, ParameterStore& store) {
  for (size_t s = 0; s < param_vars.size(); ++s)
    store.accumulate(static_cast<int>(s), tape.grad(param_vars[s]));
}

std::vector<Tensor> collect_grads(const Tape& tape, const std::vector<Var>& param_vars) {
  std::vector<Tensor> grads;
  grads.reserve(param_vars.size());
  for (Var v : param_vars) grads.push_back(tape.grad(v));
  return grads;
}

GradCheckResult grad_check(ParameterStore& store,
                           const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                           real eps, int per_slot_samples, Rng* rng) {
  // analytic pass
  Tape tape;
  std::vector<Var> pv = lift_params(tape, store.values());
  Var loss = build(tape, pv);
  tape.backward(loss);

  auto eval = [&]() {
    Tape t2;
    std::vector<Var> pv2 = lift_params(t2, store.values());
    return t2.val(build(t2, pv2)).data[0];
  };

  GradCheckResult res;
  for (int s = 0; s < store.num_slots(); ++s) {
    const Tensor& g = tape.grad(pv[s]);
    std::vector<int> idx;
    if (per_slot_samples < 0 || per_slot_samples >= g.size()) {
      idx.resize(g.size());
      for (int i = 0; i < g.size(); ++i) idx[i] = i;
    } else {
      for (int i = 0; i < per_slot_samples; ++i)
        idx.push_back(rng ? rng->randint(g.size()) : i);
    }
    for (int i : idx) {
      Tensor& w = store.mutable_value(s);
      const real saved = w.data[i];
      w.data[i] = saved + eps;
      const real fp = eval();
      w.data[i] = saved - eps;
      const real fm = eval();
      w.data[i] = saved;
      const real numeric = (fp - fm) / (2.0 * eps);
      const real analytic = g.data[i];
      const real denom = std::max({std::fabs(analytic), std::fabs(numeric), real(1e-8)});
      res.max_rel_err = std::max(res.max_rel_err, std::fabs(analytic - numeric) / denom);
      ++res.components_checked;
    }
  }
  return res;
}

}  // namespace iomnav
