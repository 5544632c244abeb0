#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "iomnav/common.hpp"
#include "iomnav/tape.hpp"
#include "iomnav/tensor.hpp"

namespace iomnav {

struct AdamConfig {
  real beta1 = 0.9;
  real beta2 = 0.999;
  real eps = 1e-8;
  real clip_norm = 10.0;  // global norm; <= 0 disables clipping
};

// Read-only copy of all parameter values, handed to rollout workers.
struct ParamSnapshot {
  std::shared_ptr<const std::vector<Tensor>> values;
  uint64_t version = 0;
};

// Named parameter slots with matching gradient accumulators and Adam state.
// Not thread safe; the trainer serializes access.
class ParameterStore {
 public:
  explicit ParameterStore(AdamConfig adam = {}) : adam_(adam) {}

  int add(const std::string& name, Tensor init);
  int slot(const std::string& name) const;
  int num_slots() const { return static_cast<int>(values_.size()); }
  const std::string& name(int slot) const { return names_[slot]; }

  const Tensor& value(int slot) const { return values_[slot]; }
  Tensor& mutable_value(int slot) { return values_[slot]; }
  const std::vector<Tensor>& values() const { return values_; }

  void accumulate(int slot, const Tensor& g);
  void accumulate_all(const std::vector<Tensor>& grads);
  const Tensor& grad(int slot) const { return grads_[slot]; }
  void zero_grads();

  // Adam step on the accumulated gradients; clips by global norm, bumps the
  // version, zeroes the accumulators. Throws NonFiniteError (and applies
  // nothing) if any gradient is non-finite.
  void apply_update(real learning_rate);

  uint64_t version() const { return version_; }
  const AdamConfig& adam_config() const { return adam_; }

  ParamSnapshot snapshot() const;

  // Flat view over all parameters in registration order.
  size_t flat_size() const { return flat_size_; }
  real get_flat(size_t i) const;
  void set_flat(size_t i, real v);
  real get_flat_grad(size_t i) const;

  void save(const std::string& path) const;
  // Validates that slot names and shapes match the already-registered layout.
  void load(const std::string& path);

 private:
  AdamConfig adam_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::vector<Tensor> adam_m_;
  std::vector<Tensor> adam_v_;
  std::vector<size_t> flat_offsets_;
  size_t flat_size_ = 0;
  long adam_t_ = 0;
  uint64_t version_ = 0;

  std::pair<int, size_t> locate_flat(size_t i) const;
};

// Lifts every slot onto a tape as leaves; param_vars[slot] is the leaf Var.
std::vector<Var> lift_params(Tape& tape, const std::vector<Tensor>& values);

// Harvest leaf gradients back into the store's accumulators.
void harvest_grads(const Tape& tape, const std::vector<Var>& param_vars, ParameterStore& store);

// Copy leaf gradients out as a per-slot bundle (for worker threads that apply
// under a lock later).
std::vector<Tensor> collect_grads(const Tape& tape, const std::vector<Var>& param_vars);

// Central-difference check of the analytic gradient of a scalar function of the
// parameters. `build` must be deterministic (no dropout). With
// per_slot_samples < 0 every component is checked, otherwise that many random
// components per slot. Returns max of |a-n| / max(|a|,|n|,1e-8).
struct GradCheckResult {
  real max_rel_err = 0.0;
  size_t components_checked = 0;
};

GradCheckResult grad_check(ParameterStore& store,
                           const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                           real eps = 1e-5, int per_slot_samples = -1, Rng* rng = nullptr);

}  // namespace iomnav
