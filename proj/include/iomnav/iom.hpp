#pragma once

#include <array>
#include <vector>

#include "iomnav/common.hpp"
#include "iomnav/scene.hpp"
#include "iomnav/tape.hpp"
#include "json.hpp"

namespace iomnav {

// Per-cell passability knowledge: one slot per heading, -1 collided,
// +1 passed, 0 untried.
struct ObstacleEntry {
  Coord q;
  std::array<int, 8> z{};
  long last_update = 0;
};

// Bounded map of movement outcomes keyed by cell. When full, keeps the
// `capacity` entries nearest to the agent. Coordinates are emitted relative to
// the episode start cell, divided by norm_scale.
class ImplicitObstacleMap {
 public:
  ImplicitObstacleMap(int capacity, Coord origin, real norm_scale);

  void record_outcome(Coord pre_move, int direction, bool passable, Coord agent);
  // capacity x 10 matrix [z | q_normalized], most recently updated entry
  // first, unused rows zero.
  Tensor to_matrix() const;

  const std::vector<ObstacleEntry>& entries() const { return entries_; }
  int capacity() const { return capacity_; }
  nlohmann::json to_json() const;

 private:
  int capacity_;
  Coord origin_;
  real norm_scale_;
  long clock_ = 0;
  std::vector<ObstacleEntry> entries_;
};

struct IomParams {
  Var ln1_w = kNoVar, ln1_b = kNoVar;  // 10 -> 32
  Var ln2_w = kNoVar, ln2_b = kNoVar;  // e -> 1, applied across the transpose
};

// y1 = ReLU(Ln1(matrix)), M = ReLU(Ln2(y1^T))^T, a 1x32 row.
Var iom_embed(Tape& t, Var matrix, const IomParams& p);

}  // namespace iomnav
