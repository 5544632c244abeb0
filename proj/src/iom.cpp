#include "iomnav/iom.hpp"

#include <algorithm>

namespace iomnav {

ImplicitObstacleMap::ImplicitObstacleMap(int capacity, Coord origin, real norm_scale)
    : capacity_(capacity), origin_(origin), norm_scale_(norm_scale) {
  if (capacity_ < 1) throw ConfigError("obstacle map capacity must be >= 1");
  if (norm_scale_ <= 0) throw ConfigError("obstacle map norm_scale must be > 0");
}

void ImplicitObstacleMap::record_outcome(Coord pre_move, int direction, bool passable,
                                         Coord agent) {
  if (direction < 0 || direction > 7) throw Error("direction out of range");
  ++clock_;
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const ObstacleEntry& e) { return e.q == pre_move; });
  if (it == entries_.end()) {
    entries_.push_back({pre_move, {}, 0});
    it = std::prev(entries_.end());
  }
  it->z[direction] = passable ? 1 : -1;
  it->last_update = clock_;

  if (static_cast<int>(entries_.size()) > capacity_) {
    auto d2 = [&](const ObstacleEntry& e) {
      const long dx = e.q.x - agent.x, dy = e.q.y - agent.y;
      return dx * dx + dy * dy;
    };
    // Keep the nearest entries; among equidistant ones prefer fresher info.
    std::sort(entries_.begin(), entries_.end(),
              [&](const ObstacleEntry& a, const ObstacleEntry& b) {
                const long da = d2(a), db = d2(b);
                if (da != db) return da < db;
                return a.last_update > b.last_update;
              });
    entries_.resize(capacity_);
  }
}

Tensor ImplicitObstacleMap::to_matrix() const {
  std::vector<const ObstacleEntry*> order;
  order.reserve(entries_.size());
  for (const ObstacleEntry& e : entries_) order.push_back(&e);
  std::sort(order.begin(), order.end(),
            [](const ObstacleEntry* a, const ObstacleEntry* b) {
              return a->last_update > b->last_update;
            });
  Tensor m = Tensor::zeros(capacity_, 10);
  for (size_t r = 0; r < order.size(); ++r) {
    for (int j = 0; j < 8; ++j) m.at(static_cast<int>(r), j) = order[r]->z[j];
    m.at(static_cast<int>(r), 8) = (order[r]->q.x - origin_.x) / norm_scale_;
    m.at(static_cast<int>(r), 9) = (order[r]->q.y - origin_.y) / norm_scale_;
  }
  return m;
}

nlohmann::json ImplicitObstacleMap::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const ObstacleEntry& e : entries_) {
    arr.push_back({{"x", e.q.x},
                   {"y", e.q.y},
                   {"z", e.z},
                   {"last_update", e.last_update}});
  }
  return arr;
}

Var iom_embed(Tape& t, Var matrix, const IomParams& p) {
  const int e = t.val(matrix).rows;
  require_shape(t.val(matrix), e, 10, "iom matrix");
  require_shape(t.val(p.ln1_w), 10, 32, "iom ln1 weight");
  require_shape(t.val(p.ln1_b), 1, 32, "iom ln1 bias");
  require_shape(t.val(p.ln2_w), e, 1, "iom ln2 weight");
  require_shape(t.val(p.ln2_b), 1, 1, "iom ln2 bias");
  Var y1 = t.relu(linear(t, matrix, p.ln1_w, p.ln1_b));          // e x 32
  Var y2 = t.relu(linear(t, t.transpose(y1), p.ln2_w, p.ln2_b));  // 32 x 1
  return t.transpose(y2);                                         // 1 x 32
}

}  // namespace iomnav
