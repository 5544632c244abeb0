#include "iomnav/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <queue>
#include <tuple>

namespace iomnav {

namespace {

constexpr real kPi = std::numbers::pi_v<real>;
constexpr real kSqrt2 = std::numbers::sqrt2_v<real>;

constexpr std::array<const char*, kNumActions> kActionNames = {
    "MoveAhead", "RotateLeft", "RotateRight", "LookDown", "LookUp", "Done"};

// yaw 0 = north (-y), clockwise.
constexpr std::array<std::array<int, 2>, 8> kYawDelta = {{
    {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1},
}};

real wrap_deg(real a) {
  a = std::fmod(a + 540.0, 360.0);
  if (a < 0) a += 360.0;
  return a - 180.0;
}

}  // namespace

const char* action_name(Action a) { return kActionNames[static_cast<int>(a)]; }

std::optional<Action> action_from_name(const std::string& name) {
  for (int i = 0; i < kNumActions; ++i)
    if (name == kActionNames[i]) return static_cast<Action>(i);
  return std::nullopt;
}

Coord yaw_delta(int yaw) {
  const auto& d = kYawDelta[yaw & 7];
  return {d[0], d[1]};
}

StepResult step(const Scene& scene, const AgentPose& pose, Action action,
                const EnvConfig& cfg) {
  StepResult r{pose, false};
  switch (action) {
    case Action::MoveAhead: {
      Coord d = yaw_delta(pose.yaw);
      Coord to{pose.q.x + d.x, pose.q.y + d.y};
      bool ok = scene.is_free(to.x, to.y);
      if (ok && !cfg.corner_cutting && d.x != 0 && d.y != 0)
        ok = scene.is_free(pose.q.x + d.x, pose.q.y) &&
             scene.is_free(pose.q.x, pose.q.y + d.y);
      if (ok)
        r.pose.q = to;
      else
        r.collided = true;
      break;
    }
    case Action::RotateLeft:
      r.pose.yaw = (pose.yaw + 7) % 8;
      break;
    case Action::RotateRight:
      r.pose.yaw = (pose.yaw + 1) % 8;
      break;
    case Action::LookDown:
      r.pose.pitch = std::max(-1, pose.pitch - 1);
      break;
    case Action::LookUp:
      r.pose.pitch = std::min(1, pose.pitch + 1);
      break;
    case Action::Done:
      break;
  }
  return r;
}

bool line_of_sight(const Scene& scene, Coord a, Coord b) {
  if (a == b) return true;
  // Walk the segment between cell centers in doubled coordinates so every
  // boundary/corner crossing is exact integer arithmetic.
  const long long ax = 2LL * a.x + 1, ay = 2LL * a.y + 1;
  const long long bx = 2LL * b.x + 1, by = 2LL * b.y + 1;
  const long long dx = bx - ax, dy = by - ay;
  const int sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const long long adx = std::llabs(dx), ady = std::llabs(dy);
  int cx = a.x, cy = a.y;
  while (cx != b.x || cy != b.y) {
    bool step_x = false, step_y = false;
    if (sx == 0) {
      step_y = true;
    } else if (sy == 0) {
      step_x = true;
    } else {
      // Entry parameters of the next vertical/horizontal cell boundary.
      const long long nx = 2LL * cx + (sx > 0 ? 2 : 0);
      const long long ny = 2LL * cy + (sy > 0 ? 2 : 0);
      const long long tx = (nx - ax) * sx * ady;
      const long long ty = (ny - ay) * sy * adx;
      step_x = tx <= ty;
      step_y = ty <= tx;  // tie = corner: slip through diagonally
    }
    if (step_x) cx += sx;
    if (step_y) cy += sy;
    if (cx == b.x && cy == b.y) break;
    if (!scene.is_free(cx, cy)) return false;
  }
  return true;
}

Detection detect(const Scene& scene, const AgentPose& pose, int target_class,
                 const EnvConfig& cfg, Rng* noise_rng) {
  Detection zero;
  int oi = scene.nearest_object(pose.q, target_class);
  if (oi < 0) return zero;
  const SceneObject& obj = scene.objects[oi];
  const real ddx = static_cast<real>(obj.x - pose.q.x);
  const real ddy = static_cast<real>(obj.y - pose.q.y);
  const real dist = std::hypot(ddx, ddy);
  real diff = 0.0;
  if (dist > 0.0) {
    const real bearing = std::atan2(ddx, -ddy) * 180.0 / kPi;  // clockwise from north
    diff = wrap_deg(bearing - 45.0 * pose.yaw);
  }
  if (std::fabs(diff) > 45.0 + 1e-9) return zero;
  if (dist > cfg.max_view_range) return zero;
  if (!line_of_sight(scene, pose.q, {obj.x, obj.y})) return zero;
  real conf = 1.0 - dist / cfg.max_view_range;
  if (noise_rng) conf += noise_rng->normal(0.0, cfg.noise_sigma);
  conf = std::clamp<real>(conf, 0.0, 1.0);
  if (conf <= 0.0) return zero;

  const real half_ext = obj.extent * 0.5;
  const real ang_half = std::atan2(half_ext, std::max(dist, half_ext)) * 180.0 / kPi;
  const real half_u = ang_half / 90.0;
  const real u_c = 0.5 + diff / 90.0;
  const real v_c = 0.5 + 0.25 * pose.pitch;
  Detection det;
  det.x_min = std::clamp<real>(u_c - half_u, 0.0, 1.0);
  det.x_max = std::clamp<real>(u_c + half_u, 0.0, 1.0);
  det.y_min = std::clamp<real>(v_c - half_u, 0.0, 1.0);
  det.y_max = std::clamp<real>(v_c + half_u, 0.0, 1.0);
  det.confidence = conf;
  return det;
}

std::vector<real> local_patch(const Scene& scene, const AgentPose& pose, int radius) {
  const Coord fwd = yaw_delta(pose.yaw);
  const Coord right = yaw_delta((pose.yaw + 2) % 8);
  const int side = 2 * radius + 1;
  std::vector<real> patch(static_cast<size_t>(side) * side);
  for (int f = radius; f >= -radius; --f) {
    for (int s = -radius; s <= radius; ++s) {
      const int x = pose.q.x + f * fwd.x + s * right.x;
      const int y = pose.q.y + f * fwd.y + s * right.y;
      const size_t idx = static_cast<size_t>(radius - f) * side + (s + radius);
      patch[idx] = scene.is_free(x, y) ? 0.0 : 1.0;
    }
  }
  return patch;
}

Observation observe(const Scene& scene, const AgentPose& pose, int target_class,
                    const EnvConfig& cfg, bool collided, Rng* noise_rng) {
  Observation o;
  o.detection = detect(scene, pose, target_class, cfg, noise_rng);
  o.local_patch = local_patch(scene, pose, cfg.patch_radius);
  o.pose = pose;
  o.collided = collided;
  return o;
}

bool success(const Scene& scene, const AgentPose& pose, int target_class,
             const Detection& detection, bool done_issued, const EnvConfig& cfg) {
  if (!done_issued) return false;
  if (detection.confidence < cfg.confidence_threshold) return false;
  int oi = scene.nearest_object(pose.q, target_class);
  if (oi < 0) return false;
  const SceneObject& obj = scene.objects[oi];
  const real dist = std::hypot(static_cast<real>(obj.x - pose.q.x),
                               static_cast<real>(obj.y - pose.q.y));
  return dist <= cfg.success_radius;
}

std::vector<char> success_mask(const Scene& scene, int target_class, const EnvConfig& cfg) {
  std::vector<char> mask(scene.cells.size(), 0);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      if (!scene.is_free(x, y)) continue;
      int oi = scene.nearest_object({x, y}, target_class);
      if (oi < 0) continue;
      const SceneObject& obj = scene.objects[oi];
      const real dist = std::hypot(static_cast<real>(obj.x - x),
                                   static_cast<real>(obj.y - y));
      if (dist > cfg.success_radius) continue;
      // Replay the noise-free success test over all headings so the mask is
      // exactly the set of cells where turning toward the target and issuing
      // Done wins.
      for (int yaw = 0; yaw < 8; ++yaw) {
        AgentPose p{{x, y}, yaw, 0};
        Detection det = detect(scene, p, target_class, cfg, nullptr);
        if (success(scene, p, target_class, det, true, cfg)) {
          mask[scene.idx(x, y)] = 1;
          break;
        }
      }
    }
  }
  return mask;
}

namespace {

// Exact path cost a + b*sqrt(2): a axis steps, b diagonal steps. Comparing in
// integers keeps Dijkstra's tie-breaking and the L >= L* bound epsilon-free.
struct PathCost {
  int axis = 0;
  int diag = 0;
  real value() const { return axis + diag * kSqrt2; }
};

bool cost_less(const PathCost& p, const PathCost& q) {
  const long long da = p.axis - q.axis;
  const long long db = p.diag - q.diag;
  if (da >= 0 && db >= 0) return false;
  if (da <= 0 && db <= 0) return true;
  if (da > 0)  // da > 0, db < 0: da + db*sqrt2 < 0  <=>  da^2 < 2*db^2
    return da * da < 2 * db * db;
  return da * da > 2 * db * db;  // da < 0, db > 0
}

struct SearchResult {
  std::vector<PathCost> cost;
  std::vector<char> settled;
  std::vector<int> parent;
};

SearchResult dijkstra_core(const Scene& scene, const std::vector<int>& sources,
                           bool corner_cutting) {
  const size_t n = scene.cells.size();
  SearchResult res{std::vector<PathCost>(n), std::vector<char>(n, 0),
                   std::vector<int>(n, -1)};
  using Entry = std::tuple<PathCost, int>;
  auto entry_greater = [](const Entry& a, const Entry& b) {
    if (cost_less(std::get<0>(b), std::get<0>(a))) return true;
    if (cost_less(std::get<0>(a), std::get<0>(b))) return false;
    return std::get<1>(a) > std::get<1>(b);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(entry_greater)> heap(
      entry_greater);
  std::vector<char> seen(n, 0);
  for (int s : sources) {
    if (!seen[s]) {
      seen[s] = 1;
      res.cost[s] = {};
      heap.push({PathCost{}, s});
    }
  }
  while (!heap.empty()) {
    auto [c, u] = heap.top();
    heap.pop();
    if (res.settled[u]) continue;
    res.settled[u] = 1;
    const int ux = u % scene.width, uy = u / scene.width;
    for (int yaw = 0; yaw < 8; ++yaw) {
      const Coord d = yaw_delta(yaw);
      const int vx = ux + d.x, vy = uy + d.y;
      if (!scene.is_free(vx, vy)) continue;
      if (!corner_cutting && d.x != 0 && d.y != 0 &&
          !(scene.is_free(ux + d.x, uy) && scene.is_free(ux, uy + d.y)))
        continue;
      const int v = scene.idx(vx, vy);
      if (res.settled[v]) continue;
      PathCost nc = c;
      if (d.x != 0 && d.y != 0)
        ++nc.diag;
      else
        ++nc.axis;
      if (!seen[v] || cost_less(nc, res.cost[v])) {
        seen[v] = 1;
        res.cost[v] = nc;
        res.parent[v] = u;
        heap.push({nc, v});
      }
    }
  }
  return res;
}

}  // namespace

PathField dijkstra(const Scene& scene, Coord source, bool corner_cutting) {
  SearchResult res = dijkstra_core(scene, {scene.idx(source.x, source.y)}, corner_cutting);
  PathField f;
  f.dist.assign(scene.cells.size(), std::numeric_limits<real>::infinity());
  f.parent = std::move(res.parent);
  for (size_t i = 0; i < scene.cells.size(); ++i)
    if (res.settled[i]) f.dist[i] = res.cost[i].value();
  return f;
}

std::vector<real> dijkstra_multi(const Scene& scene, const std::vector<Coord>& sources,
                                 bool corner_cutting) {
  std::vector<int> src;
  for (const Coord& c : sources) src.push_back(scene.idx(c.x, c.y));
  SearchResult res = dijkstra_core(scene, src, corner_cutting);
  std::vector<real> dist(scene.cells.size(), std::numeric_limits<real>::infinity());
  for (size_t i = 0; i < scene.cells.size(); ++i)
    if (res.settled[i]) dist[i] = res.cost[i].value();
  return dist;
}

std::vector<real> distance_field_to_class(const Scene& scene, int target_class,
                                          bool corner_cutting) {
  std::vector<Coord> sources;
  for (const SceneObject& o : scene.objects)
    if (o.class_id == target_class) sources.push_back({o.x, o.y});
  return dijkstra_multi(scene, sources, corner_cutting);
}

std::optional<OraclePath> shortest_path_to_success(const Scene& scene, Coord start,
                                                   int target_class, const EnvConfig& cfg) {
  std::vector<char> mask = success_mask(scene, target_class, cfg);
  SearchResult res = dijkstra_core(scene, {scene.idx(start.x, start.y)},
                                   cfg.corner_cutting);
  int best = -1;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || !res.settled[i]) continue;
    if (best < 0 || cost_less(res.cost[i], res.cost[best])) best = static_cast<int>(i);
  }
  if (best < 0) return std::nullopt;
  OraclePath path;
  path.length = res.cost[best].value();
  for (int c = best; c != -1; c = res.parent[c])
    path.cells.push_back({c % scene.width, c / scene.width});
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

std::optional<real> shortest_path_length(const Scene& scene, const AgentPose& start,
                                         int target_class, const EnvConfig& cfg) {
  auto path = shortest_path_to_success(scene, start.q, target_class, cfg);
  if (!path) return std::nullopt;
  return path->length;
}

}  // namespace iomnav
