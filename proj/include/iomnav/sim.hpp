#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "iomnav/common.hpp"
#include "iomnav/scene.hpp"

namespace iomnav {

// Yaw index 0 points north (-y) and increases clockwise in 45-degree steps.
enum class Action : int {
  MoveAhead = 0,
  RotateLeft = 1,
  RotateRight = 2,
  LookDown = 3,
  LookUp = 4,
  Done = 5,
};
inline constexpr int kNumActions = 6;

const char* action_name(Action a);
std::optional<Action> action_from_name(const std::string& name);

// dx/dy for the 8 yaw headings.
Coord yaw_delta(int yaw);

struct AgentPose {
  Coord q;
  int yaw = 0;    // 0..7
  int pitch = 0;  // -1, 0, +1
  bool operator==(const AgentPose&) const = default;
};

struct Detection {
  real x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  real confidence = 0;
  bool is_zero() const { return confidence == 0.0; }
  std::array<real, 5> as_array() const { return {x_min, y_min, x_max, y_max, confidence}; }
};

struct Observation {
  Detection detection;
  std::vector<real> local_patch;  // (2r+1)^2, egocentric, 1 = blocked
  AgentPose pose;
  bool collided = false;  // last MoveAhead failed
};

struct EnvConfig {
  real success_radius = 3.0;
  real confidence_threshold = 0.4;  // C
  real max_view_range = 10.0;
  int patch_radius = 2;
  int max_steps = 100;
  real noise_sigma = 0.05;      // detector confidence noise when enabled
  bool corner_cutting = true;   // diagonal moves ignore the two side cells
};

struct StepResult {
  AgentPose pose;
  bool collided = false;
};

// Total, deterministic transition. Only a blocked MoveAhead sets collided.
StepResult step(const Scene& scene, const AgentPose& pose, Action action,
                const EnvConfig& cfg);

// Grid ray cast between cell centers; occluded when an intermediate Obstacle
// cell is crossed. Exact corner crossings slip between diagonal obstacles,
// mirroring the corner-cutting movement rule.
bool line_of_sight(const Scene& scene, Coord a, Coord b);

// Synthetic detector for the episode's target class. Visibility requires the
// nearest instance within the +/-45 degree view cone, within max_view_range,
// with clear line of sight. Confidence decays linearly with distance; optional
// Gaussian noise is drawn from noise_rng when non-null.
Detection detect(const Scene& scene, const AgentPose& pose, int target_class,
                 const EnvConfig& cfg, Rng* noise_rng = nullptr);

std::vector<real> local_patch(const Scene& scene, const AgentPose& pose, int radius);

Observation observe(const Scene& scene, const AgentPose& pose, int target_class,
                    const EnvConfig& cfg, bool collided, Rng* noise_rng = nullptr);

bool success(const Scene& scene, const AgentPose& pose, int target_class,
             const Detection& detection, bool done_issued, const EnvConfig& cfg);

// Cells from which issuing Done (after turning toward the target) succeeds
// under a noise-free detector.
std::vector<char> success_mask(const Scene& scene, int target_class, const EnvConfig& cfg);

// Single-source shortest path field over Free cells; axis moves cost 1,
// diagonal moves sqrt(2). Unreachable cells hold infinity.
struct PathField {
  std::vector<real> dist;
  std::vector<int> parent;  // cell index or -1
};
PathField dijkstra(const Scene& scene, Coord source, bool corner_cutting);
// Multi-source variant (geodesic distance to the nearest source).
std::vector<real> dijkstra_multi(const Scene& scene, const std::vector<Coord>& sources,
                                 bool corner_cutting);

// Geodesic distance from every cell to the nearest instance of a class.
std::vector<real> distance_field_to_class(const Scene& scene, int target_class,
                                          bool corner_cutting);

struct OraclePath {
  real length = 0.0;
  std::vector<Coord> cells;  // start .. goal inclusive
};

// Cheapest path from start to any cell of the success set. nullopt = unreachable.
std::optional<OraclePath> shortest_path_to_success(const Scene& scene, Coord start,
                                                   int target_class, const EnvConfig& cfg);

// L*: optimal geometric path length; nullopt marks the episode unreachable.
std::optional<real> shortest_path_length(const Scene& scene, const AgentPose& start,
                                         int target_class, const EnvConfig& cfg);

}  // namespace iomnav
