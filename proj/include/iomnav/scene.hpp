#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iomnav/common.hpp"

namespace iomnav {

enum class Cell : uint8_t { Free = 0, Obstacle = 1 };

struct Coord {
  int x = 0;
  int y = 0;
  bool operator==(const Coord&) const = default;
};

struct SceneObject {
  int class_id = 0;
  int x = 0;
  int y = 0;
  real extent = 1.0;  // footprint size in cells, drives the projected bbox
};

// Static grid layout. Immutable after load; shared freely across workers.
struct Scene {
  std::string scene_id;
  int width = 0;
  int height = 0;
  std::vector<Cell> cells;  // row-major, index = y * width + x
  std::vector<SceneObject> objects;

  int idx(int x, int y) const { return y * width + x; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  bool is_free(int x, int y) const {
    return in_bounds(x, y) && cells[idx(x, y)] == Cell::Free;
  }
  bool has_class(int class_id) const;
  // Nearest instance of a class by Euclidean distance; ties break on object order.
  // Returns -1 when the class is absent.
  int nearest_object(Coord from, int class_id) const;
};

// Scene family tag for grouped statistics: scene_id up to the last '_'.
std::string scene_family(const std::string& scene_id);

// Throws MalformedSceneError on schema violations. When max_classes >= 0 every
// object class_id must be below it.
Scene load_scene(const std::string& path, int max_classes = -1);
Scene scene_from_json_text(const std::string& text, const std::string& origin,
                           int max_classes = -1);
void save_scene(const Scene& scene, const std::string& path);
std::string scene_to_json_text(const Scene& scene);

// Convenience for tests: rows of '.'/'#' strings.
Scene make_scene(const std::string& scene_id, const std::vector<std::string>& rows,
                 std::vector<SceneObject> objects = {});

// Generated scenes have an Obstacle border, Bernoulli(density) interior
// obstacles, one object per class on distinct free interior cells, and a fully
// 8-connected free region. Deterministic given the seed.
std::vector<Scene> gen_scenes(uint64_t seed, int count, int width, int height,
                              real obstacle_density, int num_classes,
                              const std::string& id_prefix = "scene");

// All Free cells mutually reachable with 8-way moves.
bool scene_connected(const Scene& scene);

// Loads every *.json in a directory, sorted by filename.
std::vector<Scene> load_scene_dir(const std::string& dir, int max_classes = -1);

}  // namespace iomnav
