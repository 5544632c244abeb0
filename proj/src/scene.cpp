#include "iomnav/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace iomnav {

bool Scene::has_class(int class_id) const {
  for (const SceneObject& o : objects)
    if (o.class_id == class_id) return true;
  return false;
}

int Scene::nearest_object(Coord from, int class_id) const {
  int best = -1;
  real best_d2 = 0.0;
  for (size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].class_id != class_id) continue;
    const real dx = static_cast<real>(objects[i].x - from.x);
    const real dy = static_cast<real>(objects[i].y - from.y);
    const real d2 = dx * dx + dy * dy;
    if (best < 0 || d2 < best_d2) {
      best = static_cast<int>(i);
      best_d2 = d2;
    }
  }
  return best;
}

std::string scene_family(const std::string& scene_id) {
  const size_t pos = scene_id.find_last_of('_');
  return pos == std::string::npos ? scene_id : scene_id.substr(0, pos);
}

static Scene parse_scene_json(const nlohmann::json& j, const std::string& origin,
                              int max_classes) {
  auto fail = [&](const std::string& msg) -> Scene {
    throw MalformedSceneError(origin + ": " + msg);
  };
  if (!j.is_object()) return fail("top level must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "scene_id" && key != "width" && key != "height" && key != "grid" &&
        key != "objects")
      return fail("unknown key '" + key + "'");
  }
  Scene s;
  try {
    s.scene_id = j.at("scene_id").get<std::string>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    return fail(std::string("bad header: ") + e.what());
  }
  if (s.width < 1 || s.height < 1) return fail("non-positive dimensions");
  const auto& grid = j.at("grid");
  if (!grid.is_array() || static_cast<int>(grid.size()) != s.height)
    return fail("grid must have exactly height rows");
  s.cells.resize(static_cast<size_t>(s.width) * s.height);
  int free_count = 0;
  for (int y = 0; y < s.height; ++y) {
    const std::string row = grid[y].get<std::string>();
    if (static_cast<int>(row.size()) != s.width)
      return fail("grid row " + std::to_string(y) + " length mismatch");
    for (int x = 0; x < s.width; ++x) {
      if (row[x] == '.') {
        s.cells[s.idx(x, y)] = Cell::Free;
        ++free_count;
      } else if (row[x] == '#') {
        s.cells[s.idx(x, y)] = Cell::Obstacle;
      } else {
        return fail(std::string("bad grid char '") + row[x] + "'");
      }
    }
  }
  if (free_count == 0) return fail("no free cells");
  if (j.contains("objects")) {
    for (const auto& oj : j.at("objects")) {
      SceneObject o;
      try {
        o.class_id = oj.at("class_id").get<int>();
        o.x = oj.at("x").get<int>();
        o.y = oj.at("y").get<int>();
        o.extent = oj.at("extent").get<real>();
      } catch (const nlohmann::json::exception& e) {
        return fail(std::string("bad object: ") + e.what());
      }
      if (!s.in_bounds(o.x, o.y))
        return fail("object out of bounds at (" + std::to_string(o.x) + "," +
                    std::to_string(o.y) + ")");
      if (o.class_id < 0 || (max_classes >= 0 && o.class_id >= max_classes))
        return fail("unknown class id " + std::to_string(o.class_id));
      if (!(o.extent > 0.0)) return fail("object extent must be positive");
      s.objects.push_back(o);
    }
  }
  return s;
}

Scene scene_from_json_text(const std::string& text, const std::string& origin,
                           int max_classes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedSceneError(origin + ": parse error: " + e.what());
  }
  return parse_scene_json(j, origin, max_classes);
}

Scene load_scene(const std::string& path, int max_classes) {
  std::ifstream in(path);
  if (!in) throw MalformedSceneError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return scene_from_json_text(buf.str(), path, max_classes);
}

std::string scene_to_json_text(const Scene& scene) {
  nlohmann::ordered_json j;
  j["scene_id"] = scene.scene_id;
  j["width"] = scene.width;
  j["height"] = scene.height;
  std::vector<std::string> rows;
  for (int y = 0; y < scene.height; ++y) {
    std::string row(static_cast<size_t>(scene.width), '.');
    for (int x = 0; x < scene.width; ++x)
      if (scene.cells[scene.idx(x, y)] == Cell::Obstacle) row[x] = '#';
    rows.push_back(std::move(row));
  }
  j["grid"] = rows;
  j["objects"] = nlohmann::ordered_json::array();
  for (const SceneObject& o : scene.objects) {
    nlohmann::ordered_json oj;
    oj["class_id"] = o.class_id;
    oj["x"] = o.x;
    oj["y"] = o.y;
    oj["extent"] = o.extent;
    j["objects"].push_back(std::move(oj));
  }
  return j.dump(2) + "\n";
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scene: " + path);
  out << scene_to_json_text(scene);
}

Scene make_scene(const std::string& scene_id, const std::vector<std::string>& rows,
                 std::vector<SceneObject> objects) {
  Scene s;
  s.scene_id = scene_id;
  s.height = static_cast<int>(rows.size());
  s.width = rows.empty() ? 0 : static_cast<int>(rows[0].size());
  s.cells.resize(static_cast<size_t>(s.width) * s.height, Cell::Free);
  for (int y = 0; y < s.height; ++y) {
    if (static_cast<int>(rows[y].size()) != s.width)
      throw MalformedSceneError("make_scene: ragged rows");
    for (int x = 0; x < s.width; ++x)
      s.cells[s.idx(x, y)] = rows[y][x] == '#' ? Cell::Obstacle : Cell::Free;
  }
  s.objects = std::move(objects);
  return s;
}

bool scene_connected(const Scene& scene) {
  const int n = scene.width * scene.height;
  int start = -1;
  int free_count = 0;
  for (int i = 0; i < n; ++i) {
    if (scene.cells[i] == Cell::Free) {
      if (start < 0) start = i;
      ++free_count;
    }
  }
  if (start < 0) return false;
  std::vector<char> seen(n, 0);
  std::vector<int> stack{start};
  seen[start] = 1;
  int reached = 0;
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    ++reached;
    const int cx = cur % scene.width, cy = cur / scene.width;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = cx + dx, ny = cy + dy;
        if (!scene.is_free(nx, ny)) continue;
        const int ni = scene.idx(nx, ny);
        if (!seen[ni]) {
          seen[ni] = 1;
          stack.push_back(ni);
        }
      }
  }
  return reached == free_count;
}

std::vector<Scene> gen_scenes(uint64_t seed, int count, int width, int height,
                              real obstacle_density, int num_classes,
                              const std::string& id_prefix) {
  if (obstacle_density < 0.0 || obstacle_density > 0.5)
    throw Error("gen_scenes: obstacle_density must be in [0, 0.5]");
  if (width < 5 || height < 5) throw Error("gen_scenes: width and height must be >= 5");
  if (num_classes < 1) throw Error("gen_scenes: need at least one object class");

  Rng rng(seed, 0xC0F0ULL);
  std::vector<Scene> scenes;
  for (int i = 0; i < count; ++i) {
    constexpr int kMaxAttempts = 200;
    bool built = false;
    for (int attempt = 0; attempt < kMaxAttempts && !built; ++attempt) {
      Scene s;
      s.scene_id = id_prefix + "_" + std::to_string(i);
      s.width = width;
      s.height = height;
      s.cells.assign(static_cast<size_t>(width) * height, Cell::Free);
      for (int x = 0; x < width; ++x) {
        s.cells[s.idx(x, 0)] = Cell::Obstacle;
        s.cells[s.idx(x, height - 1)] = Cell::Obstacle;
      }
      for (int y = 0; y < height; ++y) {
        s.cells[s.idx(0, y)] = Cell::Obstacle;
        s.cells[s.idx(width - 1, y)] = Cell::Obstacle;
      }
      std::vector<int> free_interior;
      for (int y = 1; y < height - 1; ++y)
        for (int x = 1; x < width - 1; ++x) {
          if (rng.uniform() < obstacle_density)
            s.cells[s.idx(x, y)] = Cell::Obstacle;
          else
            free_interior.push_back(s.idx(x, y));
        }
      if (static_cast<int>(free_interior.size()) < num_classes + 2) continue;
      if (!scene_connected(s)) continue;
      // one object per class on distinct free cells
      for (int c = 0; c < num_classes; ++c) {
        const int pick = rng.randint(static_cast<int>(free_interior.size()));
        const int cell = free_interior[pick];
        free_interior.erase(free_interior.begin() + pick);
        SceneObject o;
        o.class_id = c;
        o.x = cell % width;
        o.y = cell / width;
        o.extent = rng.uniform(0.6, 1.4);
        s.objects.push_back(o);
      }
      scenes.push_back(std::move(s));
      built = true;
    }
    if (!built)
      throw GenerationFailedError("gen_scenes: could not build a connected scene (density " +
                                  std::to_string(obstacle_density) + ")");
  }
  return scenes;
}

std::vector<Scene> load_scene_dir(const std::string& dir, int max_classes) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("scene directory not found: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json")
      files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no scene files in " + dir);
  std::vector<Scene> scenes;
  scenes.reserve(files.size());
  for (const std::string& f : files) scenes.push_back(load_scene(f, max_classes));
  return scenes;
}

}  // namespace iomnav
