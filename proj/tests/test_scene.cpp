#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "iomnav/common.hpp"
#include "iomnav/scene.hpp"

using namespace iomnav;

namespace {

// Independent 8-connected flood fill used as the connectivity oracle.
bool flood_connected(const Scene& s) {
  std::vector<char> seen(s.cells.size(), 0);
  int start = -1, free_count = 0;
  for (size_t i = 0; i < s.cells.size(); ++i)
    if (s.cells[i] == Cell::Free) {
      if (start < 0) start = static_cast<int>(i);
      ++free_count;
    }
  if (start < 0) return false;
  std::vector<int> frontier{start};
  seen[start] = 1;
  int reached = 0;
  while (!frontier.empty()) {
    int cur = frontier.back();
    frontier.pop_back();
    ++reached;
    int cx = cur % s.width, cy = cur / s.width;
    const int dx8[] = {1, 1, 0, -1, -1, -1, 0, 1};
    const int dy8[] = {0, 1, 1, 1, 0, -1, -1, -1};
    for (int k = 0; k < 8; ++k) {
      int nx = cx + dx8[k], ny = cy + dy8[k];
      if (nx < 0 || ny < 0 || nx >= s.width || ny >= s.height) continue;
      int ni = ny * s.width + nx;
      if (s.cells[ni] == Cell::Free && !seen[ni]) {
        seen[ni] = 1;
        frontier.push_back(ni);
      }
    }
  }
  return reached == free_count;
}

}  // namespace

TEST_CASE("make_scene parses rows and helpers agree") {
  Scene s = make_scene("t", {"#####",
                             "#...#",
                             "#.#.#",
                             "#...#",
                             "#####"},
                       {{2, 3, 1, 1.0}});
  CHECK(s.width == 5);
  CHECK(s.height == 5);
  CHECK(s.is_free(1, 1));
  CHECK(!s.is_free(2, 2));
  CHECK(!s.is_free(0, 0));
  CHECK(!s.is_free(-1, 2));   // out of bounds counts as blocked
  CHECK(!s.is_free(5, 2));
  CHECK(s.has_class(2));
  CHECK(!s.has_class(0));
}

TEST_CASE("nearest_object picks the closest instance of the class") {
  Scene s = make_scene("t", {".....",
                             ".....",
                             "....."},
                       {{1, 0, 0, 1.0}, {1, 4, 2, 1.0}, {0, 2, 1, 1.0}});
  int i = s.nearest_object({3, 2}, 1);
  REQUIRE(i >= 0);
  CHECK(s.objects[i].x == 4);
  CHECK(s.nearest_object({0, 0}, 3) == -1);
}

TEST_CASE("scene_family strips the trailing index") {
  CHECK(scene_family("room3_17") == "room3");
  CHECK(scene_family("a_b_c") == "a_b");
  CHECK(scene_family("noindex") == "noindex");
}

TEST_CASE("json round trip preserves the scene exactly") {
  Scene s = make_scene("rt", {"####",
                              "#..#",
                              "####"},
                       {{0, 1, 1, 0.75}, {2, 2, 1, 1.3844933846400318}});
  Scene back = scene_from_json_text(scene_to_json_text(s), "roundtrip", 8);
  CHECK(back.scene_id == s.scene_id);
  CHECK(back.width == s.width);
  CHECK(back.height == s.height);
  CHECK(back.cells == s.cells);
  REQUIRE(back.objects.size() == 2);
  CHECK(back.objects[1].extent == s.objects[1].extent);  // exact double round trip
  CHECK(back.objects[0].class_id == 0);
}

TEST_CASE("malformed scene json is rejected with a reason") {
  auto parse = [](const char* text) { return scene_from_json_text(text, "t", 8); };
  CHECK_THROWS_AS(parse("not json"), MalformedSceneError);
  CHECK_THROWS_AS(parse("[1,2]"), MalformedSceneError);
  CHECK_THROWS_AS(parse(R"({"scene_id":"x","width":2,"height":1,"grid":["."]})"),
                  MalformedSceneError);  // row length mismatch
  CHECK_THROWS_AS(parse(R"({"scene_id":"x","width":1,"height":1,"grid":["?"]})"),
                  MalformedSceneError);  // bad char
  CHECK_THROWS_AS(parse(R"({"scene_id":"x","width":1,"height":1,"grid":["#"]})"),
                  MalformedSceneError);  // no free cells
  CHECK_THROWS_AS(parse(R"({"scene_id":"x","width":2,"height":1,"grid":[".."],
                            "objects":[{"class_id":0,"x":5,"y":0,"extent":1.0}]})"),
                  MalformedSceneError);  // object out of bounds
  CHECK_THROWS_AS(parse(R"({"scene_id":"x","width":2,"height":1,"grid":[".."],
                            "objects":[{"class_id":9,"x":0,"y":0,"extent":1.0}]})"),
                  MalformedSceneError);  // class beyond the configured count
  CHECK_THROWS_AS(parse(R"({"scene_id":"x","width":2,"height":1,"grid":[".."],
                            "objects":[{"class_id":0,"x":0,"y":0,"extent":0.0}]})"),
                  MalformedSceneError);  // non-positive extent
  CHECK_THROWS_AS(parse(R"({"scene_id":"x","width":2,"height":1,"grid":[".."],"extra":1})"),
                  MalformedSceneError);  // unknown key
}

TEST_CASE("scene_connected matches an independent flood fill") {
  Scene connected = make_scene("c", {"#####",
                                     "#.#.#",
                                     "#.#.#",
                                     "#...#",
                                     "#####"}, {});
  CHECK(scene_connected(connected) == flood_connected(connected));
  CHECK(scene_connected(connected));

  Scene split = make_scene("s", {"#####",
                                 "#.#.#",
                                 "#####",
                                 "#.#.#",
                                 "#####"}, {});
  CHECK(scene_connected(split) == flood_connected(split));
  CHECK(!scene_connected(split));

  // Diagonal contact counts as connected (8-neighbour metric).
  Scene diag = make_scene("d", {"#####",
                                "#.###",
                                "##.##",
                                "###.#",
                                "#####"}, {});
  CHECK(scene_connected(diag));
  CHECK(flood_connected(diag));
}

TEST_CASE("generated scenes satisfy every structural invariant") {
  const int kClasses = 8;
  std::vector<Scene> scenes = gen_scenes(123, 30, 11, 9, 0.2, kClasses, "fam");
  REQUIRE(scenes.size() == 30);
  for (int i = 0; i < 30; ++i) {
    const Scene& s = scenes[i];
    CHECK(s.scene_id == "fam_" + std::to_string(i));
    CHECK(s.width == 11);
    CHECK(s.height == 9);
    // Solid border
    for (int x = 0; x < s.width; ++x) {
      CHECK(!s.is_free(x, 0));
      CHECK(!s.is_free(x, s.height - 1));
    }
    for (int y = 0; y < s.height; ++y) {
      CHECK(!s.is_free(0, y));
      CHECK(!s.is_free(s.width - 1, y));
    }
    CHECK(flood_connected(s));
    // One object per class, all on distinct free cells
    REQUIRE(s.objects.size() == kClasses);
    std::set<int> classes, cells;
    for (const SceneObject& o : s.objects) {
      classes.insert(o.class_id);
      cells.insert(s.idx(o.x, o.y));
      CHECK(s.is_free(o.x, o.y));
      CHECK(o.extent > 0.0);
    }
    CHECK(classes.size() == kClasses);
    CHECK(cells.size() == kClasses);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  std::vector<Scene> a = gen_scenes(77, 5, 9, 9, 0.15, 4, "x");
  std::vector<Scene> b = gen_scenes(77, 5, 9, 9, 0.15, 4, "x");
  std::vector<Scene> c = gen_scenes(78, 5, 9, 9, 0.15, 4, "x");
  for (int i = 0; i < 5; ++i) {
    CHECK(scene_to_json_text(a[i]) == scene_to_json_text(b[i]));
  }
  bool any_differs = false;
  for (int i = 0; i < 5; ++i)
    if (scene_to_json_text(a[i]) != scene_to_json_text(c[i])) any_differs = true;
  CHECK(any_differs);
}

TEST_CASE("generator rejects out-of-range arguments") {
  CHECK_THROWS(gen_scenes(1, 1, 11, 11, 0.9, 4, "x"));
  CHECK_THROWS(gen_scenes(1, 1, 3, 11, 0.1, 4, "x"));
  CHECK_THROWS(gen_scenes(1, 1, 11, 11, 0.1, 0, "x"));
}

TEST_CASE("load_scene_dir reads sorted json files and rejects empty dirs") {
  const std::string dir = "/tmp/iomnav_scene_dir_" + std::to_string(getpid());
  std::filesystem::create_directories(dir);
  std::vector<Scene> gen = gen_scenes(5, 3, 7, 7, 0.1, 2, "z");
  // Write out of order; loading must sort by filename.
  save_scene(gen[2], dir + "/z_2.json");
  save_scene(gen[0], dir + "/z_0.json");
  save_scene(gen[1], dir + "/z_1.json");
  std::vector<Scene> loaded = load_scene_dir(dir, 2);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0].scene_id == "z_0");
  CHECK(loaded[2].scene_id == "z_2");
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_scene_dir(dir, 2), IoError);
}
