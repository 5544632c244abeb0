#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "iomnav/common.hpp"
#include "iomnav/iom.hpp"
#include "iomnav/tape.hpp"

using namespace iomnav;

namespace {

long dist2(Coord a, Coord b) {
  const long dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Reference model of the map: complete history of (cell, direction, outcome,
// time); queried states are derived from scratch on every check.
struct ReferenceMap {
  struct Rec {
    Coord q;
    std::array<int, 8> z{};
    long t = 0;
  };
  int capacity;
  long clock = 0;
  std::vector<Rec> recs;  // one per live cell

  void record(Coord q, int dir, bool passable, Coord agent) {
    ++clock;
    auto it = std::find_if(recs.begin(), recs.end(),
                           [&](const Rec& r) { return r.q == q; });
    if (it == recs.end()) {
      recs.push_back({q, {}, 0});
      it = std::prev(recs.end());
    }
    it->z[dir] = passable ? 1 : -1;
    it->t = clock;
    if (static_cast<int>(recs.size()) > capacity) {
      // Drop the single worst entry: farthest from the agent, stalest on ties.
      auto worst = recs.begin();
      for (auto cand = recs.begin(); cand != recs.end(); ++cand) {
        const long dw = dist2(worst->q, agent), dc = dist2(cand->q, agent);
        if (dc > dw || (dc == dw && cand->t < worst->t)) worst = cand;
      }
      recs.erase(worst);
    }
  }
};

}  // namespace

TEST_CASE("constructor validates arguments") {
  CHECK_THROWS_AS(ImplicitObstacleMap(0, {0, 0}, 1.0), ConfigError);
  CHECK_THROWS_AS(ImplicitObstacleMap(4, {0, 0}, 0.0), ConfigError);
  CHECK_NOTHROW(ImplicitObstacleMap(1, {0, 0}, 1.0));
  ImplicitObstacleMap m(4, {0, 0}, 1.0);
  CHECK_THROWS(m.record_outcome({0, 0}, 8, true, {0, 0}));
  CHECK_THROWS(m.record_outcome({0, 0}, -1, true, {0, 0}));
}

TEST_CASE("outcomes merge into one entry per cell") {
  ImplicitObstacleMap m(8, {0, 0}, 10.0);
  m.record_outcome({3, 4}, 0, true, {3, 4});
  m.record_outcome({3, 4}, 2, false, {3, 4});
  m.record_outcome({3, 4}, 0, false, {3, 4});  // overwrite: newest wins
  REQUIRE(m.entries().size() == 1);
  const ObstacleEntry& e = m.entries()[0];
  CHECK(e.q == Coord{3, 4});
  CHECK(e.z[0] == -1);
  CHECK(e.z[2] == -1);
  CHECK(e.z[1] == 0);
  CHECK(e.last_update == 3);

  m.record_outcome({5, 5}, 7, true, {5, 5});
  CHECK(m.entries().size() == 2);
}

TEST_CASE("eviction keeps the entries nearest the agent") {
  ImplicitObstacleMap m(2, {0, 0}, 10.0);
  m.record_outcome({0, 0}, 0, true, {9, 9});
  m.record_outcome({5, 5}, 0, true, {9, 9});
  m.record_outcome({9, 8}, 0, true, {9, 9});  // full: drop (0,0), the farthest
  REQUIRE(m.entries().size() == 2);
  std::set<std::pair<int, int>> kept;
  for (const auto& e : m.entries()) kept.insert({e.q.x, e.q.y});
  CHECK(kept.count({5, 5}));
  CHECK(kept.count({9, 8}));
}

TEST_CASE("equidistant eviction keeps the fresher entry") {
  ImplicitObstacleMap m(2, {0, 0}, 10.0);
  // (4,5) and (6,5) are both distance 1 from agent (5,5); (4,5) is older.
  m.record_outcome({4, 5}, 0, true, {5, 5});
  m.record_outcome({6, 5}, 0, true, {5, 5});
  m.record_outcome({5, 5}, 0, true, {5, 5});  // agent cell, distance 0
  std::set<std::pair<int, int>> kept;
  for (const auto& e : m.entries()) kept.insert({e.q.x, e.q.y});
  CHECK(kept.count({5, 5}));
  CHECK(kept.count({6, 5}));
  CHECK(!kept.count({4, 5}));
}

TEST_CASE("bounded map matches the reference across ten thousand random updates") {
  const int kCap = 6;
  ImplicitObstacleMap m(kCap, {0, 0}, 16.0);
  ReferenceMap ref{kCap};
  Rng rng(314);
  Coord agent{8, 8};
  for (int i = 0; i < 10000; ++i) {
    // Random walkish agent so distances keep changing.
    agent.x = std::clamp(agent.x + rng.randint(3) - 1, 0, 15);
    agent.y = std::clamp(agent.y + rng.randint(3) - 1, 0, 15);
    Coord cell{agent.x + rng.randint(5) - 2, agent.y + rng.randint(5) - 2};
    const int dir = rng.randint(8);
    const bool passable = rng.uniform() < 0.5;
    m.record_outcome(cell, dir, passable, agent);
    ref.record(cell, dir, passable, agent);

    REQUIRE(m.entries().size() == ref.recs.size());
    REQUIRE(m.entries().size() <= static_cast<size_t>(kCap));
    std::map<std::pair<int, int>, const ObstacleEntry*> got;
    for (const auto& e : m.entries()) {
      CHECK(!got.count({e.q.x, e.q.y}));  // one entry per cell
      got[{e.q.x, e.q.y}] = &e;
    }
    for (const auto& r : ref.recs) {
      auto it = got.find({r.q.x, r.q.y});
      REQUIRE(it != got.end());
      CHECK(it->second->z == r.z);
      CHECK(it->second->last_update == r.t);
    }
  }
}

TEST_CASE("matrix rows are most recent first with normalized coordinates") {
  const real scale = 8.0;
  ImplicitObstacleMap m(4, {2, 3}, scale);
  m.record_outcome({2, 3}, 0, false, {2, 3});
  m.record_outcome({4, 7}, 3, true, {4, 7});
  m.record_outcome({2, 3}, 1, true, {2, 3});  // refresh the first cell
  Tensor mat = m.to_matrix();
  REQUIRE(mat.rows == 4);
  REQUIRE(mat.cols == 10);
  // Row 0: cell (2,3), updated last.
  CHECK(mat.at(0, 0) == -1.0);
  CHECK(mat.at(0, 1) == 1.0);
  CHECK(mat.at(0, 8) == 0.0);
  CHECK(mat.at(0, 9) == 0.0);
  // Row 1: cell (4,7) relative to origin (2,3) over the scale.
  CHECK(mat.at(1, 3) == 1.0);
  CHECK(mat.at(1, 8) == doctest::Approx((4 - 2) / scale));
  CHECK(mat.at(1, 9) == doctest::Approx((7 - 3) / scale));
  // Unused rows stay zero.
  for (int r = 2; r < 4; ++r)
    for (int c = 0; c < 10; ++c) CHECK(mat.at(r, c) == 0.0);
}

TEST_CASE("json dump carries every entry field") {
  ImplicitObstacleMap m(4, {0, 0}, 1.0);
  m.record_outcome({1, 2}, 5, false, {1, 2});
  nlohmann::json j = m.to_json();
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 1);
  CHECK(j[0]["x"] == 1);
  CHECK(j[0]["y"] == 2);
  CHECK(j[0]["z"][5] == -1);
  CHECK(j[0]["last_update"] == 1);
}

TEST_CASE("embedding of an empty map is the relu of the biases") {
  const int e = 5;
  Tape t;
  IomParams p;
  Rng rng(9);
  Tensor ln1_w(10, 32), ln1_b(1, 32), ln2_w(e, 1), ln2_b(1, 1);
  for (auto& v : ln1_w.data) v = rng.uniform(-1, 1);
  for (auto& v : ln1_b.data) v = rng.uniform(-1, 1);
  for (auto& v : ln2_w.data) v = rng.uniform(-1, 1);
  ln2_b.data[0] = 0.37;
  p.ln1_w = t.leaf(ln1_w);
  p.ln1_b = t.leaf(ln1_b);
  p.ln2_w = t.leaf(ln2_w);
  p.ln2_b = t.leaf(ln2_b);

  Var out = iom_embed(t, t.zeros(e, 10), p);
  const Tensor& ov = t.val(out);
  REQUIRE(ov.rows == 1);
  REQUIRE(ov.cols == 32);
  // Zero matrix: y1 = relu(b1) per row (identical rows), y2_j = relu(
  // sum_r relu(b1_j) * w2_r + b2 ).
  real wsum = 0;
  for (int r = 0; r < e; ++r) wsum += ln2_w.at(r, 0);
  for (int j = 0; j < 32; ++j) {
    const real y1 = std::max<real>(0.0, ln1_b.at(0, j));
    const real expect = std::max<real>(0.0, y1 * wsum + ln2_b.at(0, 0));
    CHECK(ov.at(0, j) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("embedding gradient matches finite differences") {
  const int e = 4;
  Rng rng(10);
  Tensor mat(e, 10), ln1_w(10, 32), ln1_b(1, 32), ln2_w(e, 1), ln2_b(1, 1),
      probe(1, 32);
  for (auto* t : {&mat, &ln1_w, &ln1_b, &ln2_w, &ln2_b, &probe})
    for (auto& v : t->data) v = rng.uniform(-0.7, 0.7);

  std::vector<Tensor> inputs{mat, ln1_w, ln1_b, ln2_w, ln2_b};
  auto build = [probe](Tape& t, const std::vector<Var>& v) {
    IomParams p{v[1], v[2], v[3], v[4]};
    return t.sum(t.mul(iom_embed(t, v[0], p), t.leaf(probe)));
  };

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& in : inputs) vars.push_back(tape.leaf(in));
  Var loss = build(tape, vars);
  tape.backward(loss);

  const real eps = 1e-6;
  real max_rel = 0;
  for (size_t k = 0; k < inputs.size(); ++k)
    for (int i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](real d) {
        std::vector<Tensor> pert = inputs;
        pert[k].data[i] += d;
        Tape t2;
        std::vector<Var> vs;
        for (const Tensor& in : pert) vs.push_back(t2.leaf(in));
        return t2.val(build(t2, vs)).at(0, 0);
      };
      const real num = (eval(eps) - eval(-eps)) / (2 * eps);
      const real ana = tape.grad(vars[k]).data[i];
      max_rel = std::max(max_rel, std::abs(ana - num) /
                                      std::max({std::abs(ana), std::abs(num), real(1e-6)}));
    }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("embedding rejects wrongly shaped parameters") {
  Tape t;
  IomParams p{t.zeros(10, 32), t.zeros(1, 32), t.zeros(5, 1), t.zeros(1, 1)};
  CHECK_NOTHROW(iom_embed(t, t.zeros(5, 10), p));
  CHECK_THROWS_AS(iom_embed(t, t.zeros(4, 10), p), ShapeMismatchError);  // ln2 is 5x1
  IomParams bad{t.zeros(10, 31), t.zeros(1, 32), t.zeros(5, 1), t.zeros(1, 1)};
  CHECK_THROWS_AS(iom_embed(t, t.zeros(5, 10), bad), ShapeMismatchError);
}
