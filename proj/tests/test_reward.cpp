#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "iomnav/reward.hpp"

using namespace iomnav;

namespace {

// Every boolean combination crossed with distance relation and coordinate
// change: 32 * 3 * 2 contexts.
std::vector<RewardContext> full_lattice() {
  std::vector<RewardContext> out;
  for (int bits = 0; bits < 32; ++bits)
    for (int rel = 0; rel < 3; ++rel)
      for (int moved_cell = 0; moved_cell < 2; ++moved_cell) {
        RewardContext c;
        c.collided_now = bits & 1;
        c.collided_prev = bits & 2;
        c.moved_forward = bits & 4;
        c.target_found_now = bits & 8;
        c.success_now = bits & 16;
        c.dist_prev = 4.0;
        c.dist_now = rel == 0 ? 3.0 : (rel == 1 ? 4.0 : 5.0);
        c.pre_coord = {2, 2};
        c.post_coord = moved_cell ? Coord{3, 2} : Coord{2, 2};
        out.push_back(c);
      }
  return out;
}

}  // namespace

TEST_CASE("scheme names round-trip") {
  CHECK(std::string(reward_scheme_name(RewardScheme::RM)) == "rm");
  CHECK(std::string(reward_scheme_name(RewardScheme::Sparse)) == "sparse");
  CHECK((reward_scheme_from_name("rm") == RewardScheme::RM));
  CHECK((reward_scheme_from_name("sparse") == RewardScheme::Sparse));
  CHECK_FALSE(reward_scheme_from_name("dense").has_value());
  CHECK_FALSE(reward_scheme_from_name("").has_value());
  CHECK_FALSE(reward_scheme_from_name("RM").has_value());
}

TEST_CASE("sparse scheme depends on success alone") {
  for (const RewardContext& c : full_lattice()) {
    const real r = compute_reward(c, RewardScheme::Sparse);
    if (c.success_now)
      CHECK(r == doctest::Approx(4.99).epsilon(1e-12));
    else
      CHECK(r == doctest::Approx(-0.01).epsilon(1e-12));
  }
}

TEST_CASE("worked examples match hand-computed sums") {
  RewardContext c;
  c.dist_prev = 4.0;
  c.dist_now = 4.0;
  c.pre_coord = {1, 1};
  c.post_coord = {1, 1};

  SUBCASE("rotation in place: time penalty only") {
    CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(-0.01).epsilon(1e-12));
  }
  SUBCASE("exploratory forward step before the target is found") {
    c.moved_forward = true;
    c.post_coord = {2, 1};
    CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("closing in after the target is found") {
    c.target_found_now = true;
    c.moved_forward = true;
    c.post_coord = {2, 1};
    c.dist_now = 3.0;
    // Forward motion no longer pays once the target is visible; only the
    // approach bonus applies: -0.01 + 0.01.
    CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("target visible but drifting away") {
    c.target_found_now = true;
    c.dist_now = 5.0;
    CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(-0.01).epsilon(1e-12));
  }
  SUBCASE("walking into a wall") {
    c.collided_now = true;
    CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(-0.02).epsilon(1e-12));
  }
  SUBCASE("recovering after a collision") {
    c.collided_prev = true;
    c.post_coord = {2, 1};
    CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("rotating in place after a collision earns nothing extra") {
    c.collided_prev = true;
    CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(-0.01).epsilon(1e-12));
  }
  SUBCASE("plain success") {
    c.success_now = true;
    CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(4.99).epsilon(1e-12));
  }
  SUBCASE("best possible step: explore bonus, escape bonus, success") {
    c.moved_forward = true;
    c.collided_prev = true;
    c.success_now = true;
    c.post_coord = {2, 1};
    CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(5.02).epsilon(1e-12));
  }
  SUBCASE("worst possible step: collision with no offsets") {
    c.collided_now = true;
    c.target_found_now = true;  // suppresses the explore bonus
    CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(-0.02).epsilon(1e-12));
  }
}

TEST_CASE("per-step reward is bounded and the bounds are attained") {
  real lo = 1e9, hi = -1e9;
  for (const RewardContext& c : full_lattice()) {
    const real r = compute_reward(c, RewardScheme::RM);
    CHECK(r >= -0.02 - 1e-12);
    CHECK(r <= 5.02 + 1e-12);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(lo == doctest::Approx(-0.02).epsilon(1e-12));
  CHECK(hi == doctest::Approx(5.02).epsilon(1e-12));
}

TEST_CASE("explore and approach bonuses are mutually exclusive") {
  for (const RewardContext& c : full_lattice()) {
    const bool explore = !c.target_found_now && c.moved_forward;
    const bool approach = c.target_found_now && c.dist_now < c.dist_prev;
    CHECK_FALSE((explore && approach));  // complementary conditions on visibility
    // The reward decomposes additively: stripping one flag changes the sum by
    // exactly that component.
    RewardContext no_success = c;
    no_success.success_now = false;
    const real delta_success =
        compute_reward(c, RewardScheme::RM) - compute_reward(no_success, RewardScheme::RM);
    CHECK(delta_success == doctest::Approx(c.success_now ? 5.0 : 0.0).epsilon(1e-12));

    RewardContext no_collide = c;
    no_collide.collided_now = false;
    const real delta_collide =
        compute_reward(c, RewardScheme::RM) - compute_reward(no_collide, RewardScheme::RM);
    CHECK(delta_collide == doctest::Approx(c.collided_now ? -0.01 : 0.0).epsilon(1e-12));
  }
}

TEST_CASE("escape bonus needs both a prior collision and a cell change") {
  RewardContext c;
  c.dist_prev = c.dist_now = 2.0;
  c.pre_coord = {4, 4};
  c.collided_prev = true;
  c.post_coord = {4, 4};
  CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(-0.01).epsilon(1e-12));
  c.post_coord = {4, 5};
  CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(0.01).epsilon(1e-12));
  c.collided_prev = false;
  CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(-0.01).epsilon(1e-12));
}

TEST_CASE("equal distance does not count as approaching") {
  RewardContext c;
  c.target_found_now = true;
  c.dist_prev = 3.0;
  c.dist_now = 3.0;
  c.pre_coord = c.post_coord = {0, 0};
  CHECK(compute_reward(c, RewardScheme::RM) == doctest::Approx(-0.01).epsilon(1e-12));
}
