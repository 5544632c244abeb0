#pragma once

#include <optional>
#include <string>

#include "iomnav/common.hpp"
#include "iomnav/scene.hpp"

namespace iomnav {

enum class RewardScheme { RM, Sparse };

inline const char* reward_scheme_name(RewardScheme s) {
  return s == RewardScheme::RM ? "rm" : "sparse";
}
inline std::optional<RewardScheme> reward_scheme_from_name(const std::string& s) {
  if (s == "rm") return RewardScheme::RM;
  if (s == "sparse") return RewardScheme::Sparse;
  return std::nullopt;
}

struct RewardContext {
  bool collided_now = false;
  bool collided_prev = false;
  bool moved_forward = false;     // MoveAhead succeeded this step
  bool target_found_now = false;  // detection confidence >= C
  bool success_now = false;
  real dist_now = 0;   // geodesic distance to nearest target instance
  real dist_prev = 0;
  Coord pre_coord{};
  Coord post_coord{};
};

// Six-rule scheme: components sum. Bounded to [-0.02, 5.02] per step.
inline real compute_reward(const RewardContext& ctx, RewardScheme scheme) {
  if (scheme == RewardScheme::Sparse)
    return -0.01 + (ctx.success_now ? 5.0 : 0.0);
  real r = -0.01;                                                   // rule 1: time
  if (!ctx.target_found_now && ctx.moved_forward) r += 0.01;        // rule 2: explore
  if (ctx.target_found_now && ctx.dist_now < ctx.dist_prev) r += 0.01;  // rule 3: approach
  if (ctx.collided_now) r -= 0.01;                                  // rule 4: collision
  if (ctx.collided_prev && !(ctx.post_coord == ctx.pre_coord)) r += 0.02;  // rule 5: escape
  if (ctx.success_now) r += 5.0;                                    // rule 6: success
  return r;
}

}  // namespace iomnav
