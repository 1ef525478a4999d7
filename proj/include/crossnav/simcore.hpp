/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "crossnav/core.hpp"
#include "crossnav/embodiment.hpp"
#include "crossnav/rng.hpp"
#include "crossnav/worldgen.hpp"

namespace crossnav {

struct RayScan {
  std::vector<double> distances;
  double fov = kPi / 2.0;
  double min_range = 0.2;
  double max_range = 8.0;
};

namespace detail {

/// Nearest positive ray parameter against one obstacle footprint, or +inf.
inline double ray_hit(const Vec2& origin, const Vec2& dir, const Obstacle& ob) {
  constexpr double kInf = 1e30;
  if (ob.kind == ObstacleKind::cylinder) {
    const Vec2 oc = origin - ob.center;
    const double b = oc.dot(dir);
    const double c = oc.squared_norm() - ob.half_x * ob.half_x;
    const double disc = b * b - c;
    if (disc < 0.0) return kInf;
    const double sq = std::sqrt(disc);
    const double t0 = -b - sq;
    const double t1 = -b + sq;
    if (t0 >= 0.0) return t0;
    if (t1 >= 0.0) return 0.0;  // origin inside
    return kInf;
  }
  // slab test in the box frame
  const Vec2 o = rotate(origin - ob.center, -ob.yaw);
  const Vec2 d = rotate(dir, -ob.yaw);
  double tmin = -kInf, tmax = kInf;
  const double half[2] = {ob.half_x, ob.half_y};
  const double op[2] = {o.x, o.y};
  const double dp[2] = {d.x, d.y};
  for (int axis = 0; axis < 2; ++axis) {
    if (std::abs(dp[axis]) < 1e-12) {
      if (std::abs(op[axis]) > half[axis]) return kInf;
      continue;
    }
    double t0 = (-half[axis] - op[axis]) / dp[axis];
    double t1 = (half[axis] - op[axis]) / dp[axis];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return kInf;
  }
  if (tmax < 0.0) return kInf;
  return tmin >= 0.0 ? tmin : 0.0;  // tmin < 0 <= tmax: origin inside
}

}  // namespace detail

/// Planar range scan: n_rays evenly spaced across fov, centered on heading.
/// Ray i=0 points at heading - fov/2; distances are clamped to
/// [min_range, max_range] and misses read max_range.
inline RayScan raycast(const Vec2& position, double heading,
                       const WorldInstance& world, double fov, int n_rays,
                       double min_range, double max_range) {
  if (n_rays < 2) throw std::invalid_argument("raycast needs at least 2 rays");
  if (min_range >= max_range)
    throw std::invalid_argument("raycast range bounds inverted");
  RayScan scan;
  scan.fov = fov;
  scan.min_range = min_range;
  scan.max_range = max_range;
  scan.distances.resize(static_cast<size_t>(n_rays));
  for (int i = 0; i < n_rays; ++i) {
    const double angle =
        heading + fov * (static_cast<double>(i) / (n_rays - 1) - 0.5);
    const Vec2 dir{std::cos(angle), std::sin(angle)};
    double t = max_range;
    for (const auto& ob : world.obstacles)
      t = std::min(t, detail::ray_hit(position, dir, ob));
    scan.distances[static_cast<size_t>(i)] = clamp(t, min_range, max_range);
  }
  return scan;
}

namespace detail {

/// Oriented-rectangle corners.
inline std::array<Vec2, 4> rect_corners(const Vec2& pos, double yaw, double hx,
                                        double hy) {
  const std::array<Vec2, 4> local{Vec2{hx, hy}, Vec2{hx, -hy}, Vec2{-hx, -hy},
                                  Vec2{-hx, hy}};
  std::array<Vec2, 4> out;
  for (size_t i = 0; i < 4; ++i) out[i] = pos + rotate(local[i], yaw);
  return out;
}

inline bool rect_circle_overlap(const Vec2& pos, double yaw, double hx,
                                double hy, const Vec2& center, double radius) {
  const Vec2 local = rotate(center - pos, -yaw);
  const double dx = std::max(std::abs(local.x) - hx, 0.0);
  const double dy = std::max(std::abs(local.y) - hy, 0.0);
  return dx * dx + dy * dy <= radius * radius;
}

/// Separating-axis test between two oriented rectangles; touching counts as
/// overlap.
inline bool rect_rect_overlap(const Vec2& p1, double yaw1, double hx1,
                              double hy1, const Vec2& p2, double yaw2,
                              double hx2, double hy2) {
  const double angles[4] = {yaw1, yaw1 + kPi / 2, yaw2, yaw2 + kPi / 2};
  const std::array<Vec2, 4> c1 = rect_corners(p1, yaw1, hx1, hy1);
  const std::array<Vec2, 4> c2 = rect_corners(p2, yaw2, hx2, hy2);
  for (double a : angles) {
    const Vec2 axis{std::cos(a), std::sin(a)};
    double min1 = 1e30, max1 = -1e30, min2 = 1e30, max2 = -1e30;
    for (const auto& c : c1) {
      const double v = c.dot(axis);
      min1 = std::min(min1, v);
      max1 = std::max(max1, v);
    }
    for (const auto& c : c2) {
      const double v = c.dot(axis);
      min2 = std::min(min2, v);
      max2 = std::max(max2, v);
    }
    if (max1 < min2 || max2 < min1) return false;
  }
  return true;
}

}  // namespace detail

/// True iff the robot's oriented base rectangle intersects any obstacle
/// footprint. Tangency counts as collision.
inline bool check_collision(const Vec2& position, double yaw,
                            const EmbodimentSpec& spec,
                            const WorldInstance& world) {
  const double hx = 0.5 * spec.base_length;
  const double hy = 0.5 * spec.base_width;
  for (const auto& ob : world.obstacles) {
    if (ob.kind == ObstacleKind::cylinder) {
      if (detail::rect_circle_overlap(position, yaw, hx, hy, ob.center,
                                      ob.half_x))
        return true;
    } else {
      if (detail::rect_rect_overlap(position, yaw, hx, hy, ob.center, ob.yaw,
                                    ob.half_x, ob.half_y))
        return true;
    }
  }
  return false;
}

/// Adds a uniformly sampled horizontal velocity to the base (articulated
/// robots only; wheeled states are returned unchanged).
inline void apply_push(RobotState& state, Family family, Rng& rng,
                       const DomainRandConfig& dr) {
  if (!is_articulated(family)) return;
  state.push_vx += rng.uniform(dr.push_velocity[0], dr.push_velocity[1]);
  state.push_vy += rng.uniform(dr.push_velocity[0], dr.push_velocity[1]);
}

/// Ground-truth local height scan: a robot-centered, yaw-aligned
/// x_scan x y_scan window sampled on a regular grid. Cells outside the world
/// read 0. Obstacle surfaces are part of the scanned geometry.
inline std::vector<double> height_scan(const Vec2& position, double yaw,
                                       const WorldInstance& world,
                                       double x_scan, double y_scan,
                                       double resolution) {
  if (resolution <= 0.0)
    throw std::invalid_argument("height scan resolution must be positive");
  const int nx = static_cast<int>(std::round(x_scan / resolution)) + 1;
  const int ny = static_cast<int>(std::round(y_scan / resolution)) + 1;
  std::vector<double> heights;
  heights.reserve(static_cast<size_t>(nx) * static_cast<size_t>(ny));
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Vec2 local{-0.5 * x_scan + ix * resolution,
                       -0.5 * y_scan + iy * resolution};
      const Vec2 p = position + rotate(local, yaw);
      heights.push_back(world.inside(p) ? world.surface_height(p) : 0.0);
    }
  }
  return heights;
}

enum class EpisodeStatus { running, reached, collided, timeout };

inline std::string to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::running: return "running";
    case EpisodeStatus::reached: return "reached";
    case EpisodeStatus::collided: return "collided";
    case EpisodeStatus::timeout: return "timeout";
  }
  throw std::invalid_argument("unknown episode status");
}

/// One episode: world + robot + clocks + its own random stream.
struct Episode {
  WorldInstance world;
  EmbodimentSpec spec;
  RobotState state;
  EpisodeRandomization rand;
  int t = 0;
  int max_steps = 400;
  int lambda_steps = 0;  // horizon for the time-remaining signal; 0: max_steps
  double dt = 0.02;
  Rng rng;
  EpisodeStatus status = EpisodeStatus::running;
  double next_push_time = 0.0;
  StepDiagnostics last_diag;
  std::array<double, kUnifiedActionDim> prev_action{};
  double path_length = 0.0;

  double goal_distance() const { return (world.goal - state.position).norm(); }

  /// Heading error toward the goal, in [0, pi].
  double heading_error() const {
    const Vec2 to_goal = world.goal - state.position;
    if (to_goal.norm() < 1e-9) return 0.0;
    const double bearing = std::atan2(to_goal.y, to_goal.x);
    return std::abs(wrap_angle(bearing - state.yaw));
  }

  /// Goal position expressed in the robot base frame.
  Vec2 goal_in_base() const {
    return rotate(world.goal - state.position, -state.yaw);
  }

  double time_remaining_fraction() const {
    const int horizon = lambda_steps > 0 ? lambda_steps : max_steps;
    return std::max(1.0 - static_cast<double>(t) / horizon, 0.0);
  }
};

inline Episode make_episode(WorldInstance world, const EmbodimentSpec& spec,
                            const EpisodeRandomization& er, Rng rng,
                            int max_steps, double dt,
                            const EmbodimentConfig& cfg) {
  Episode ep;
  ep.world = std::move(world);
  ep.spec = spec;
  ep.rand = er;
  ep.rng = rng;
  ep.max_steps = max_steps;
  ep.dt = dt;
  ep.state.position = ep.world.start;
  ep.state.yaw = ep.rng.uniform(-kPi, kPi);
  if (is_articulated(spec.family)) {
    ep.state.base_height = ep.world.heightfield.sample(ep.state.position);
    const Vec2 grad = ep.world.heightfield.gradient(ep.state.position);
    const Vec2 gb = rotate(grad, -ep.state.yaw);
    ep.state.pitch = std::atan(gb.x);
    ep.state.roll = std::atan(gb.y);
    const double sp = std::sin(ep.state.pitch), cp = std::cos(ep.state.pitch);
    const double sr = std::sin(ep.state.roll), cr = std::cos(ep.state.roll);
    ep.state.projected_gravity = {sp, -sr * cp, -cr * cp};
  }
  if (er.push_enabled && is_articulated(spec.family)) {
    ep.next_push_time = ep.rng.uniform(cfg.domain_rand.push_interval[0],
                                       cfg.domain_rand.push_interval[1]);
  } else {
    ep.next_push_time = 1e30;
  }
  return ep;
}

/// Advances the episode by one control step with a family-native action
/// (2 values for wheeled, 12 joint targets for articulated robots).
/// The commanded action is recorded as last_action; actuator noise is applied
/// to the executed command only.
inline void step_episode(Episode& ep, const double* action,
                         const EmbodimentConfig& cfg) {
  if (ep.status != EpisodeStatus::running)
    throw std::logic_error("step_episode on a terminal episode");

  const int adim = native_action_dim(ep.spec.family);
  const DomainRandConfig& dr = cfg.domain_rand;

  // record the commanded action into the unified slots
  ep.prev_action = ep.state.last_action;
  std::array<double, kUnifiedActionDim> unified{};
  const int offset = is_articulated(ep.spec.family) ? 2 : 0;
  for (int i = 0; i < adim; ++i) unified[static_cast<size_t>(offset + i)] = action[i];
  ep.state.last_action = unified;

  // actuator noise on the executed command
  std::array<double, 12> executed{};
  for (int i = 0; i < adim; ++i) {
    executed[static_cast<size_t>(i)] = action[i];
    if (ep.rand.noise_enabled)
      executed[static_cast<size_t>(i)] +=
          ep.rng.uniform(dr.action_noise[0], dr.action_noise[1]);
  }

  // scheduled push disturbances (articulated training only)
  const double t_sec = ep.t * ep.dt;
  if (ep.rand.push_enabled && t_sec >= ep.next_push_time) {
    apply_push(ep.state, ep.spec.family, ep.rng, dr);
    ep.next_push_time +=
        ep.rng.uniform(dr.push_interval[0], dr.push_interval[1]);
  }

  const Vec2 before = ep.state.position;
  ep.last_diag = StepDiagnostics{};
  if (is_articulated(ep.spec.family)) {
    std::array<double, kNumJoints> targets{};
    for (int i = 0; i < kNumJoints; ++i) targets[static_cast<size_t>(i)] = executed[static_cast<size_t>(i)];
    step_articulated(ep.state, targets, ep.spec, ep.rand, cfg, ep.dt,
                     &ep.world, &ep.last_diag);
  } else {
    step_wheeled(ep.state, executed[0], executed[1], ep.spec, ep.rand, cfg,
                 ep.dt);
  }
  ep.path_length += (ep.state.position - before).norm();
  ep.t += 1;

  bool collided = check_collision(ep.state.position, ep.state.yaw, ep.spec,
                                  ep.world);
  if (!collided && is_articulated(ep.spec.family)) {
    const Vec2 grad = ep.world.heightfield.gradient(ep.state.position);
    if (std::atan(grad.norm()) > cfg.slope_collision_limit) collided = true;
  }
  if (collided) {
    ep.status = EpisodeStatus::collided;
  } else if (ep.t >= ep.max_steps) {
    ep.status = EpisodeStatus::timeout;
  }
}

}  // namespace crossnav
