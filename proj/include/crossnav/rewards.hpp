/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "crossnav/core.hpp"
#include "crossnav/simcore.hpp"

namespace crossnav {

/// Reward constants. Defaults reproduce the training hyperparameter table.
struct RewardConfig {
  double c1_soft = 10.0;
  double c2_soft = 5.0;
  double c1_hard = 15.0;
  double c2_hard = 0.5;
  double c1_stop = 10.0;
  double c2_stop = 0.2;
  double c_fwd = 2.0;
  double c_collide = -40.0;
  double c_a = -0.01;
  double c_vz = -2.0;
  double c_omega = -0.05;
  double c_tau = -2e-4;
  double c_qdd = -2.5e-7;
  double c_flat = -5.0;
  double c_air = 0.5;
  double v_max = 1.0;          // m/s
  double sigma_direct = 1.75;  // rad
  double sigma_hard = 0.5;     // m
  double t_reward = 1.5;       // T_r, s
  double episode_time = 8.0;   // T, s

  template <class V>
  void fields(V&& v) {
    v("c1_soft", c1_soft);
    v("c2_soft", c2_soft);
    v("c1_hard", c1_hard);
    v("c2_hard", c2_hard);
    v("c1_stop", c1_stop);
    v("c2_stop", c2_stop);
    v("c_fwd", c_fwd);
    v("c_collide", c_collide);
    v("c_a", c_a);
    v("c_vz", c_vz);
    v("c_omega", c_omega);
    v("c_tau", c_tau);
    v("c_qdd", c_qdd);
    v("c_flat", c_flat);
    v("c_air", c_air);
    v("v_max", v_max);
    v("sigma_direct", sigma_direct);
    v("sigma_hard", sigma_hard);
    v("t_reward", t_reward);
    v("episode_time", episode_time);
  }
};

enum class PositionRewardVariant { soft, hard };

/// Goal-position reward, gated to the last T_r seconds of the episode.
inline double position_reward(double d_goal, double t_sec,
                              PositionRewardVariant variant,
                              const RewardConfig& cfg) {
  if (t_sec <= cfg.episode_time - cfg.t_reward) return 0.0;
  const double c1 =
      variant == PositionRewardVariant::soft ? cfg.c1_soft : cfg.c1_hard;
  const double c2 =
      variant == PositionRewardVariant::soft ? cfg.c2_soft : cfg.c2_hard;
  const double r = d_goal / c2;
  return c1 / (1.0 + r * r);
}

/// Forward-progress reward, active while the goal is within sigma_direct of
/// the heading.
inline double forward_reward(double v_x, double delta_goal,
                             const RewardConfig& cfg) {
  if (delta_goal >= cfg.sigma_direct) return 0.0;
  const double ratio = v_x / cfg.v_max;
  return cfg.c_fwd * clamp(ratio, 0.0, 1.0);
}

/// Stillness reward near the goal in the terminal reward window.
inline double stop_reward(double vel_norm, double d_goal, double t_sec,
                          const RewardConfig& cfg) {
  if (t_sec <= cfg.episode_time - cfg.t_reward) return 0.0;
  if (d_goal >= cfg.sigma_hard) return 0.0;
  const double r = vel_norm / cfg.c2_stop;
  return cfg.c1_stop / (1.0 + r * r);
}

inline double collision_penalty(bool collided, const RewardConfig& cfg) {
  return collided ? cfg.c_collide : 0.0;
}

/// c_a * ||a_t - a_{t-1}||^2 over the wheeled action channels.
inline double wheeled_regularization(const std::array<double, 2>& action_diff,
                                     const RewardConfig& cfg) {
  return cfg.c_a * (sq(action_diff[0]) + sq(action_diff[1]));
}

struct ArticulatedRegTerms {
  double vz = 0.0;
  double omega_xy = 0.0;
  double torque = 0.0;
  double action_rate = 0.0;
  double joint_acc = 0.0;
  double flat = 0.0;
  double air = 0.0;

  double sum() const {
    return vz + omega_xy + torque + action_rate + joint_acc + flat + air;
  }
};

/// The six articulated regularization penalties plus the foot air-time term.
/// Air time is credited at each touchdown with the just-completed duration.
inline ArticulatedRegTerms articulated_regularization(
    double v_z, double omega_xy_sq, const std::array<double, kNumJoints>& tau,
    const std::array<double, kNumJoints>& action_diff,
    const std::array<double, kNumJoints>& qdd,
    const std::array<double, 2>& gravity_xy,
    const std::array<double, kNumLegs>& touchdown_air_time,
    const std::array<bool, kNumLegs>& touchdown, const RewardConfig& cfg) {
  ArticulatedRegTerms r;
  r.vz = cfg.c_vz * sq(v_z);
  r.omega_xy = cfg.c_omega * omega_xy_sq;
  double tau_sq = 0.0, a_sq = 0.0, qdd_sq = 0.0;
  for (int j = 0; j < kNumJoints; ++j) {
    tau_sq += sq(tau[static_cast<size_t>(j)]);
    a_sq += sq(action_diff[static_cast<size_t>(j)]);
    qdd_sq += sq(qdd[static_cast<size_t>(j)]);
  }
  r.torque = cfg.c_tau * tau_sq;
  r.action_rate = cfg.c_a * a_sq;
  r.joint_acc = cfg.c_qdd * qdd_sq;
  r.flat = cfg.c_flat * (sq(gravity_xy[0]) + sq(gravity_xy[1]));
  for (int f = 0; f < kNumLegs; ++f) {
    if (touchdown[static_cast<size_t>(f)])
      r.air += cfg.c_air * (touchdown_air_time[static_cast<size_t>(f)] - 0.5);
  }
  return r;
}

/// Per-term decomposition of one step's reward; total is the exact sum.
struct RewardBreakdown {
  double pos_soft = 0.0;
  double pos_hard = 0.0;
  double forward = 0.0;
  double stop = 0.0;
  double collide = 0.0;
  double action_rate = 0.0;
  double vz = 0.0;
  double omega_xy = 0.0;
  double torque = 0.0;
  double joint_acc = 0.0;
  double flat = 0.0;
  double air = 0.0;
  double total = 0.0;

  static const std::vector<std::string>& term_names() {
    static const std::vector<std::string> names{
        "pos_soft", "pos_hard", "forward",   "stop", "collide", "action_rate",
        "vz",       "omega_xy", "torque", "joint_acc", "flat", "air"};
    return names;
  }

  std::vector<double> terms() const {
    return {pos_soft, pos_hard, forward,   stop, collide, action_rate,
            vz,       omega_xy, torque, joint_acc, flat, air};
  }
};

/// Assembles the full per-step reward for the episode's family from the
/// post-step state and dynamics diagnostics.
inline RewardBreakdown total_reward(const Episode& ep,
                                    const RewardConfig& cfg) {
  RewardBreakdown r;
  const RobotState& s = ep.state;
  const double t_sec = ep.t * ep.dt;
  const double d_goal = ep.goal_distance();

  r.pos_soft = position_reward(d_goal, t_sec, PositionRewardVariant::soft, cfg);
  r.pos_hard = position_reward(d_goal, t_sec, PositionRewardVariant::hard, cfg);
  r.forward = forward_reward(s.vx, ep.heading_error(), cfg);

  const bool articulated = is_articulated(ep.spec.family);
  const double vel_norm =
      articulated ? std::sqrt(sq(s.vx) + sq(s.vy) + sq(s.omega))
                  : std::sqrt(sq(s.vx) + sq(s.omega));
  r.stop = stop_reward(vel_norm, d_goal, t_sec, cfg);
  r.collide = collision_penalty(ep.status == EpisodeStatus::collided, cfg);

  if (articulated) {
    std::array<double, kNumJoints> adiff{};
    for (int j = 0; j < kNumJoints; ++j)
      adiff[static_cast<size_t>(j)] = s.last_action[static_cast<size_t>(2 + j)] -
                                      ep.prev_action[static_cast<size_t>(2 + j)];
    const ArticulatedRegTerms reg = articulated_regularization(
        ep.last_diag.v_z, ep.last_diag.omega_xy_sq, ep.last_diag.torque, adiff,
        ep.last_diag.qdd,
        {s.projected_gravity[0], s.projected_gravity[1]},
        ep.last_diag.touchdown_air_time, ep.last_diag.touchdown, cfg);
    r.vz = reg.vz;
    r.omega_xy = reg.omega_xy;
    r.torque = reg.torque;
    r.action_rate = reg.action_rate;
    r.joint_acc = reg.joint_acc;
    r.flat = reg.flat;
    r.air = reg.air;
  } else {
    const std::array<double, 2> adiff{
        s.last_action[0] - ep.prev_action[0],
        s.last_action[1] - ep.prev_action[1]};
    r.action_rate = wheeled_regularization(adiff, cfg);
  }

  r.total = r.pos_soft + r.pos_hard + r.forward + r.stop + r.collide +
            r.action_rate + r.vz + r.omega_xy + r.torque + r.joint_acc +
            r.flat + r.air;
  return r;
}

}  // namespace crossnav
