/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "crossnav/core.hpp"
#include "crossnav/rng.hpp"
#include "crossnav/worldgen.hpp"

namespace crossnav {

enum class Family { wheeled, small_articulated, large_articulated };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::wheeled: return "wheeled";
    case Family::small_articulated: return "small_articulated";
    case Family::large_articulated: return "large_articulated";
  }
  throw std::invalid_argument("unknown family");
}

inline Family family_from_string(const std::string& s) {
  if (s == "wheeled") return Family::wheeled;
  if (s == "small_articulated") return Family::small_articulated;
  if (s == "large_articulated") return Family::large_articulated;
  throw std::invalid_argument("unknown family: " + s);
}

inline bool is_articulated(Family f) { return f != Family::wheeled; }

/// Native action dimension: (v, omega) for wheeled, 12 joint targets for
/// articulated robots.
inline int native_action_dim(Family f) { return is_articulated(f) ? 12 : 2; }

constexpr int kNumJoints = 12;
constexpr int kNumLegs = 4;   // FL, FR, RL, RR; joints per leg: hip, thigh, calf
constexpr int kUnifiedActionDim = 14;

enum class LegConfig { FE, FEBK };

using Range = std::array<double, 2>;

/// Embodiment randomization ranges for one robot family.
struct FamilyRanges {
  Range base_length{0, 0};
  Range base_width{0, 0};
  Range base_height{0, 0};
  Range base_mass{0, 0};
  Range thigh_radius{0, 0};
  Range thigh_length{0, 0};
  Range thigh_mass{0, 0};
  Range calf_radius{0, 0};
  Range calf_length{0, 0};
  Range calf_mass{0, 0};
  Range motor_p_gain{0, 0};
  Range motor_d_gain{0, 0};

  template <class V>
  void fields(V&& v) {
    v("base_length", base_length);
    v("base_width", base_width);
    v("base_height", base_height);
    v("base_mass", base_mass);
    v("thigh_radius", thigh_radius);
    v("thigh_length", thigh_length);
    v("thigh_mass", thigh_mass);
    v("calf_radius", calf_radius);
    v("calf_length", calf_length);
    v("calf_mass", calf_mass);
    v("motor_p_gain", motor_p_gain);
    v("motor_d_gain", motor_d_gain);
  }
};

inline FamilyRanges small_quadruped_ranges() {
  FamilyRanges r;
  r.base_length = {0.24, 0.91};
  r.base_width = {0.16, 0.39};
  r.base_height = {0.06, 0.21};
  r.base_mass = {4.8, 19.5};
  r.thigh_radius = {0.02, 0.05};
  r.thigh_length = {0.16, 0.46};
  r.thigh_mass = {0.56, 1.69};
  r.calf_radius = {0.02, 0.05};
  r.calf_length = {0.12, 0.39};
  r.calf_mass = {0.12, 0.39};
  r.motor_p_gain = {0.7, 1.3};
  r.motor_d_gain = {0.7, 1.3};
  return r;
}

inline FamilyRanges large_quadruped_ranges() {
  FamilyRanges r;
  r.base_length = {0.56, 1.04};
  r.base_width = {0.28, 0.52};
  r.base_height = {0.14, 0.26};
  r.base_mass = {24.0, 39.0};
  r.thigh_radius = {0.03, 0.05};
  r.thigh_length = {0.24, 0.39};
  r.thigh_mass = {2.0, 5.2};
  r.calf_radius = {0.02, 0.04};
  r.calf_length = {0.24, 0.36};
  r.calf_mass = {0.4, 0.6};
  r.motor_p_gain = {0.5, 1.3};
  r.motor_d_gain = {0.5, 1.3};
  return r;
}

inline FamilyRanges wheeled_ranges() {
  FamilyRanges r;  // leg/gain ranges stay zero (not sampled)
  r.base_length = {0.3, 0.8};
  r.base_width = {0.2, 0.65};
  r.base_height = {0.15, 0.3};
  r.base_mass = {5.0, 20.0};
  return r;
}

/// Nominal robot used to scale PD gains to each generated robot's mass.
struct RobotTemplate {
  double kp = 28.0;
  double kd = 0.7;
  double mass = 12.0;
  // scale factors of the nominal gait-mixing matrix rows
  double gait_forward_gain = 1.0;
  double gait_lateral_gain = 0.5;
  double gait_turn_gain = 1.0;

  template <class V>
  void fields(V&& v) {
    v("kp", kp);
    v("kd", kd);
    v("mass", mass);
    v("gait_forward_gain", gait_forward_gain);
    v("gait_lateral_gain", gait_lateral_gain);
    v("gait_turn_gain", gait_turn_gain);
  }
};

/// Domain randomization ranges, drawn per episode / per event.
struct DomainRandConfig {
  Range static_friction{0.7, 1.1};
  Range dynamic_friction{0.6, 1.0};
  Range added_mass{0.0, 2.0};
  Range push_velocity{-0.5, 0.5};
  Range push_interval{4.0, 8.0};
  Range ray_noise{-0.1, 0.1};
  Range lin_vel_noise{-0.1, 0.1};
  Range ang_vel_noise{-0.1, 0.1};
  Range gravity_noise{-0.05, 0.05};
  Range joint_vel_noise{-1.0, 1.0};
  Range joint_pos_noise{-0.01, 0.01};
  Range action_noise{-0.02, 0.02};

  template <class V>
  void fields(V&& v) {
    v("static_friction", static_friction);
    v("dynamic_friction", dynamic_friction);
    v("added_mass", added_mass);
    v("push_velocity", push_velocity);
    v("push_interval", push_interval);
    v("ray_noise", ray_noise);
    v("lin_vel_noise", lin_vel_noise);
    v("ang_vel_noise", ang_vel_noise);
    v("gravity_noise", gravity_noise);
    v("joint_vel_noise", joint_vel_noise);
    v("joint_pos_noise", joint_pos_noise);
    v("action_noise", action_noise);
  }
};

struct EmbodimentConfig {
  FamilyRanges small_quadruped = small_quadruped_ranges();
  FamilyRanges large_quadruped = large_quadruped_ranges();
  FamilyRanges wheeled = wheeled_ranges();
  RobotTemplate robot_template;
  DomainRandConfig domain_rand;
  double tau_max_small = 33.5;
  double tau_max_large = 80.0;
  double large_family_mass_split = 30.0;
  // wheeled actuator surrogate
  double wheel_time_constant_per_10kg = 0.05;
  Range wheeled_v_limits{-0.5, 1.0};
  Range wheeled_omega_limits{-2.0, 2.0};
  // articulated surrogate
  int physics_substeps = 4;
  double joint_inertia_floor = 1e-3;
  double joint_velocity_limit = 25.0;
  Range articulated_vx_limits{-0.6, 1.2};
  Range articulated_vy_limits{-0.5, 0.5};
  Range articulated_omega_limits{-2.5, 2.5};
  double push_decay_time = 0.4;
  double swing_phase_threshold = 0.2;
  double slope_collision_limit = 0.45;  // terrain tilt treated as a fall
  // unified range sensor (per-embodiment raw scan, resampled to 128 rays)
  Range sensor_rays{48, 160};
  Range sensor_fov{1.5707963267948966, 2.2689280275926285};  // [90, 130] deg

  template <class V>
  void fields(V&& v) {
    v("small_quadruped", small_quadruped);
    v("large_quadruped", large_quadruped);
    v("wheeled", wheeled);
    v("robot_template", robot_template);
    v("domain_rand", domain_rand);
    v("tau_max_small", tau_max_small);
    v("tau_max_large", tau_max_large);
    v("large_family_mass_split", large_family_mass_split);
    v("wheel_time_constant_per_10kg", wheel_time_constant_per_10kg);
    v("wheeled_v_limits", wheeled_v_limits);
    v("wheeled_omega_limits", wheeled_omega_limits);
    v("physics_substeps", physics_substeps);
    v("joint_inertia_floor", joint_inertia_floor);
    v("joint_velocity_limit", joint_velocity_limit);
    v("articulated_vx_limits", articulated_vx_limits);
    v("articulated_vy_limits", articulated_vy_limits);
    v("articulated_omega_limits", articulated_omega_limits);
    v("push_decay_time", push_decay_time);
    v("swing_phase_threshold", swing_phase_threshold);
    v("slope_collision_limit", slope_collision_limit);
    v("sensor_rays", sensor_rays);
    v("sensor_fov", sensor_fov);
  }
};

/// Sampled physical parameters of one robot.
struct EmbodimentSpec {
  Family family = Family::wheeled;
  double base_length = 0.5;
  double base_width = 0.3;
  double base_height = 0.2;
  double base_mass = 10.0;
  double thigh_radius = 0.0;
  double thigh_length = 0.0;
  double thigh_mass = 0.0;
  double calf_radius = 0.0;
  double calf_length = 0.0;
  double calf_mass = 0.0;
  double kp_scale = 0.0;  // sampled v for the P gain
  double kd_scale = 0.0;  // sampled v for the D gain
  LegConfig leg_config = LegConfig::FE;
  double kp = 0.0;  // derived via the template scaling rule
  double kd = 0.0;
  double tau_max = 0.0;
  int sensor_rays = 128;
  double sensor_fov = kPi / 2.0;

  /// Total generated mass: base plus four (thigh + calf) legs.
  double total_mass() const {
    return base_mass + 4.0 * (thigh_mass + calf_mass);
  }

  double half_diagonal() const {
    return 0.5 * std::sqrt(base_length * base_length + base_width * base_width);
  }
};

/// Full kinematic/dynamic state of one robot.
struct RobotState {
  Vec2 position;
  double yaw = 0.0;
  // base-frame twist (v_x, v_y, omega)
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
  std::array<double, kNumJoints> q{};
  std::array<double, kNumJoints> qd{};
  std::array<double, 3> projected_gravity{0.0, 0.0, -1.0};
  std::array<double, kUnifiedActionDim> last_action{};
  std::array<double, kNumLegs> foot_air_time{};
  std::array<bool, kNumLegs> foot_in_air{};
  // terrain coupling bookkeeping
  double base_height = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  // residual push velocity (world-independent, base frame), decays over time
  double push_vx = 0.0;
  double push_vy = 0.0;
};

/// Per-step dynamics byproducts consumed by the reward terms.
struct StepDiagnostics {
  std::array<double, kNumJoints> torque{};
  std::array<double, kNumJoints> qdd{};
  double v_z = 0.0;
  double omega_xy_sq = 0.0;  // roll/pitch rate squared magnitude
  // air durations of feet that touched down during this step
  std::array<double, kNumLegs> touchdown_air_time{};
  std::array<bool, kNumLegs> touchdown{};
};

inline const FamilyRanges& ranges_for(const EmbodimentConfig& cfg, Family f) {
  switch (f) {
    case Family::wheeled: return cfg.wheeled;
    case Family::small_articulated: return cfg.small_quadruped;
    case Family::large_articulated: return cfg.large_quadruped;
  }
  throw std::invalid_argument("unknown family");
}

/// Gain scaling rule: K = v_temp * (m_gen / m_temp) * v.
inline std::pair<double, double> compute_pd_gains(const EmbodimentSpec& spec,
                                                  const RobotTemplate& tmpl) {
  if (!is_articulated(spec.family))
    throw std::invalid_argument("PD gains only apply to articulated robots");
  const double m_gen = spec.total_mass();
  if (m_gen <= 0.0 || tmpl.mass <= 0.0)
    throw std::invalid_argument("masses must be positive");
  const double ratio = m_gen / tmpl.mass;
  return {tmpl.kp * ratio * spec.kp_scale, tmpl.kd * ratio * spec.kd_scale};
}

inline EmbodimentSpec sample_embodiment(Family family, Rng& rng,
                                        const EmbodimentConfig& cfg = EmbodimentConfig{}) {
  const FamilyRanges& r = ranges_for(cfg, family);
  EmbodimentSpec s;
  s.family = family;
  s.base_length = rng.uniform(r.base_length[0], r.base_length[1]);
  s.base_width = rng.uniform(r.base_width[0], r.base_width[1]);
  s.base_height = rng.uniform(r.base_height[0], r.base_height[1]);
  s.base_mass = rng.uniform(r.base_mass[0], r.base_mass[1]);
  if (is_articulated(family)) {
    s.thigh_radius = rng.uniform(r.thigh_radius[0], r.thigh_radius[1]);
    s.thigh_length = rng.uniform(r.thigh_length[0], r.thigh_length[1]);
    s.thigh_mass = rng.uniform(r.thigh_mass[0], r.thigh_mass[1]);
    s.calf_radius = rng.uniform(r.calf_radius[0], r.calf_radius[1]);
    s.calf_length = rng.uniform(r.calf_length[0], r.calf_length[1]);
    s.calf_mass = rng.uniform(r.calf_mass[0], r.calf_mass[1]);
    s.kp_scale = rng.uniform(r.motor_p_gain[0], r.motor_p_gain[1]);
    s.kd_scale = rng.uniform(r.motor_d_gain[0], r.motor_d_gain[1]);
    s.leg_config = rng.uniform_int(2) == 0 ? LegConfig::FE : LegConfig::FEBK;
    auto [kp, kd] = compute_pd_gains(s, cfg.robot_template);
    s.kp = kp;
    s.kd = kd;
    s.tau_max = family == Family::large_articulated ? cfg.tau_max_large
                                                    : cfg.tau_max_small;
  }
  s.sensor_rays = static_cast<int>(
      std::round(rng.uniform(cfg.sensor_rays[0], cfg.sensor_rays[1])));
  s.sensor_fov = rng.uniform(cfg.sensor_fov[0], cfg.sensor_fov[1]);
  return s;
}

/// Joint-position tracking torque, unclamped.
inline double pd_torque(double kp, double kd, double target, double q,
                        double qd) {
  return kp * (target - q) - kd * qd;
}

inline double pd_torque_clamped(double kp, double kd, double target, double q,
                                double qd, double tau_max) {
  return clamp(pd_torque(kp, kd, target, q, qd), -tau_max, tau_max);
}

/// Slender-rod inertia of one leg about its drive joint.
inline double joint_inertia(const EmbodimentSpec& spec, double floor_value) {
  const double reach = spec.thigh_length + spec.calf_length;
  const double i = (spec.thigh_mass * spec.thigh_length * spec.thigh_length +
                    spec.calf_mass * reach * reach) / 3.0;
  return std::max(i, floor_value);
}

/// Per-episode draws of the domain-randomized physical parameters.
struct EpisodeRandomization {
  double static_friction = 1.0;
  double dynamic_friction = 1.0;
  double added_mass = 0.0;
  bool push_enabled = false;
  bool noise_enabled = false;
};

inline EpisodeRandomization sample_episode_randomization(
    Rng& rng, const DomainRandConfig& dr, bool push_enabled,
    bool noise_enabled) {
  EpisodeRandomization er;
  er.static_friction = rng.uniform(dr.static_friction[0], dr.static_friction[1]);
  er.dynamic_friction =
      rng.uniform(dr.dynamic_friction[0], dr.dynamic_friction[1]);
  er.added_mass = rng.uniform(dr.added_mass[0], dr.added_mass[1]);
  er.push_enabled = push_enabled;
  er.noise_enabled = noise_enabled;
  return er;
}

namespace detail {

/// Exact constant-twist pose integration over one step.
inline void integrate_pose(RobotState& s, double vx, double vy, double omega,
                           double dt) {
  const double yaw0 = s.yaw;
  if (std::abs(omega) < 1e-9) {
    s.position.x += (vx * std::cos(yaw0) - vy * std::sin(yaw0)) * dt;
    s.position.y += (vx * std::sin(yaw0) + vy * std::cos(yaw0)) * dt;
  } else {
    const double yaw1 = yaw0 + omega * dt;
    const double inv = 1.0 / omega;
    // integral of R(yaw(t)) * v over the step
    const double sx = (std::sin(yaw1) - std::sin(yaw0)) * inv;
    const double cx = (std::cos(yaw1) - std::cos(yaw0)) * inv;
    s.position.x += vx * sx + vy * cx;
    s.position.y += -vx * cx + vy * sx;
  }
  s.yaw = wrap_angle(yaw0 + omega * dt);
}

}  // namespace detail

/// Wheeled dynamics: commanded (v, omega) tracked through a first-order lag
/// with a mass-dependent time constant, traction-limited acceleration, then
/// exact unicycle integration.
inline void step_wheeled(RobotState& state, double v_cmd, double omega_cmd,
                         const EmbodimentSpec& spec,
                         const EpisodeRandomization& er,
                         const EmbodimentConfig& cfg, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  v_cmd = clamp(v_cmd, cfg.wheeled_v_limits[0], cfg.wheeled_v_limits[1]);
  omega_cmd =
      clamp(omega_cmd, cfg.wheeled_omega_limits[0], cfg.wheeled_omega_limits[1]);

  const double mass = spec.base_mass + er.added_mass;
  // lower traction slows the velocity response
  const double tau_c = cfg.wheel_time_constant_per_10kg * (mass / 10.0) /
                       std::max(er.dynamic_friction, 0.1);
  const double alpha = std::exp(-dt / tau_c);
  // exact step mean of the first-order lag response
  const double mean_w = tau_c * (1.0 - alpha) / dt;

  const double v_new = v_cmd + (state.vx - v_cmd) * alpha;
  const double v_avg = v_cmd + (state.vx - v_cmd) * mean_w;
  const double omega_new = omega_cmd + (state.omega - omega_cmd) * alpha;
  const double omega_avg = omega_cmd + (state.omega - omega_cmd) * mean_w;

  detail::integrate_pose(state, v_avg, 0.0, omega_avg, dt);
  state.vx = v_new;
  state.vy = 0.0;
  state.omega = omega_new;
}

/// Articulated planar surrogate. Joints follow PD torque dynamics with
/// per-joint inertia; the base twist is a fixed mixing of joint velocities:
///   v_x     ~ mean thigh velocity * crank radius
///   v_y     ~ left/right-antisymmetric hip velocity mixing
///   omega   ~ differential left/right thigh velocity
/// Feet alternate stance/swing from the thigh crank phase.
inline void step_articulated(RobotState& state,
                             const std::array<double, kNumJoints>& targets,
                             const EmbodimentSpec& spec,
                             const EpisodeRandomization& er,
                             const EmbodimentConfig& cfg, double dt,
                             const WorldInstance* world,
                             StepDiagnostics* diag = nullptr) {
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  if (!is_articulated(spec.family))
    throw std::invalid_argument("articulated stepping on a wheeled spec");

  const double inertia = joint_inertia(spec, cfg.joint_inertia_floor);
  const int substeps = std::max(cfg.physics_substeps, 1);
  const double h = dt / substeps;

  // reward-facing torque: the PD law evaluated on the pre-step state
  if (diag != nullptr) {
    for (int j = 0; j < kNumJoints; ++j) {
      const double err = wrap_angle(targets[j] - state.q[j]);
      diag->torque[j] = clamp(spec.kp * err - spec.kd * state.qd[j],
                              -spec.tau_max, spec.tau_max);
    }
  }

  std::array<double, kNumJoints> qd_before = state.qd;
  for (int step = 0; step < substeps; ++step) {
    for (int j = 0; j < kNumJoints; ++j) {
      const double err = wrap_angle(targets[j] - state.q[j]);
      const double tau = clamp(spec.kp * err - spec.kd * state.qd[j],
                               -spec.tau_max, spec.tau_max);
      state.qd[j] += h * tau / inertia;
      state.qd[j] = clamp(state.qd[j], -cfg.joint_velocity_limit,
                          cfg.joint_velocity_limit);
      state.q[j] = wrap_angle(state.q[j] + h * state.qd[j]);
    }
  }
  if (diag != nullptr) {
    for (int j = 0; j < kNumJoints; ++j)
      diag->qdd[j] = (state.qd[j] - qd_before[j]) / dt;
  }

  // gait mixing: thigh joints act as cranks, hips give lateral motion
  const RobotTemplate& tmpl = cfg.robot_template;
  const double r_eff = 0.5 * (spec.thigh_length + spec.calf_length);
  const double r_hip = 0.25 * (spec.thigh_length + spec.calf_length);
  const double track = std::max(spec.base_width, 0.05);
  auto thigh = [&](int leg) { return state.qd[3 * leg + 1]; };
  auto hip = [&](int leg) { return state.qd[3 * leg]; };

  const double traction = std::min(er.dynamic_friction, 1.0);
  const double v_left = 0.5 * r_eff * (thigh(0) + thigh(2));
  const double v_right = 0.5 * r_eff * (thigh(1) + thigh(3));
  double vx = tmpl.gait_forward_gain * traction * 0.5 * (v_left + v_right);
  double vy = tmpl.gait_lateral_gain * traction * 0.25 * r_hip *
              (hip(0) - hip(1) + hip(2) - hip(3));
  double omega = tmpl.gait_turn_gain * traction * (v_right - v_left) / track;

  // residual push velocity decays exponentially
  const double decay = std::exp(-dt / cfg.push_decay_time);
  state.push_vx *= decay;
  state.push_vy *= decay;
  vx += state.push_vx;
  vy += state.push_vy;

  vx = clamp(vx, cfg.articulated_vx_limits[0], cfg.articulated_vx_limits[1]);
  vy = clamp(vy, cfg.articulated_vy_limits[0], cfg.articulated_vy_limits[1]);
  omega = clamp(omega, cfg.articulated_omega_limits[0],
                cfg.articulated_omega_limits[1]);

  const double h_before = state.base_height;
  const double roll_before = state.roll;
  const double pitch_before = state.pitch;

  detail::integrate_pose(state, vx, vy, omega, dt);
  state.vx = vx;
  state.vy = vy;
  state.omega = omega;

  // terrain coupling: base height and tilt follow the local surface
  if (world != nullptr) {
    state.base_height = world->heightfield.sample(state.position);
    const Vec2 grad = world->heightfield.gradient(state.position);
    const Vec2 grad_base = rotate(grad, -state.yaw);
    state.pitch = std::atan(grad_base.x);
    state.roll = std::atan(grad_base.y);
  } else {
    state.base_height = 0.0;
    state.pitch = 0.0;
    state.roll = 0.0;
  }
  const double sp = std::sin(state.pitch), cp = std::cos(state.pitch);
  const double sr = std::sin(state.roll), cr = std::cos(state.roll);
  state.projected_gravity = {sp, -sr * cp, -cr * cp};

  if (diag != nullptr) {
    diag->v_z = (state.base_height - h_before) / dt;
    const double droll = (state.roll - roll_before) / dt;
    const double dpitch = (state.pitch - pitch_before) / dt;
    diag->omega_xy_sq = droll * droll + dpitch * dpitch;
  }

  // stance/swing phase from the thigh crank angle
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const bool air = std::sin(state.q[3 * leg + 1]) > cfg.swing_phase_threshold;
    if (air) {
      state.foot_air_time[leg] += dt;
    } else if (state.foot_in_air[leg]) {
      if (diag != nullptr) {
        diag->touchdown[leg] = true;
        diag->touchdown_air_time[leg] = state.foot_air_time[leg];
      }
      state.foot_air_time[leg] = 0.0;
    }
    state.foot_in_air[leg] = air;
  }
}

// ---- serialization ----

inline nlohmann::json spec_to_json(const EmbodimentSpec& s) {
  return nlohmann::json{
      {"family", to_string(s.family)},
      {"base_length", s.base_length},
      {"base_width", s.base_width},
      {"base_height", s.base_height},
      {"base_mass", s.base_mass},
      {"thigh_radius", s.thigh_radius},
      {"thigh_length", s.thigh_length},
      {"thigh_mass", s.thigh_mass},
      {"calf_radius", s.calf_radius},
      {"calf_length", s.calf_length},
      {"calf_mass", s.calf_mass},
      {"kp_scale", s.kp_scale},
      {"kd_scale", s.kd_scale},
      {"leg_config", s.leg_config == LegConfig::FE ? "FE" : "FEBK"},
      {"kp", s.kp},
      {"kd", s.kd},
      {"tau_max", s.tau_max},
      {"sensor_rays", s.sensor_rays},
      {"sensor_fov", s.sensor_fov}};
}

inline EmbodimentSpec spec_from_json(const nlohmann::json& j) {
  EmbodimentSpec s;
  s.family = family_from_string(j.at("family").get<std::string>());
  s.base_length = j.at("base_length").get<double>();
  s.base_width = j.at("base_width").get<double>();
  s.base_height = j.at("base_height").get<double>();
  s.base_mass = j.at("base_mass").get<double>();
  s.thigh_radius = j.at("thigh_radius").get<double>();
  s.thigh_length = j.at("thigh_length").get<double>();
  s.thigh_mass = j.at("thigh_mass").get<double>();
  s.calf_radius = j.at("calf_radius").get<double>();
  s.calf_length = j.at("calf_length").get<double>();
  s.calf_mass = j.at("calf_mass").get<double>();
  s.kp_scale = j.at("kp_scale").get<double>();
  s.kd_scale = j.at("kd_scale").get<double>();
  s.leg_config =
      j.at("leg_config").get<std::string>() == "FE" ? LegConfig::FE : LegConfig::FEBK;
  s.kp = j.at("kp").get<double>();
  s.kd = j.at("kd").get<double>();
  s.tau_max = j.at("tau_max").get<double>();
  s.sensor_rays = j.at("sensor_rays").get<int>();
  s.sensor_fov = j.at("sensor_fov").get<double>();
  return s;
}

}  // namespace crossnav
