/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <vector>

#include "crossnav/core.hpp"
#include "crossnav/simcore.hpp"

namespace crossnav {

constexpr int kUnifiedProprioDim = 30;
constexpr int kHistoryFrames = 5;
constexpr int kHistoryFrameDim = kUnifiedActionDim + kUnifiedProprioDim;  // 44
constexpr int kUnifiedRays = 128;
constexpr double kUnifiedFov = kPi / 2.0;
constexpr double kRayMin = 0.2;
constexpr double kRayMax = 8.0;
constexpr int kUnifiedObsDim =
    2 + 2 + kUnifiedProprioDim + kHistoryFrames * kHistoryFrameDim + kUnifiedRays;  // 382

/// Fixed per-field scale constants applied when observations are assembled.
struct ObsScales {
  double goal = 0.25;
  double lin_vel = 1.0;
  double ang_vel = 0.5;
  double gravity = 1.0;
  double joint_pos = 1.0;
  double joint_vel = 0.1;
  double height_scan = 5.0;
  double ray = 0.25;
  double base_size = 1.0;
  double mass = 0.1;
  double gain = 0.02;
  double time_remaining = 1.0;

  template <class V>
  void fields(V&& v) {
    v("goal", goal);
    v("lin_vel", lin_vel);
    v("ang_vel", ang_vel);
    v("gravity", gravity);
    v("joint_pos", joint_pos);
    v("joint_vel", joint_vel);
    v("height_scan", height_scan);
    v("ray", ray);
    v("base_size", base_size);
    v("mass", mass);
    v("gain", gain);
    v("time_remaining", time_remaining);
  }
};

/// One post-noise proprioception snapshot. Drawn once per control step so the
/// expert and unified observation paths see identical values.
struct ProprioSample {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
  std::array<double, 3> gravity{0.0, 0.0, -1.0};
  std::array<double, kNumJoints> q{};
  std::array<double, kNumJoints> qd{};
};

inline ProprioSample sample_proprio(Episode& ep, const DomainRandConfig& dr) {
  ProprioSample p;
  const RobotState& s = ep.state;
  p.vx = s.vx;
  p.vy = s.vy;
  p.omega = s.omega;
  p.gravity = s.projected_gravity;
  p.q = s.q;
  p.qd = s.qd;
  if (ep.rand.noise_enabled) {
    Rng& rng = ep.rng;
    p.vx += rng.uniform(dr.lin_vel_noise[0], dr.lin_vel_noise[1]);
    p.omega += rng.uniform(dr.ang_vel_noise[0], dr.ang_vel_noise[1]);
    if (is_articulated(ep.spec.family)) {
      p.vy += rng.uniform(dr.lin_vel_noise[0], dr.lin_vel_noise[1]);
      for (auto& g : p.gravity)
        g += rng.uniform(dr.gravity_noise[0], dr.gravity_noise[1]);
      for (auto& q : p.q)
        q += rng.uniform(dr.joint_pos_noise[0], dr.joint_pos_noise[1]);
      for (auto& qd : p.qd)
        qd += rng.uniform(dr.joint_vel_noise[0], dr.joint_vel_noise[1]);
    }
  }
  return p;
}

/// Family-native proprioception vector: (v, omega) for wheeled, the 30-D
/// concatenation [base velocity, projected gravity, q, qd] for articulated.
/// Values are scaled by the per-field constants.
inline std::vector<double> native_proprio(Family family,
                                          const ProprioSample& p,
                                          const ObsScales& sc) {
  if (!is_articulated(family))
    return {p.vx * sc.lin_vel, p.omega * sc.ang_vel};
  std::vector<double> out;
  out.reserve(kUnifiedProprioDim);
  out.push_back(p.vx * sc.lin_vel);
  out.push_back(p.vy * sc.lin_vel);
  out.push_back(p.omega * sc.ang_vel);
  for (double g : p.gravity) out.push_back(g * sc.gravity);
  for (double q : p.q) out.push_back(q * sc.joint_pos);
  for (double qd : p.qd) out.push_back(qd * sc.joint_vel);
  return out;
}

/// Zero-padding into the 30-D unified proprioception. Wheeled (v, omega) land
/// in base-velocity slots 0 and 2; articulated input passes through.
inline std::vector<double> pad_proprio(const std::vector<double>& o_prio) {
  if (o_prio.size() == kUnifiedProprioDim) return o_prio;
  if (o_prio.size() == 2) {
    std::vector<double> out(kUnifiedProprioDim, 0.0);
    out[0] = o_prio[0];
    out[2] = o_prio[1];
    return out;
  }
  throw std::invalid_argument("o_prio must be 2-D (wheeled) or 30-D (articulated)");
}

/// Privileged expert observation: [a_prev, o_prio, l_g, lambda, o_embod, o_scan].
struct ExpertObservation {
  std::vector<double> values;
};

struct ScanWindow {
  double x_scan = 2.5;
  double y_scan = 2.5;
  double resolution = 0.25;

  int cells() const {
    const int nx = static_cast<int>(std::round(x_scan / resolution)) + 1;
    const int ny = static_cast<int>(std::round(y_scan / resolution)) + 1;
    return nx * ny;
  }

  template <class V>
  void fields(V&& v) {
    v("x_scan", x_scan);
    v("y_scan", y_scan);
    v("resolution", resolution);
  }
};

inline int expert_obs_dim(Family family, const ScanWindow& w) {
  const int adim = native_action_dim(family);
  const int prio = is_articulated(family) ? kUnifiedProprioDim : 2;
  const int embod = is_articulated(family) ? 12 : 4;
  return adim + prio + 2 + 1 + embod + w.cells();
}

inline ExpertObservation build_expert_obs(Episode& ep, const ProprioSample& p,
                                          const ScanWindow& window,
                                          const ObsScales& sc) {
  if (ep.status != EpisodeStatus::running &&
      ep.t == 0)
    throw std::logic_error("observation on an unstarted terminal episode");
  ExpertObservation obs;
  std::vector<double>& v = obs.values;
  v.reserve(static_cast<size_t>(expert_obs_dim(ep.spec.family, window)));

  const EmbodimentSpec& spec = ep.spec;
  const int adim = native_action_dim(spec.family);
  const int offset = is_articulated(spec.family) ? 2 : 0;
  for (int i = 0; i < adim; ++i)
    v.push_back(ep.state.last_action[static_cast<size_t>(offset + i)]);

  for (double x : native_proprio(spec.family, p, sc)) v.push_back(x);

  const Vec2 lg = ep.goal_in_base();
  v.push_back(lg.x * sc.goal);
  v.push_back(lg.y * sc.goal);
  v.push_back(ep.time_remaining_fraction() * sc.time_remaining);

  if (is_articulated(spec.family)) {
    v.push_back(spec.base_length * sc.base_size);
    v.push_back(spec.base_width * sc.base_size);
    v.push_back(spec.base_height * sc.base_size);
    v.push_back(spec.base_mass * sc.mass);
    v.push_back(spec.thigh_radius * sc.base_size);
    v.push_back(spec.thigh_length * sc.base_size);
    v.push_back(spec.thigh_mass * sc.mass);
    v.push_back(spec.calf_radius * sc.base_size);
    v.push_back(spec.calf_length * sc.base_size);
    v.push_back(spec.calf_mass * sc.mass);
    v.push_back(spec.kp * sc.gain);
    v.push_back(spec.kd * sc.gain);
  } else {
    v.push_back(spec.base_mass * sc.mass);
    v.push_back(spec.base_length * sc.base_size);
    v.push_back(spec.base_width * sc.base_size);
    v.push_back(spec.base_height * sc.base_size);
  }

  for (double h : height_scan(ep.state.position, ep.state.yaw, ep.world,
                              window.x_scan, window.y_scan, window.resolution))
    v.push_back(h * sc.height_scan);
  return obs;
}

/// Resamples a raw scan to n_out rays across the central fov_out by linear
/// interpolation in angle. The raw scan must cover at least fov_out.
inline std::vector<double> unify_rays(const std::vector<double>& raw,
                                      double fov_raw, int n_out = kUnifiedRays,
                                      double fov_out = kUnifiedFov,
                                      double min_range = kRayMin,
                                      double max_range = kRayMax) {
  if (raw.size() < 2) throw std::invalid_argument("raw scan needs >= 2 rays");
  if (fov_raw < fov_out - 1e-9)
    throw std::invalid_argument("raw scan fov narrower than the unified fov");
  const int n_raw = static_cast<int>(raw.size());
  std::vector<double> out(static_cast<size_t>(n_out));
  for (int j = 0; j < n_out; ++j) {
    const double angle = fov_out * (static_cast<double>(j) / (n_out - 1) - 0.5);
    const double u = (angle / fov_raw + 0.5) * (n_raw - 1);
    const int i0 = std::clamp(static_cast<int>(std::floor(u)), 0, n_raw - 2);
    const double f = std::clamp(u - i0, 0.0, 1.0);
    const double d = raw[static_cast<size_t>(i0)] * (1.0 - f) +
                     raw[static_cast<size_t>(i0 + 1)] * f;
    out[static_cast<size_t>(j)] = clamp(d, min_range, max_range);
  }
  return out;
}

/// Additive ray noise with re-clamping to the sensor range.
inline void add_ray_noise(std::vector<double>& distances, Rng& rng,
                          const DomainRandConfig& dr,
                          double min_range = kRayMin,
                          double max_range = kRayMax) {
  for (auto& d : distances) {
    d += rng.uniform(dr.ray_noise[0], dr.ray_noise[1]);
    d = clamp(d, min_range, max_range);
  }
}

/// FIFO of the last N_hist (a_uni, o_prio_uni) frames, zero-initialized.
class HistoryBuffer {
 public:
  HistoryBuffer() { reset(); }

  void reset() {
    frames_.assign(kHistoryFrames,
                   std::vector<double>(kHistoryFrameDim, 0.0));
  }

  void push(const std::array<double, kUnifiedActionDim>& a_uni,
            const std::vector<double>& o_prio_uni) {
    if (o_prio_uni.size() != kUnifiedProprioDim)
      throw std::invalid_argument("history frame proprio must be 30-D");
    std::vector<double> frame;
    frame.reserve(kHistoryFrameDim);
    frame.insert(frame.end(), a_uni.begin(), a_uni.end());
    frame.insert(frame.end(), o_prio_uni.begin(), o_prio_uni.end());
    frames_.pop_front();
    frames_.push_back(std::move(frame));
  }

  /// Oldest-first concatenation, N_hist * 44 values.
  void append_to(std::vector<double>& out) const {
    for (const auto& f : frames_) out.insert(out.end(), f.begin(), f.end());
  }

  const std::deque<std::vector<double>>& frames() const { return frames_; }

 private:
  std::deque<std::vector<double>> frames_;
};

/// Unified observation: [l_g, o_s, o_prio_uni, o_hist, o_ray], 382 values.
struct UnifiedObservation {
  std::vector<double> values;
};

/// Builds the unified observation from the current episode state. The raw
/// scan comes from the embodiment's own sensor and is resampled to the
/// unified 128-ray format.
inline UnifiedObservation build_unified_obs(Episode& ep,
                                            const ProprioSample& p,
                                            const HistoryBuffer& history,
                                            const ObsScales& sc,
                                            const DomainRandConfig& dr) {
  UnifiedObservation obs;
  std::vector<double>& v = obs.values;
  v.reserve(kUnifiedObsDim);

  const Vec2 lg = ep.goal_in_base();
  v.push_back(lg.x * sc.goal);
  v.push_back(lg.y * sc.goal);
  v.push_back(ep.spec.base_length * sc.base_size);
  v.push_back(ep.spec.base_width * sc.base_size);

  const std::vector<double> prio_uni =
      pad_proprio(native_proprio(ep.spec.family, p, sc));
  v.insert(v.end(), prio_uni.begin(), prio_uni.end());

  history.append_to(v);

  RayScan raw = raycast(ep.state.position, ep.state.yaw, ep.world,
                        ep.spec.sensor_fov, ep.spec.sensor_rays, kRayMin,
                        kRayMax);
  if (ep.rand.noise_enabled) add_ray_noise(raw.distances, ep.rng, dr);
  std::vector<double> rays = unify_rays(raw.distances, raw.fov);
  for (double d : rays) v.push_back(d * sc.ray);
  return obs;
}

/// The unified proprioception slice used when pushing history frames;
/// identical values to what build_unified_obs embeds.
inline std::vector<double> unified_proprio(const Episode& ep,
                                           const ProprioSample& p,
                                           const ObsScales& sc) {
  return pad_proprio(native_proprio(ep.spec.family, p, sc));
}

}  // namespace crossnav
