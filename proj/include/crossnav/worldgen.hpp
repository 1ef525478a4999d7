/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossnav/core.hpp"
#include "crossnav/rng.hpp"

namespace crossnav {

enum class ObstacleKind { box, pyramid, cylinder };

inline std::string to_string(ObstacleKind k) {
  switch (k) {
    case ObstacleKind::box: return "box";
    case ObstacleKind::pyramid: return "pyramid";
    case ObstacleKind::cylinder: return "cylinder";
  }
  throw std::invalid_argument("unknown obstacle kind");
}

inline ObstacleKind obstacle_kind_from_string(const std::string& s) {
  if (s == "box") return ObstacleKind::box;
  if (s == "pyramid") return ObstacleKind::pyramid;
  if (s == "cylinder") return ObstacleKind::cylinder;
  throw std::invalid_argument("unknown obstacle kind: " + s);
}

/// One obstacle primitive. Boxes and pyramids use half_x/half_y as footprint
/// half-extents with a yaw; cylinders use half_x as radius (half_y ignored).
struct Obstacle {
  ObstacleKind kind = ObstacleKind::box;
  Vec2 center;
  double half_x = 0.0;
  double half_y = 0.0;
  double yaw = 0.0;
  double height = 0.0;

  bool valid() const { return half_x > 0.0 && (kind == ObstacleKind::cylinder || half_y > 0.0) && height > 0.0; }

  /// Point containment test on the 2D footprint (closed set).
  bool contains(const Vec2& p) const {
    if (kind == ObstacleKind::cylinder) {
      return (p - center).squared_norm() <= half_x * half_x;
    }
    const Vec2 local = rotate(p - center, -yaw);
    return std::abs(local.x) <= half_x && std::abs(local.y) <= half_y;
  }

  /// Euclidean distance from a point to the footprint boundary (0 inside).
  double distance(const Vec2& p) const {
    if (kind == ObstacleKind::cylinder) {
      const double d = (p - center).norm() - half_x;
      return d > 0.0 ? d : 0.0;
    }
    const Vec2 local = rotate(p - center, -yaw);
    const double dx = std::max(std::abs(local.x) - half_x, 0.0);
    const double dy = std::max(std::abs(local.y) - half_y, 0.0);
    return std::sqrt(dx * dx + dy * dy);
  }

  /// Extra height the obstacle adds at a point (0 outside the footprint).
  /// Pyramids taper linearly from the base edge to the apex.
  double height_at(const Vec2& p) const {
    if (!contains(p)) return 0.0;
    if (kind == ObstacleKind::pyramid) {
      const Vec2 local = rotate(p - center, -yaw);
      const double fx = std::abs(local.x) / half_x;
      const double fy = std::abs(local.y) / half_y;
      return height * (1.0 - std::max(fx, fy));
    }
    return height;
  }
};

/// Regular-grid terrain heightfield covering [0,size_x] x [0,size_y].
struct Heightfield {
  int nx = 0;
  int ny = 0;
  double resolution = 0.1;
  std::vector<double> values;  // row-major, values[iy*nx+ix]

  double at_cell(int ix, int iy) const {
    return values[static_cast<size_t>(iy) * static_cast<size_t>(nx) +
                  static_cast<size_t>(ix)];
  }

  /// Bilinear height; 0 outside the grid.
  double sample(const Vec2& p) const {
    if (nx == 0 || ny == 0) return 0.0;
    const double gx = p.x / resolution;
    const double gy = p.y / resolution;
    if (gx < 0.0 || gy < 0.0 || gx > nx - 1 || gy > ny - 1) return 0.0;
    int ix = std::min(static_cast<int>(gx), nx - 2);
    int iy = std::min(static_cast<int>(gy), ny - 2);
    if (nx == 1) ix = 0;
    if (ny == 1) iy = 0;
    const double fx = gx - ix;
    const double fy = gy - iy;
    const double h00 = at_cell(ix, iy);
    const double h10 = at_cell(std::min(ix + 1, nx - 1), iy);
    const double h01 = at_cell(ix, std::min(iy + 1, ny - 1));
    const double h11 = at_cell(std::min(ix + 1, nx - 1), std::min(iy + 1, ny - 1));
    return h00 * (1 - fx) * (1 - fy) + h10 * fx * (1 - fy) +
           h01 * (1 - fx) * fy + h11 * fx * fy;
  }

  /// Central-difference terrain gradient (d h / d x, d h / d y).
  Vec2 gradient(const Vec2& p) const {
    const double eps = resolution;
    const double hx1 = sample({p.x + eps, p.y});
    const double hx0 = sample({p.x - eps, p.y});
    const double hy1 = sample({p.x, p.y + eps});
    const double hy0 = sample({p.x, p.y - eps});
    return {(hx1 - hx0) / (2 * eps), (hy1 - hy0) / (2 * eps)};
  }
};

/// One generated subfield: obstacles, terrain and a start/goal pair.
struct WorldInstance {
  int row = 0;
  int col = 0;
  Vec2 size{10.0, 10.0};
  std::vector<Obstacle> obstacles;
  Heightfield heightfield;
  int difficulty = 0;
  Vec2 start;
  Vec2 goal;
  uint64_t seed = 0;

  bool inside(const Vec2& p, double margin = 0.0) const {
    return p.x >= margin && p.y >= margin && p.x <= size.x - margin &&
           p.y <= size.y - margin;
  }

  /// Terrain plus obstacle surface height at a point.
  double surface_height(const Vec2& p) const {
    double h = heightfield.sample(p);
    for (const auto& ob : obstacles) h += ob.height_at(p);
    return h;
  }

  double obstacle_clearance(const Vec2& p) const {
    double d = 1e30;
    for (const auto& ob : obstacles) d = std::min(d, ob.distance(p));
    return d;
  }
};

/// Per-robot curriculum state; thresholds from the hyperparameter table.
struct CurriculumState {
  int level = 0;
  double sigma_close = 0.5;
  double sigma_far = 3.0;
};

struct WorldConfig {
  int grid_rows = 4;
  int grid_cols = 8;
  double subfield_size = 10.0;
  int max_level = 8;
  double sigma_close = 0.5;
  double sigma_far = 3.0;
  double roughness_max = 0.08;
  double heightfield_resolution = 0.1;
  double roughness_lattice = 0.8;  // value-noise lattice spacing
  double obstacle_count_min = 2.0;  // per subfield at level 0
  double obstacle_count_max = 12.0; // per subfield at max level
  double obstacle_size_min = 0.3;   // characteristic size at level 0
  double obstacle_size_max = 1.0;   // characteristic size at max level
  double obstacle_height_min = 0.3;
  double obstacle_height_max = 1.5;
  double spawn_margin = 0.5;
  double spawn_clear_radius = 1.2;
  double min_start_goal_separation = 4.0;
  int max_spawn_attempts = 1000;

  template <class V>
  void fields(V&& v) {
    v("grid_rows", grid_rows);
    v("grid_cols", grid_cols);
    v("subfield_size", subfield_size);
    v("max_level", max_level);
    v("sigma_close", sigma_close);
    v("sigma_far", sigma_far);
    v("roughness_max", roughness_max);
    v("heightfield_resolution", heightfield_resolution);
    v("roughness_lattice", roughness_lattice);
    v("obstacle_count_min", obstacle_count_min);
    v("obstacle_count_max", obstacle_count_max);
    v("obstacle_size_min", obstacle_size_min);
    v("obstacle_size_max", obstacle_size_max);
    v("obstacle_height_min", obstacle_height_min);
    v("obstacle_height_max", obstacle_height_max);
    v("spawn_margin", spawn_margin);
    v("spawn_clear_radius", spawn_clear_radius);
    v("min_start_goal_separation", min_start_goal_separation);
    v("max_spawn_attempts", max_spawn_attempts);
  }
};

/// Promotion/demotion rule on end-of-episode goal distance. Total function;
/// the result is clamped to [0, max_level].
inline CurriculumState curriculum_update(double d_goal, CurriculumState state,
                                         int max_level) {
  if (d_goal < state.sigma_close) {
    state.level += 1;
  } else if (d_goal > state.sigma_far) {
    state.level -= 1;
  }
  state.level = std::clamp(state.level, 0, max_level);
  return state;
}

namespace detail {

/// Smoothstep-interpolated value noise on a coarse lattice, in [0, amplitude].
inline Heightfield make_roughness(double size_x, double size_y,
                                  double resolution, double lattice,
                                  double amplitude, Rng& rng) {
  Heightfield hf;
  hf.resolution = resolution;
  hf.nx = static_cast<int>(std::round(size_x / resolution)) + 1;
  hf.ny = static_cast<int>(std::round(size_y / resolution)) + 1;
  hf.values.assign(static_cast<size_t>(hf.nx) * static_cast<size_t>(hf.ny), 0.0);
  if (amplitude <= 0.0) return hf;

  const int lx = static_cast<int>(std::ceil(size_x / lattice)) + 1;
  const int ly = static_cast<int>(std::ceil(size_y / lattice)) + 1;
  std::vector<double> lattice_vals(static_cast<size_t>(lx) * static_cast<size_t>(ly));
  for (auto& v : lattice_vals) v = rng.uniform(0.0, amplitude);

  auto lattice_at = [&](int i, int j) {
    i = std::clamp(i, 0, lx - 1);
    j = std::clamp(j, 0, ly - 1);
    return lattice_vals[static_cast<size_t>(j) * static_cast<size_t>(lx) +
                        static_cast<size_t>(i)];
  };
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };

  for (int iy = 0; iy < hf.ny; ++iy) {
    for (int ix = 0; ix < hf.nx; ++ix) {
      const double x = ix * resolution / lattice;
      const double y = iy * resolution / lattice;
      const int i0 = static_cast<int>(x);
      const int j0 = static_cast<int>(y);
      const double tx = smooth(x - i0);
      const double ty = smooth(y - j0);
      const double v =
          lattice_at(i0, j0) * (1 - tx) * (1 - ty) +
          lattice_at(i0 + 1, j0) * tx * (1 - ty) +
          lattice_at(i0, j0 + 1) * (1 - tx) * ty +
          lattice_at(i0 + 1, j0 + 1) * tx * ty;
      hf.values[static_cast<size_t>(iy) * static_cast<size_t>(hf.nx) +
                static_cast<size_t>(ix)] = v;
    }
  }
  return hf;
}

}  // namespace detail

/// Linear per-level schedule helpers (level 0 .. max_level).
inline double level_fraction(int level, int max_level) {
  return max_level > 0 ? static_cast<double>(level) / max_level : 0.0;
}

inline int obstacle_count_for_level(const WorldConfig& cfg, int level) {
  const double f = level_fraction(level, cfg.max_level);
  return static_cast<int>(std::round(cfg.obstacle_count_min +
                                     f * (cfg.obstacle_count_max - cfg.obstacle_count_min)));
}

inline double obstacle_size_for_level(const WorldConfig& cfg, int level) {
  const double f = level_fraction(level, cfg.max_level);
  return cfg.obstacle_size_min + f * (cfg.obstacle_size_max - cfg.obstacle_size_min);
}

inline double roughness_for_level(const WorldConfig& cfg, int level) {
  return level_fraction(level, cfg.max_level) * cfg.roughness_max;
}

/// Generates one subfield at the given difficulty. Obstacles keep a clear
/// disc around the start and goal spawn points. `flat` suppresses terrain
/// roughness (wheeled robots train and evaluate on flat ground).
inline WorldInstance generate_subfield(ObstacleKind kind, int difficulty,
                                       Vec2 extent, Rng rng,
                                       const WorldConfig& cfg = WorldConfig{},
                                       bool flat = false) {
  if (extent.x <= 0.0 || extent.y <= 0.0)
    throw std::invalid_argument("subfield extent must be positive");
  if (difficulty < 0 || difficulty > cfg.max_level)
    throw std::invalid_argument("difficulty out of range");

  WorldInstance world;
  world.size = extent;
  world.difficulty = difficulty;
  world.seed = rng.seed();

  const double amplitude = flat ? 0.0 : roughness_for_level(cfg, difficulty);
  world.heightfield = detail::make_roughness(
      extent.x, extent.y, cfg.heightfield_resolution, cfg.roughness_lattice,
      amplitude, rng);

  // start/goal first so the obstacle keep-out discs are known
  const double m = cfg.spawn_margin;
  if (extent.x <= 2 * m || extent.y <= 2 * m)
    throw std::invalid_argument("subfield too small for spawn margin");
  bool placed = false;
  for (int attempt = 0; attempt < cfg.max_spawn_attempts; ++attempt) {
    Vec2 s{rng.uniform(m, extent.x - m), rng.uniform(m, extent.y - m)};
    Vec2 g{rng.uniform(m, extent.x - m), rng.uniform(m, extent.y - m)};
    if ((g - s).norm() < cfg.min_start_goal_separation) continue;
    world.start = s;
    world.goal = g;
    placed = true;
    break;
  }
  if (!placed)
    throw std::runtime_error("could not place start/goal in subfield");

  const int count = obstacle_count_for_level(cfg, difficulty);
  const double char_size = obstacle_size_for_level(cfg, difficulty);
  int tries = 0;
  while (static_cast<int>(world.obstacles.size()) < count &&
         tries < cfg.max_spawn_attempts) {
    ++tries;
    Obstacle ob;
    ob.kind = kind;
    ob.center = {rng.uniform(0.5, extent.x - 0.5), rng.uniform(0.5, extent.y - 0.5)};
    const double s0 = char_size * rng.uniform(0.6, 1.4);
    if (kind == ObstacleKind::cylinder) {
      ob.half_x = 0.5 * s0;
      ob.half_y = 0.5 * s0;
      ob.yaw = 0.0;
    } else {
      ob.half_x = 0.5 * s0;
      ob.half_y = 0.5 * char_size * rng.uniform(0.6, 1.4);
      ob.yaw = rng.uniform(0.0, kPi / 2.0);
    }
    ob.height = rng.uniform(cfg.obstacle_height_min, cfg.obstacle_height_max);
    const double reach = std::sqrt(ob.half_x * ob.half_x + ob.half_y * ob.half_y);
    if ((ob.center - world.start).norm() < cfg.spawn_clear_radius + reach) continue;
    if ((ob.center - world.goal).norm() < cfg.spawn_clear_radius + reach) continue;
    world.obstacles.push_back(ob);
  }
  return world;
}

/// Draws a fresh collision-free start/goal pair for an existing world.
/// Fails after max_spawn_attempts on over-dense worlds.
inline std::pair<Vec2, Vec2> sample_start_goal(const WorldInstance& world,
                                               Rng& rng,
                                               const WorldConfig& cfg = WorldConfig{},
                                               double margin = -1.0) {
  if (margin < 0.0) margin = cfg.spawn_margin;
  auto free_point = [&](Vec2& out) {
    for (int attempt = 0; attempt < cfg.max_spawn_attempts; ++attempt) {
      Vec2 p{rng.uniform(margin, world.size.x - margin),
             rng.uniform(margin, world.size.y - margin)};
      if (world.obstacle_clearance(p) < margin) continue;
      out = p;
      return true;
    }
    return false;
  };
  for (int attempt = 0; attempt < cfg.max_spawn_attempts; ++attempt) {
    Vec2 s, g;
    if (!free_point(s) || !free_point(g))
      throw std::runtime_error("start/goal placement failed: world too dense");
    if ((g - s).norm() < cfg.min_start_goal_separation) continue;
    return {s, g};
  }
  throw std::runtime_error("start/goal placement failed: separation unreachable");
}

// ---- serialization (versioned structured text) ----

inline nlohmann::json world_to_json(const WorldInstance& w) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& ob : w.obstacles) {
    obstacles.push_back({{"kind", to_string(ob.kind)},
                         {"center", {ob.center.x, ob.center.y}},
                         {"half_x", ob.half_x},
                         {"half_y", ob.half_y},
                         {"yaw", ob.yaw},
                         {"height", ob.height}});
  }
  return nlohmann::json{
      {"format", "crossnav-world"},
      {"version", 1},
      {"row", w.row},
      {"col", w.col},
      {"size", {w.size.x, w.size.y}},
      {"difficulty", w.difficulty},
      {"start", {w.start.x, w.start.y}},
      {"goal", {w.goal.x, w.goal.y}},
      {"seed", w.seed},
      {"obstacles", obstacles},
      {"heightfield",
       {{"nx", w.heightfield.nx},
        {"ny", w.heightfield.ny},
        {"resolution", w.heightfield.resolution},
        {"values", w.heightfield.values}}}};
}

inline WorldInstance world_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "crossnav-world")
    throw std::runtime_error("not a crossnav world file");
  if (j.value("version", 0) != 1)
    throw std::runtime_error("unsupported world format version");
  WorldInstance w;
  w.row = j.at("row").get<int>();
  w.col = j.at("col").get<int>();
  w.size = {j.at("size")[0].get<double>(), j.at("size")[1].get<double>()};
  w.difficulty = j.at("difficulty").get<int>();
  w.start = {j.at("start")[0].get<double>(), j.at("start")[1].get<double>()};
  w.goal = {j.at("goal")[0].get<double>(), j.at("goal")[1].get<double>()};
  w.seed = j.at("seed").get<uint64_t>();
  for (const auto& jo : j.at("obstacles")) {
    Obstacle ob;
    ob.kind = obstacle_kind_from_string(jo.at("kind").get<std::string>());
    ob.center = {jo.at("center")[0].get<double>(), jo.at("center")[1].get<double>()};
    ob.half_x = jo.at("half_x").get<double>();
    ob.half_y = jo.at("half_y").get<double>();
    ob.yaw = jo.at("yaw").get<double>();
    ob.height = jo.at("height").get<double>();
    w.obstacles.push_back(ob);
  }
  const auto& jh = j.at("heightfield");
  w.heightfield.nx = jh.at("nx").get<int>();
  w.heightfield.ny = jh.at("ny").get<int>();
  w.heightfield.resolution = jh.at("resolution").get<double>();
  w.heightfield.values = jh.at("values").get<std::vector<double>>();
  return w;
}

}  // namespace crossnav
