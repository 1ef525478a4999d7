/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#include "catch_amalgamated.hpp"
#include "crossnav/evalharness.hpp"
#include "oracles.hpp"

using namespace crossnav;

namespace {

WorldInstance empty_world(double size = 10.0) {
  WorldInstance w;
  w.size = {size, size};
  w.start = {2, 5};
  w.goal = {8, 5};
  return w;
}

}  // namespace

TEST_CASE("shortest path: free space, identical endpoints, wall with gap") {
  auto w = empty_world();
  auto sp = shortest_path_length(w, {2, 5}, {8, 5}, 0.2);
  CHECK(sp.reachable);
  CHECK(sp.length == Catch::Approx(6.0).margin(1e-9));

  CHECK(shortest_path_length(w, {3, 3}, {3, 3}, 0.2).length == 0.0);

  // wall across the middle with a gap near the top
  Obstacle wall;
  wall.kind = ObstacleKind::box;
  wall.center = {5.0, 4.0};
  wall.half_x = 0.2;
  wall.half_y = 4.0;
  wall.height = 1.0;
  w.obstacles.push_back(wall);
  auto around = shortest_path_length(w, {2, 5}, {8, 5}, 0.2);
  CHECK(around.reachable);
  CHECK(around.length > 6.0);  // detours through the gap
  CHECK(around.length < 14.0);

  // sealed corridor: unreachable flags and falls back to the straight line
  Obstacle cap = wall;
  cap.center = {5.0, 9.0};
  cap.half_y = 1.2;
  w.obstacles.push_back(cap);
  auto blocked = shortest_path_length(w, {2, 5}, {8, 5}, 0.2);
  CHECK_FALSE(blocked.reachable);
  CHECK(blocked.length == Catch::Approx(6.0));
}

TEST_CASE("grid A* cost matches the Dijkstra oracle exactly") {
  Rng rng(71);
  int compared = 0;
  for (int trial = 0; trial < 40; ++trial) {
    WorldConfig wcfg;
    const int level = static_cast<int>(rng.uniform_int(5));
    auto w = generate_subfield(static_cast<ObstacleKind>(rng.uniform_int(3)),
                               level, {8, 8}, Rng(rng.next_u64()), wcfg);
    OccupancyGrid g = build_occupancy(w, 0.1, 0.25);
    const int sx = g.cell_x(w.start.x), sy = g.cell_y(w.start.y);
    const int gx = g.cell_x(w.goal.x), gy = g.cell_y(w.goal.y);
    auto astar = astar_grid(g, sx, sy, gx, gy);
    const int64_t oracle =
        oracles::dijkstra_grid(g.blocked, g.nx, g.ny, sx, sy, gx, gy);
    if (!astar.reachable) {
      CHECK(oracle == -1);
      continue;
    }
    REQUIRE(astar.cost == oracle);
    compared += 1;
  }
  CHECK(compared > 20);
}

TEST_CASE("spl: unit terms, failures, doubled path, permutation invariance") {
  TrialResult perfect;
  perfect.success = true;
  perfect.path_length = 5.0;
  perfect.shortest_path = 5.0;
  TrialResult failed;
  failed.success = false;
  failed.path_length = 1.0;
  failed.shortest_path = 5.0;
  TrialResult doubled;
  doubled.success = true;
  doubled.path_length = 10.0;
  doubled.shortest_path = 5.0;

  CHECK(spl({perfect}) == Catch::Approx(1.0));
  CHECK(spl({failed}) == 0.0);
  CHECK(spl({doubled}) == Catch::Approx(0.5));
  CHECK(spl({perfect, failed, doubled}) == Catch::Approx((1.0 + 0.0 + 0.5) / 3));
  CHECK(spl({doubled, perfect, failed}) == Catch::Approx((1.0 + 0.0 + 0.5) / 3));
  CHECK_THROWS(spl({}));

  // SPL never exceeds SR
  Rng rng(9);
  std::vector<TrialResult> batch;
  for (int i = 0; i < 200; ++i) {
    TrialResult r;
    r.success = rng.uniform() < 0.6;
    r.shortest_path = rng.uniform(1.0, 10.0);
    r.path_length = r.shortest_path * rng.uniform(0.9, 3.0);
    batch.push_back(r);
  }
  CHECK(spl(batch) <= success_rate(batch) + 1e-12);
}

namespace {

/// Upper-bound probe: jumps straight onto the goal.
class TeleportAgent : public TrialAgent {
 public:
  std::vector<double> act(Episode& ep) override {
    ep.state.position = ep.world.goal;
    ep.state.vx = 0.0;
    ep.state.omega = 0.0;
    return {0.0, 0.0};
  }
};

class ZeroAgent : public TrialAgent {
 public:
  std::vector<double> act(Episode& ep) override {
    return std::vector<double>(
        static_cast<size_t>(native_action_dim(ep.spec.family)), 0.0);
  }
};

}  // namespace

TEST_CASE("trial runner: oracle and frozen policies bound SR and SPL") {
  PipelineConfig cfg;
  cfg.eval.n_trials = 12;
  cfg.eval.horizon_steps = 40;
  ThreadPool pool(2);

  auto teleport = run_trials([] { return std::make_unique<TeleportAgent>(); },
                             Family::wheeled, cfg, 12, 31, pool);
  CHECK(teleport.sr == 1.0);
  CHECK(teleport.spl_value == Catch::Approx(1.0));
  for (const auto& r : teleport.results) CHECK(r.status == EpisodeStatus::reached);

  auto zero = run_trials([] { return std::make_unique<ZeroAgent>(); },
                         Family::wheeled, cfg, 12, 31, pool);
  CHECK(zero.sr == 0.0);
  CHECK(zero.spl_value == 0.0);

  // SPL <= SR on every report
  CHECK(teleport.spl_value <= teleport.sr + 1e-12);
  CHECK(zero.spl_value <= zero.sr + 1e-12);
}

TEST_CASE("trial reports are bit-reproducible and thread-invariant") {
  PipelineConfig cfg;
  cfg.eval.horizon_steps = 30;
  auto run = [&](int threads) {
    ThreadPool pool(threads);
    auto rep = run_trials([] { return std::make_unique<ZeroAgent>(); },
                          Family::small_articulated, cfg, 8, 5, pool);
    return trial_report_csv(rep);
  };
  const std::string a = run(1);
  const std::string b = run(2);
  REQUIRE(a == b);
  CHECK(a.find("small_articulated") != std::string::npos);
}

TEST_CASE("realized successful paths respect the shortest-path bound") {
  // straight-line driver in an empty world: p should approach l
  class StraightAgent : public TrialAgent {
   public:
    std::vector<double> act(Episode& ep) override {
      const Vec2 lg = ep.goal_in_base();
      const double bearing = std::atan2(lg.y, lg.x);
      if (ep.goal_distance() < 0.3) return {0.0, 0.0};
      return {std::abs(bearing) < 0.3 ? 1.0 : 0.0, clamp(3.0 * bearing, -2.0, 2.0)};
    }
  };
  PipelineConfig cfg;
  cfg.eval.horizon_steps = 750;
  cfg.eval.eval_levels = {0};
  ThreadPool pool(2);
  auto rep = run_trials([] { return std::make_unique<StraightAgent>(); },
                        Family::wheeled, cfg, 10, 17, pool);
  CHECK(rep.sr > 0.5);
  for (const auto& r : rep.results) {
    if (!r.success) continue;
    // discretization slack: two cells per path segment
    CHECK(r.shortest_path <= r.path_length + 0.4);
  }
}

TEST_CASE("svg plots render worlds and trajectories") {
  auto w = generate_subfield(ObstacleKind::box, 3, {10, 10}, Rng(3),
                             WorldConfig{});
  std::vector<Vec2> traj{{1, 1}, {2, 2}, {3, 2.5}};
  const std::string svg = trajectory_svg(w, traj);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}
