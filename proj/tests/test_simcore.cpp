/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#include "catch_amalgamated.hpp"
#include "crossnav/simcore.hpp"

using namespace crossnav;

namespace {

WorldInstance empty_world() {
  WorldInstance w;
  w.size = {10, 10};
  w.start = {2, 5};
  w.goal = {8, 5};
  return w;
}

EmbodimentSpec small_quad(const EmbodimentConfig& cfg) {
  EmbodimentSpec s;
  s.family = Family::small_articulated;
  s.base_length = 0.4;
  s.base_width = 0.3;
  s.base_mass = 10.0;
  s.thigh_length = 0.3;
  s.thigh_mass = 1.0;
  s.calf_length = 0.25;
  s.calf_mass = 0.25;
  s.kp_scale = 1.0;
  s.kd_scale = 1.0;
  auto [kp, kd] = compute_pd_gains(s, cfg.robot_template);
  s.kp = kp;
  s.kd = kd;
  s.tau_max = cfg.tau_max_small;
  return s;
}

}  // namespace

TEST_CASE("raycast in an empty world reads max range everywhere") {
  auto w = empty_world();
  auto scan = raycast({5, 5}, 0.3, w, kPi / 2, 128, 0.2, 8.0);
  REQUIRE(scan.distances.size() == 128);
  for (double d : scan.distances) CHECK(d == 8.0);
}

TEST_CASE("raycast against a wall matches the analytic distance") {
  WorldInstance w;
  w.size = {20, 20};
  Obstacle wall;
  wall.kind = ObstacleKind::box;
  wall.center = {11.0, 10.0};
  wall.half_x = 0.5;
  wall.half_y = 8.0;
  wall.height = 1.0;
  w.obstacles.push_back(wall);

  // heading +x from (9.5, 10): front face at x = 10.5, one meter ahead
  auto scan = raycast({9.5, 10.0}, 0.0, w, kPi / 2, 31, 0.2, 8.0);
  CHECK(scan.distances[15] == Catch::Approx(1.0).epsilon(1e-12));
  // oblique rays: distance = 1 / cos(angle)
  for (int i = 0; i < 31; ++i) {
    const double angle = (kPi / 2) * (i / 30.0 - 0.5);
    const double expect = 1.0 / std::cos(angle);
    CHECK(scan.distances[static_cast<size_t>(i)] ==
          Catch::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("raycast clamps to the minimum range") {
  WorldInstance w;
  w.size = {10, 10};
  Obstacle ob;
  ob.kind = ObstacleKind::cylinder;
  ob.center = {5.15, 5.0};
  ob.half_x = 0.05;
  ob.height = 1.0;
  w.obstacles.push_back(ob);
  auto scan = raycast({5, 5}, 0.0, w, kPi / 2, 3, 0.2, 8.0);
  CHECK(scan.distances[1] == 0.2);
  for (double d : scan.distances) {
    CHECK(d >= 0.2);
    CHECK(d <= 8.0);
  }
}

TEST_CASE("raycast rejects bad arguments") {
  auto w = empty_world();
  CHECK_THROWS(raycast({5, 5}, 0.0, w, kPi / 2, 1, 0.2, 8.0));
  CHECK_THROWS(raycast({5, 5}, 0.0, w, kPi / 2, 8, 8.0, 0.2));
}

TEST_CASE("mirroring the world about the x-axis reverses the scan") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    WorldInstance w;
    w.size = {10, 10};
    for (int i = 0; i < 6; ++i) {
      Obstacle ob;
      ob.kind = static_cast<ObstacleKind>(rng.uniform_int(3));
      ob.center = {rng.uniform(0, 10), rng.uniform(-5, 5)};
      ob.half_x = rng.uniform(0.2, 0.8);
      ob.half_y = rng.uniform(0.2, 0.8);
      ob.yaw = rng.uniform(0, kPi);
      ob.height = 1.0;
      w.obstacles.push_back(ob);
    }
    WorldInstance m = w;
    for (auto& ob : m.obstacles) {
      ob.center.y = -ob.center.y;
      ob.yaw = -ob.yaw;
    }
    const double heading = rng.uniform(-kPi, kPi);
    auto scan = raycast({5, 0}, heading, w, kPi / 2, 64, 0.2, 8.0);
    auto mirrored = raycast({5, 0}, -heading, m, kPi / 2, 64, 0.2, 8.0);
    for (int i = 0; i < 64; ++i) {
      CHECK(scan.distances[static_cast<size_t>(i)] ==
            Catch::Approx(mirrored.distances[static_cast<size_t>(63 - i)])
                .margin(1e-9));
    }
  }
}

TEST_CASE("collision detection: disjoint, containment, tangency") {
  EmbodimentSpec spec;
  spec.family = Family::wheeled;
  spec.base_length = 1.0;
  spec.base_width = 1.0;

  WorldInstance w;
  w.size = {10, 10};
  Obstacle box;
  box.kind = ObstacleKind::box;
  box.center = {5, 5};
  box.half_x = 0.5;
  box.half_y = 0.5;
  box.height = 1.0;
  w.obstacles.push_back(box);

  CHECK_FALSE(check_collision({1, 1}, 0.3, spec, w));
  CHECK(check_collision({5, 5}, 0.0, spec, w));
  // exact edge contact: robot right edge at x=4.5, box left edge at x=4.5
  CHECK(check_collision({4.0, 5.0}, 0.0, spec, w));
  CHECK_FALSE(check_collision({3.99, 5.0}, 0.0, spec, w));

  Obstacle cyl;
  cyl.kind = ObstacleKind::cylinder;
  cyl.center = {8, 8};
  cyl.half_x = 0.5;
  cyl.height = 1.0;
  w.obstacles.push_back(cyl);
  CHECK(check_collision({7.0, 8.0}, 0.0, spec, w));   // tangent
  CHECK_FALSE(check_collision({6.9, 8.0}, 0.0, spec, w));
}

TEST_CASE("pushes only perturb articulated robots, within the table range") {
  DomainRandConfig dr;
  Rng rng(4);
  RobotState wheeled_state;
  apply_push(wheeled_state, Family::wheeled, rng, dr);
  CHECK(wheeled_state.push_vx == 0.0);
  CHECK(wheeled_state.push_vy == 0.0);

  for (int i = 0; i < 200; ++i) {
    RobotState s;
    apply_push(s, Family::small_articulated, rng, dr);
    CHECK(s.push_vx >= dr.push_velocity[0]);
    CHECK(s.push_vx <= dr.push_velocity[1]);
    CHECK(s.push_vy >= dr.push_velocity[0]);
    CHECK(s.push_vy <= dr.push_velocity[1]);
  }
}

TEST_CASE("push schedule intervals stay within the table range") {
  EmbodimentConfig cfg;
  auto w = empty_world();
  auto spec = small_quad(cfg);
  EpisodeRandomization er;
  er.push_enabled = true;
  auto ep = make_episode(w, spec, er, Rng(12), 3000, 0.02, cfg);
  CHECK(ep.next_push_time >= 4.0);
  CHECK(ep.next_push_time <= 8.0);

  // step through a long episode and collect events via the residual velocity
  double prev_time = 0.0;
  double last_push = ep.next_push_time;
  std::array<double, kNumJoints> hold{};
  int events = 0;
  while (ep.status == EpisodeStatus::running && ep.t < 2999) {
    const double before = ep.next_push_time;
    step_episode(ep, hold.data(), cfg);
    if (ep.next_push_time != before) {
      const double interval = ep.next_push_time - before;
      CHECK(interval >= 4.0);
      CHECK(interval <= 8.0);
      (void)prev_time;
      (void)last_push;
      events += 1;
    }
  }
  CHECK(events >= 5);
}

TEST_CASE("height scan covers the window and sees obstacles") {
  EmbodimentConfig cfg;
  auto w = empty_world();
  auto flat = height_scan({5, 5}, 0.7, w, 2.5, 2.5, 0.25);
  REQUIRE(flat.size() == 121);
  for (double h : flat) CHECK(h == 0.0);

  Obstacle box;
  box.kind = ObstacleKind::box;
  box.center = {5.6, 5.0};
  box.half_x = 0.3;
  box.half_y = 0.3;
  box.height = 0.9;
  w.obstacles.push_back(box);
  auto scan = height_scan({5, 5}, 0.0, w, 2.5, 2.5, 0.25);
  double mx = 0.0;
  for (double h : scan) mx = std::max(mx, h);
  CHECK(mx == Catch::Approx(0.9));

  CHECK_THROWS(height_scan({5, 5}, 0.0, w, 2.5, 2.5, 0.0));
}

TEST_CASE("episode lifecycle: timeout, collision, terminal step error") {
  EmbodimentConfig cfg;
  EmbodimentSpec spec;
  spec.family = Family::wheeled;
  spec.base_length = 0.4;
  spec.base_width = 0.3;
  spec.base_mass = 10.0;
  EpisodeRandomization er;

  auto ep = make_episode(empty_world(), spec, er, Rng(5), 50, 0.02, cfg);
  const double zero[2] = {0, 0};
  while (ep.status == EpisodeStatus::running) step_episode(ep, zero, cfg);
  CHECK(ep.status == EpisodeStatus::timeout);
  CHECK(ep.t == 50);
  CHECK((ep.state.position - ep.world.start).norm() < 1e-9);
  CHECK_THROWS(step_episode(ep, zero, cfg));

  // drive into a wall
  WorldInstance w = empty_world();
  Obstacle box;
  box.kind = ObstacleKind::box;
  box.center = {4.0, 5.0};
  box.half_x = 0.5;
  box.half_y = 2.0;
  box.height = 1.0;
  w.obstacles.push_back(box);
  auto ep2 = make_episode(w, spec, er, Rng(5), 4000, 0.02, cfg);
  ep2.state.yaw = 0.0;  // facing the wall from (2,5)
  const double fwd[2] = {1.0, 0.0};
  while (ep2.status == EpisodeStatus::running) step_episode(ep2, fwd, cfg);
  CHECK(ep2.status == EpisodeStatus::collided);
  CHECK(ep2.state.position.x > 2.0);
}

TEST_CASE("episode traces are deterministic given the seed") {
  EmbodimentConfig cfg;
  auto spec = small_quad(cfg);
  EpisodeRandomization er;
  er.push_enabled = true;
  er.noise_enabled = true;

  auto run = [&] {
    auto ep = make_episode(empty_world(), spec, er, Rng(123), 200, 0.02, cfg);
    std::vector<double> trace;
    std::array<double, kNumJoints> act{};
    Rng arng(55);
    while (ep.status == EpisodeStatus::running) {
      for (auto& a : act) a = arng.uniform(-1, 1);
      step_episode(ep, act.data(), cfg);
      trace.push_back(ep.state.position.x);
      trace.push_back(ep.state.position.y);
      trace.push_back(ep.state.q[3]);
    }
    return trace;
  };
  auto t1 = run();
  auto t2 = run();
  REQUIRE(t1.size() == t2.size());
  for (size_t i = 0; i < t1.size(); ++i) REQUIRE(t1[i] == t2[i]);
}
