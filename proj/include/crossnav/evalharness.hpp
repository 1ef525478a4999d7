/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "crossnav/config.hpp"
#include "crossnav/distill.hpp"
#include "crossnav/expert_rl.hpp"
#include "crossnav/observe.hpp"
#include "crossnav/parallel.hpp"
#include "crossnav/simcore.hpp"

namespace crossnav {

// ---- occupancy grid + A* ----

struct OccupancyGrid {
  int nx = 0;
  int ny = 0;
  double resolution = 0.1;
  std::vector<uint8_t> blocked;

  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < nx && y < ny;
  }
  size_t idx(int x, int y) const {
    return static_cast<size_t>(y) * static_cast<size_t>(nx) +
           static_cast<size_t>(x);
  }
  Vec2 center(int x, int y) const {
    return {(x + 0.5) * resolution, (y + 0.5) * resolution};
  }
  int cell_x(double wx) const {
    return std::clamp(static_cast<int>(wx / resolution), 0, nx - 1);
  }
  int cell_y(double wy) const {
    return std::clamp(static_cast<int>(wy / resolution), 0, ny - 1);
  }
};

/// Obstacle-inflated occupancy grid: a cell is blocked when its center is
/// within `inflation` of any footprint.
inline OccupancyGrid build_occupancy(const WorldInstance& world,
                                     double resolution, double inflation) {
  OccupancyGrid g;
  g.resolution = resolution;
  g.nx = std::max(static_cast<int>(std::round(world.size.x / resolution)), 1);
  g.ny = std::max(static_cast<int>(std::round(world.size.y / resolution)), 1);
  g.blocked.assign(static_cast<size_t>(g.nx) * static_cast<size_t>(g.ny), 0);
  for (int y = 0; y < g.ny; ++y) {
    for (int x = 0; x < g.nx; ++x) {
      const Vec2 p = g.center(x, y);
      for (const auto& ob : world.obstacles) {
        if (ob.distance(p) <= inflation) {
          g.blocked[g.idx(x, y)] = 1;
          break;
        }
      }
    }
  }
  return g;
}

/// Integer edge costs: 5 per straight move, 7 per diagonal.
constexpr int64_t kStraightCost = 5;
constexpr int64_t kDiagonalCost = 7;

struct AStarResult {
  bool reachable = false;
  int64_t cost = -1;
  std::vector<std::pair<int, int>> path;  // start .. goal cells
};

/// 8-connected A* with an admissible octile heuristic over the integer costs.
inline AStarResult astar_grid(const OccupancyGrid& g, int sx, int sy, int gx,
                              int gy) {
  AStarResult out;
  if (!g.in_bounds(sx, sy) || !g.in_bounds(gx, gy)) return out;
  if (g.blocked[g.idx(sx, sy)] || g.blocked[g.idx(gx, gy)]) return out;

  const size_t n = g.blocked.size();
  std::vector<int64_t> dist(n, INT64_MAX);
  std::vector<int> parent(n, -1);
  auto heuristic = [&](int x, int y) {
    const int64_t dx = std::abs(x - gx), dy = std::abs(y - gy);
    const int64_t lo = std::min(dx, dy), hi = std::max(dx, dy);
    return kDiagonalCost * lo + kStraightCost * (hi - lo);
  };
  using Node = std::tuple<int64_t, int64_t, int>;  // f, g, cell
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
  const int start = static_cast<int>(g.idx(sx, sy));
  const int goal = static_cast<int>(g.idx(gx, gy));
  dist[static_cast<size_t>(start)] = 0;
  open.push({heuristic(sx, sy), 0, start});
  const int dxs[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  const int dys[8] = {0, 0, 1, -1, 1, -1, 1, -1};

  while (!open.empty()) {
    auto [f, gc, v] = open.top();
    open.pop();
    if (gc > dist[static_cast<size_t>(v)]) continue;
    if (v == goal) break;
    const int x = v % g.nx, y = v / g.nx;
    for (int k = 0; k < 8; ++k) {
      const int x2 = x + dxs[k], y2 = y + dys[k];
      if (!g.in_bounds(x2, y2)) continue;
      if (g.blocked[g.idx(x2, y2)]) continue;
      const int64_t nd = gc + (k < 4 ? kStraightCost : kDiagonalCost);
      const size_t id2 = g.idx(x2, y2);
      if (nd < dist[id2]) {
        dist[id2] = nd;
        parent[id2] = v;
        open.push({nd + heuristic(x2, y2), nd, static_cast<int>(id2)});
      }
    }
  }
  if (dist[static_cast<size_t>(goal)] == INT64_MAX) return out;
  out.reachable = true;
  out.cost = dist[static_cast<size_t>(goal)];
  int cur = goal;
  while (cur != -1) {
    out.path.push_back({cur % g.nx, cur / g.nx});
    cur = parent[static_cast<size_t>(cur)];
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

/// Collision-free straight segment test, sampled at half-resolution steps.
inline bool line_of_sight(const OccupancyGrid& g, const Vec2& a,
                          const Vec2& b) {
  const double len = (b - a).norm();
  const int steps = std::max(2, static_cast<int>(len / (g.resolution * 0.5)) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double f = static_cast<double>(i) / steps;
    const Vec2 p = a + (b - a) * f;
    const int cx = g.cell_x(p.x), cy = g.cell_y(p.y);
    if (g.blocked[g.idx(cx, cy)]) return false;
  }
  return true;
}

struct ShortestPathResult {
  double length = 0.0;
  bool reachable = true;
  int64_t grid_cost = 0;
};

/// Grid A* with Euclidean post-smoothing. When no grid path exists the
/// straight-line distance is returned with reachable = false.
inline ShortestPathResult shortest_path_length(const WorldInstance& world,
                                               const Vec2& start,
                                               const Vec2& goal,
                                               double robot_radius,
                                               double resolution = 0.1) {
  ShortestPathResult out;
  const double direct = (goal - start).norm();
  if (direct < 1e-12) {
    out.length = 0.0;
    return out;
  }
  OccupancyGrid g = build_occupancy(world, resolution, robot_radius);
  auto res = astar_grid(g, g.cell_x(start.x), g.cell_y(start.y),
                        g.cell_x(goal.x), g.cell_y(goal.y));
  if (!res.reachable) {
    out.reachable = false;
    out.length = direct;
    return out;
  }
  out.grid_cost = res.cost;

  std::vector<Vec2> points;
  points.push_back(start);
  for (const auto& [cx, cy] : res.path) points.push_back(g.center(cx, cy));
  points.push_back(goal);

  // greedy shortcutting
  std::vector<Vec2> smooth;
  size_t i = 0;
  smooth.push_back(points[0]);
  while (i + 1 < points.size()) {
    size_t j = points.size() - 1;
    for (; j > i + 1; --j)
      if (line_of_sight(g, points[i], points[j])) break;
    smooth.push_back(points[j]);
    i = j;
  }
  double length = 0.0;
  for (size_t p = 1; p < smooth.size(); ++p)
    length += (smooth[p] - smooth[p - 1]).norm();
  out.length = length;
  return out;
}

// ---- metrics ----

struct TrialResult {
  int trial = 0;
  Family family = Family::wheeled;
  uint64_t world_seed = 0;
  int level = 0;
  bool success = false;
  int steps = 0;
  double terminal_distance = 0.0;
  double path_length = 0.0;     // realized travel p_i
  double shortest_path = 0.0;   // oracle l_i
  bool path_flagged = false;    // no grid path found
  EpisodeStatus status = EpisodeStatus::timeout;
};

/// Success weighted by normalized inverse path length.
inline double spl(const std::vector<TrialResult>& results) {
  if (results.empty()) throw std::invalid_argument("spl over no trials");
  double total = 0.0;
  for (const auto& r : results) {
    if (!r.success) continue;
    total += r.shortest_path / std::max(r.path_length, r.shortest_path);
  }
  return total / static_cast<double>(results.size());
}

inline double success_rate(const std::vector<TrialResult>& results) {
  if (results.empty()) throw std::invalid_argument("sr over no trials");
  double s = 0.0;
  for (const auto& r : results) s += r.success ? 1.0 : 0.0;
  return s / static_cast<double>(results.size());
}

// ---- trial agents ----

/// A policy under trial: produces a family-native action each step.
class TrialAgent {
 public:
  virtual ~TrialAgent() = default;
  virtual void reset() {}
  virtual std::vector<double> act(Episode& ep) = 0;
};

/// Expert wrapper. The time-remaining input follows the expert's training
/// horizon and clamps at zero when a longer evaluation episode overruns it.
class ExpertAgent : public TrialAgent {
 public:
  explicit ExpertAgent(const LoadedExpert* expert) : expert_(expert) {}

  std::vector<double> act(Episode& ep) override {
    const PipelineConfig& cfg = expert_->config;
    auto p = sample_proprio(ep, cfg.embodiment.domain_rand);
    auto obs = build_expert_obs(ep, p, cfg.ppo.scan, cfg.ppo.obs_scales);
    return expert_->policy.act_mean(obs.values);
  }

 private:
  const LoadedExpert* expert_;
};

/// Distilled chunk-policy wrapper: maintains the unified observation window
/// and (for TE) the chunk history; routes unified channels to the family.
class ChunkAgent : public TrialAgent {
 public:
  ChunkAgent(const LoadedChunkPolicy* policy, InferenceMode mode, Family family)
      : policy_(policy), family_(family),
        runner_(&policy->model, mode, family, policy->config.distill.te_k) {}

  void reset() override {
    runner_.reset();
    history_.reset();
    have_pending_ = false;
  }

  std::vector<double> act(Episode& ep) override {
    const PipelineConfig& cfg = policy_->config;
    auto p = sample_proprio(ep, cfg.embodiment.domain_rand);
    if (have_pending_) history_.push(pending_action_, pending_proprio_);
    auto uni = build_unified_obs(ep, p, history_, cfg.ppo.obs_scales,
                                 cfg.embodiment.domain_rand);
    const auto a_uni = runner_.act(uni.values);

    pending_action_ = a_uni;
    pending_proprio_ = unified_proprio(ep, p, cfg.ppo.obs_scales);
    have_pending_ = true;

    const int offset = is_articulated(family_) ? 2 : 0;
    std::vector<double> native(static_cast<size_t>(native_action_dim(family_)));
    for (size_t i = 0; i < native.size(); ++i)
      native[i] = a_uni[static_cast<size_t>(offset) + i];
    return native;
  }

 private:
  const LoadedChunkPolicy* policy_;
  Family family_;
  ChunkPolicyRunner runner_;
  HistoryBuffer history_;
  std::array<double, kUnifiedActionDim> pending_action_{};
  std::vector<double> pending_proprio_;
  bool have_pending_ = false;
};

/// Behavior-cloning baseline wrapper (latest observation only).
class BcAgent : public TrialAgent {
 public:
  BcAgent(const BcPolicy* bc, const PipelineConfig* cfg, Family family)
      : bc_(bc), cfg_(cfg), family_(family) {}

  void reset() override { history_.reset(); have_pending_ = false; }

  std::vector<double> act(Episode& ep) override {
    auto p = sample_proprio(ep, cfg_->embodiment.domain_rand);
    if (have_pending_) history_.push(pending_action_, pending_proprio_);
    auto uni = build_unified_obs(ep, p, history_, cfg_->ppo.obs_scales,
                                 cfg_->embodiment.domain_rand);
    std::vector<float> x(uni.values.begin(), uni.values.end());
    std::vector<float> y(static_cast<size_t>(kUnifiedActionDim));
    bc_->mlp.forward(bc_->ps, x.data(), 1, y.data());
    std::array<double, kUnifiedActionDim> a_uni{};
    for (int i = 0; i < kUnifiedActionDim; ++i) a_uni[static_cast<size_t>(i)] = y[static_cast<size_t>(i)];
    pending_action_ = a_uni;
    pending_proprio_ = unified_proprio(ep, p, cfg_->ppo.obs_scales);
    have_pending_ = true;
    const int offset = is_articulated(family_) ? 2 : 0;
    std::vector<double> native(static_cast<size_t>(native_action_dim(family_)));
    for (size_t i = 0; i < native.size(); ++i)
      native[i] = a_uni[static_cast<size_t>(offset) + i];
    return native;
  }

 private:
  const BcPolicy* bc_;
  const PipelineConfig* cfg_;
  Family family_;
  HistoryBuffer history_;
  std::array<double, kUnifiedActionDim> pending_action_{};
  std::vector<double> pending_proprio_;
  bool have_pending_ = false;
};

// ---- trial runner ----

struct TrialReport {
  std::vector<TrialResult> results;
  double sr = 0.0;
  double spl_value = 0.0;
  Family family = Family::wheeled;
};

/// Factory so each trial gets a freshly reset agent (agents are stateful).
using AgentFactory = std::function<std::unique_ptr<TrialAgent>()>;

/// Runs n independent trials on freshly generated held-out worlds and
/// embodiments. Success is decided at the end of the trial only: terminal
/// goal distance under the success radius.
inline TrialReport run_trials(const AgentFactory& make_agent, Family family,
                              const PipelineConfig& cfg, int n_trials,
                              uint64_t seed, ThreadPool& pool) {
  TrialReport report;
  report.family = family;
  report.results.resize(static_cast<size_t>(n_trials));

  Rng master(seed);
  // pre-draw per-trial seeds so trials are independent of execution order
  std::vector<uint64_t> trial_seeds(static_cast<size_t>(n_trials));
  Rng seeder = master.child("trials");
  for (auto& s : trial_seeds) s = seeder.next_u64();

  pool.parallel_for(n_trials, [&](int i) {
    Rng trial_rng(trial_seeds[static_cast<size_t>(i)]);
    const auto& levels = cfg.eval.eval_levels;
    const int level = levels[static_cast<size_t>(i) % levels.size()];
    const ObstacleKind kind = static_cast<ObstacleKind>(trial_rng.uniform_int(3));
    const uint64_t wseed = trial_rng.next_u64();
    WorldInstance world = generate_subfield(
        kind, level, {cfg.world.subfield_size, cfg.world.subfield_size},
        Rng(wseed), cfg.world, family == Family::wheeled);
    Rng embod_rng = trial_rng.child("embodiment");
    const EmbodimentSpec spec =
        sample_embodiment(family, embod_rng, cfg.embodiment);

    EpisodeRandomization er;  // evaluation runs clean
    Episode ep = make_episode(world, spec, er, trial_rng.child("episode"),
                              cfg.eval.horizon_steps, cfg.dt, cfg.embodiment);
    ep.lambda_steps = cfg.episode_steps();

    auto agent = make_agent();
    agent->reset();
    while (ep.status == EpisodeStatus::running) {
      auto action = agent->act(ep);
      step_episode(ep, action.data(), cfg.embodiment);
    }

    TrialResult r;
    r.trial = i;
    r.family = family;
    r.world_seed = wseed;
    r.level = level;
    r.steps = ep.t;
    r.terminal_distance = ep.goal_distance();
    r.success = r.terminal_distance < cfg.eval.success_radius;
    if (r.success) ep.status = EpisodeStatus::reached;
    r.status = ep.status;
    r.path_length = ep.path_length;
    auto sp = shortest_path_length(ep.world, ep.world.start, ep.world.goal,
                                   0.5 * spec.base_width,
                                   cfg.eval.astar_resolution);
    r.shortest_path = sp.length;
    r.path_flagged = !sp.reachable;
    report.results[static_cast<size_t>(i)] = r;
  });

  report.sr = success_rate(report.results);
  report.spl_value = spl(report.results);
  return report;
}

inline std::string trial_report_csv(const TrialReport& report) {
  std::string out =
      "trial,family,world_seed,level,success,steps,terminal_distance,"
      "path_length,shortest_path,path_flagged,status\n";
  char buf[160];
  for (const auto& r : report.results) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%llu,%d,%d,%d,%.6g,%.6g,%.6g,%d,%s\n",
                  r.trial, to_string(r.family).c_str(),
                  static_cast<unsigned long long>(r.world_seed), r.level,
                  r.success ? 1 : 0, r.steps, r.terminal_distance,
                  r.path_length, r.shortest_path, r.path_flagged ? 1 : 0,
                  to_string(r.status).c_str());
    out += buf;
  }
  return out;
}

inline std::string trial_summary_text(const TrialReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "family=%s trials=%zu SR=%.4f SPL=%.4f\n",
                to_string(report.family).c_str(), report.results.size(),
                report.sr, report.spl_value);
  return std::string(buf);
}

// ---- ablation suite ----

struct AblationRow {
  std::string variant;
  double sr_articulated = 0.0;
  double spl_articulated = 0.0;
  double sr_wheeled = 0.0;
  double spl_wheeled = 0.0;
};

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,sr_articulated,spl_articulated,sr_wheeled,spl_wheeled\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f\n",
                  r.variant.c_str(), r.sr_articulated, r.spl_articulated,
                  r.sr_wheeled, r.spl_wheeled);
    out += buf;
  }
  return out;
}

/// Trains the squared-error and L1 variants once on the shared dataset, then
/// evaluates the five inference/loss variants under one seed schedule:
/// articulated robots on rough terrain, wheeled on flat.
inline std::vector<AblationRow> ablation_suite(const DemoDataset& dataset,
                                               const PipelineConfig& cfg,
                                               uint64_t seed, ThreadPool& pool,
                                               bool verbose = false) {
  Rng master(seed);
  const uint64_t train_seed = master.child("train").seed();
  const uint64_t eval_seed = master.child("eval").seed();

  DistillConfig mse_cfg = cfg.distill;
  mse_cfg.loss = "mse";
  if (verbose) std::puts("training squared-error variant");
  auto base = train_chunk_policy(dataset, mse_cfg, train_seed, pool, verbose);
  DistillConfig l1_cfg = cfg.distill;
  l1_cfg.loss = "l1";
  if (verbose) std::puts("training l1 variant");
  auto l1 = train_chunk_policy(dataset, l1_cfg, train_seed, pool, verbose);

  LoadedChunkPolicy base_policy;
  base_policy.model = std::move(base.model);
  base_policy.config = cfg;
  LoadedChunkPolicy l1_policy;
  l1_policy.model = std::move(l1.model);
  l1_policy.config = cfg;

  const Family art = Family::small_articulated;
  auto evaluate = [&](const LoadedChunkPolicy& policy, InferenceMode art_mode,
                      InferenceMode wheel_mode) {
    auto rep_art = run_trials(
        [&] { return std::make_unique<ChunkAgent>(&policy, art_mode, art); },
        art, cfg, cfg.eval.n_trials, eval_seed, pool);
    auto rep_wheel = run_trials(
        [&] {
          return std::make_unique<ChunkAgent>(&policy, wheel_mode,
                                              Family::wheeled);
        },
        Family::wheeled, cfg, cfg.eval.n_trials, eval_seed, pool);
    return std::array<double, 4>{rep_art.sr, rep_art.spl_value, rep_wheel.sr,
                                 rep_wheel.spl_value};
  };

  std::vector<AblationRow> rows;
  auto add = [&](const std::string& name, const std::array<double, 4>& v) {
    rows.push_back({name, v[0], v[1], v[2], v[3]});
    if (verbose)
      std::printf("  %-14s art SR %.3f SPL %.3f | wheel SR %.3f SPL %.3f\n",
                  name.c_str(), v[0], v[1], v[2], v[3]);
  };
  add("l1_loss", evaluate(l1_policy, InferenceMode::first_action,
                          InferenceMode::temporal_ensemble));
  add("execute_chunk", evaluate(base_policy, InferenceMode::execute_chunk,
                                InferenceMode::execute_chunk));
  add("no_te", evaluate(base_policy, InferenceMode::first_action,
                        InferenceMode::first_action));
  add("te_all", evaluate(base_policy, InferenceMode::temporal_ensemble,
                         InferenceMode::temporal_ensemble));
  add("base", evaluate(base_policy, InferenceMode::first_action,
                       InferenceMode::temporal_ensemble));
  return rows;
}

// ---- scalability suite ----

struct ScalabilityRow {
  int embodiments = 0;
  double sr = 0.0;
  double spl_value = 0.0;
};

inline std::string scalability_csv(const std::vector<ScalabilityRow>& rows) {
  std::string out = "embodiments,sr,spl\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.4f,%.4f\n", r.embodiments, r.sr,
                  r.spl_value);
    out += buf;
  }
  return out;
}

/// End-to-end scaling trend: per embodiment count, trains the three experts,
/// collects an equal total demonstration budget, distills, and evaluates on
/// one fixed held-out world/embodiment schedule shared by every count.
inline std::vector<ScalabilityRow> scalability_suite(const PipelineConfig& cfg,
                                                     uint64_t seed,
                                                     ThreadPool& pool,
                                                     bool verbose = false) {
  std::vector<ScalabilityRow> rows;
  Rng master(seed);
  const uint64_t eval_seed = master.child("eval").seed();

  for (int count : cfg.eval.scalability_counts) {
    PipelineConfig run_cfg = cfg;
    run_cfg.ppo.n_embodiments = count;
    run_cfg.ppo.n_updates = cfg.eval.scalability_updates;

    std::vector<DemoDataset> datasets;
    for (Family family : {Family::wheeled, Family::small_articulated,
                          Family::large_articulated}) {
      if (verbose)
        std::printf("scalability %d: training %s expert\n", count,
                    to_string(family).c_str());
      const uint64_t train_seed =
          master.child("train-" + to_string(family), static_cast<uint64_t>(count)).seed();
      auto expert = train_expert(family, run_cfg, train_seed, pool, verbose);
      LoadedExpert loaded;
      loaded.policy = std::move(expert.policy);
      loaded.config = run_cfg;
      loaded.seed = train_seed;
      datasets.push_back(collect_demos(
          loaded, run_cfg.distill.n_demos,
          master.child("collect-" + to_string(family), static_cast<uint64_t>(count)).seed()));
    }
    DemoDataset merged = std::move(datasets[0]);
    for (size_t i = 1; i < datasets.size(); ++i) {
      check_dataset_compatible(merged, datasets[i]);
      for (auto& e : datasets[i].episodes) merged.episodes.push_back(std::move(e));
    }
    if (verbose) std::printf("scalability %d: distilling\n", count);
    auto distilled = train_chunk_policy(
        merged, run_cfg.distill,
        master.child("distill", static_cast<uint64_t>(count)).seed(), pool, verbose);
    LoadedChunkPolicy policy;
    policy.model = std::move(distilled.model);
    policy.config = run_cfg;

    double sr_sum = 0.0, spl_sum = 0.0;
    for (Family family : {Family::wheeled, Family::small_articulated,
                          Family::large_articulated}) {
      auto rep = run_trials(
          [&] {
            return std::make_unique<ChunkAgent>(
                &policy, InferenceMode::auto_default, family);
          },
          family, run_cfg, run_cfg.eval.n_trials, eval_seed, pool);
      sr_sum += rep.sr;
      spl_sum += rep.spl_value;
    }
    rows.push_back({count, sr_sum / 3.0, spl_sum / 3.0});
    if (verbose)
      std::printf("scalability %d: SR %.3f SPL %.3f\n", count,
                  rows.back().sr, rows.back().spl_value);
  }
  return rows;
}

// ---- svg trajectory plots ----

inline std::string trajectory_svg(const WorldInstance& world,
                                  const std::vector<Vec2>& trajectory) {
  const double s = 60.0;  // px per meter
  char buf[256];
  std::string svg;
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns='http://www.w3.org/2000/svg' width='%d' height='%d' "
                "viewBox='0 0 %.1f %.1f'>\n",
                static_cast<int>(world.size.x * s),
                static_cast<int>(world.size.y * s), world.size.x * s,
                world.size.y * s);
  svg += buf;
  auto px = [&](const Vec2& p) {
    return std::pair<double, double>{p.x * s, (world.size.y - p.y) * s};
  };
  svg += "<rect width='100%' height='100%' fill='#fafafa'/>\n";
  for (const auto& ob : world.obstacles) {
    auto [cx, cy] = px(ob.center);
    if (ob.kind == ObstacleKind::cylinder) {
      std::snprintf(buf, sizeof(buf),
                    "<circle cx='%.1f' cy='%.1f' r='%.1f' fill='#b0b0b0'/>\n",
                    cx, cy, ob.half_x * s);
    } else {
      std::snprintf(buf, sizeof(buf),
                    "<rect x='%.1f' y='%.1f' width='%.1f' height='%.1f' "
                    "fill='%s' transform='rotate(%.2f %.1f %.1f)'/>\n",
                    cx - ob.half_x * s, cy - ob.half_y * s, 2 * ob.half_x * s,
                    2 * ob.half_y * s,
                    ob.kind == ObstacleKind::box ? "#b0b0b0" : "#c8a470",
                    -ob.yaw * 180.0 / kPi, cx, cy);
    }
    svg += buf;
  }
  svg += "<polyline fill='none' stroke='#d04040' stroke-width='2' points='";
  for (const auto& p : trajectory) {
    auto [x, y] = px(p);
    std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", x, y);
    svg += buf;
  }
  svg += "'/>\n";
  auto [sx, sy] = px(world.start);
  auto [gx, gy] = px(world.goal);
  std::snprintf(buf, sizeof(buf),
                "<circle cx='%.1f' cy='%.1f' r='6' fill='#3060d0'/>\n", sx, sy);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<circle cx='%.1f' cy='%.1f' r='6' fill='#30a040'/>\n", gx, gy);
  svg += buf;
  svg += "</svg>\n";
  return svg;
}

}  // namespace crossnav
