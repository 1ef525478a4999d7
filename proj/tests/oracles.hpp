/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

// Test-only reference implementations: finite differences, dense ODE
// integration, brute-force graph search and advantage recursion. These stay
// independent of the library code paths they check.

#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <vector>

namespace oracles {

/// Central finite difference of a scalar function at x along coordinate i.
inline double central_diff(const std::function<double()>& f, double* xi,
                           double eps) {
  const double x0 = *xi;
  *xi = x0 + eps;
  const double fp = f();
  *xi = x0 - eps;
  const double fm = f();
  *xi = x0;
  return (fp - fm) / (2.0 * eps);
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  int checked = 0;
};

/// Compares analytic gradients against central differences over a parameter
/// span. rel err uses max(|analytic|, |numeric|, floor) as denominator.
inline GradCheckResult grad_check(const std::function<double()>& loss,
                                  double* params, const double* analytic,
                                  int n, double eps = 1e-6,
                                  double floor_value = 1e-4) {
  GradCheckResult r;
  for (int i = 0; i < n; ++i) {
    const double num = central_diff(loss, params + i, eps);
    const double ana = analytic[i];
    const double abs_err = std::abs(num - ana);
    const double denom = std::max({std::abs(num), std::abs(ana), floor_value});
    r.max_rel_err = std::max(r.max_rel_err, abs_err / denom);
    r.max_abs_err = std::max(r.max_abs_err, abs_err);
    r.checked += 1;
  }
  return r;
}

/// Dense RK4 integration of dy/dt = f(t, y).
inline std::vector<double> integrate_rk4(
    const std::function<std::vector<double>(double, const std::vector<double>&)>& f,
    std::vector<double> y, double t0, double t1, int steps) {
  const double h = (t1 - t0) / steps;
  auto axpy = [](const std::vector<double>& a, const std::vector<double>& b,
                 double s) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
    return out;
  };
  double t = t0;
  for (int k = 0; k < steps; ++k) {
    const auto k1 = f(t, y);
    const auto k2 = f(t + h / 2, axpy(y, k1, h / 2));
    const auto k3 = f(t + h / 2, axpy(y, k2, h / 2));
    const auto k4 = f(t + h, axpy(y, k3, h));
    for (size_t i = 0; i < y.size(); ++i)
      y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    t += h;
  }
  return y;
}

/// Brute-force GAE: advantage at t is the explicit discounted sum of TD
/// residuals, truncated at episode boundaries.
inline std::vector<double> gae_bruteforce(const std::vector<double>& rewards,
                                          const std::vector<double>& values,
                                          double bootstrap,
                                          const std::vector<int>& dones,
                                          double gamma, double lambda) {
  const int n = static_cast<int>(rewards.size());
  std::vector<double> adv(static_cast<size_t>(n), 0.0);
  for (int t = 0; t < n; ++t) {
    double a = 0.0;
    double coeff = 1.0;
    for (int k = t; k < n; ++k) {
      const double v_next = k + 1 < n ? values[static_cast<size_t>(k) + 1] : bootstrap;
      const double nonterminal = dones[static_cast<size_t>(k)] ? 0.0 : 1.0;
      const double delta = rewards[static_cast<size_t>(k)] +
                           gamma * v_next * nonterminal - values[static_cast<size_t>(k)];
      a += coeff * delta;
      if (dones[static_cast<size_t>(k)]) break;
      coeff *= gamma * lambda;
    }
    adv[static_cast<size_t>(t)] = a;
  }
  return adv;
}

/// Dijkstra over an 8-connected grid with integer edge costs (5 straight,
/// 7 diagonal). Returns -1 if unreachable.
inline int64_t dijkstra_grid(const std::vector<uint8_t>& blocked, int nx,
                             int ny, int sx, int sy, int gx, int gy) {
  auto idx = [nx](int x, int y) { return static_cast<size_t>(y) * nx + x; };
  if (blocked[idx(sx, sy)] || blocked[idx(gx, gy)]) return -1;
  std::vector<int64_t> dist(static_cast<size_t>(nx) * ny, INT64_MAX);
  using Node = std::pair<int64_t, int>;
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> pq;
  dist[idx(sx, sy)] = 0;
  pq.push({0, static_cast<int>(idx(sx, sy))});
  const int dxs[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  const int dys[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[static_cast<size_t>(v)]) continue;
    const int x = v % nx, y = v / nx;
    if (x == gx && y == gy) return d;
    for (int k = 0; k < 8; ++k) {
      const int x2 = x + dxs[k], y2 = y + dys[k];
      if (x2 < 0 || y2 < 0 || x2 >= nx || y2 >= ny) continue;
      if (blocked[idx(x2, y2)]) continue;
      const int64_t nd = d + (k < 4 ? 5 : 7);
      if (nd < dist[idx(x2, y2)]) {
        dist[idx(x2, y2)] = nd;
        pq.push({nd, static_cast<int>(idx(x2, y2))});
      }
    }
  }
  return -1;
}

}  // namespace oracles
