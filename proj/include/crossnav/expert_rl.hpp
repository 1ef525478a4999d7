/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossnav/config.hpp"
#include "crossnav/neural.hpp"
#include "crossnav/observe.hpp"
#include "crossnav/parallel.hpp"
#include "crossnav/rewards.hpp"
#include "crossnav/simcore.hpp"
#include "crossnav/worldgen.hpp"

namespace crossnav {

/// Raised when a training loss stops being finite.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when demonstration collection stops finding successful episodes.
struct StarvationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- generalized advantage estimation ----

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// values carries n+1 entries — the last one is the bootstrap value.
inline GaeResult gae(const std::vector<double>& rewards,
                     const std::vector<double>& values,
                     const std::vector<int>& dones, double gamma,
                     double lambda) {
  const size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n)
    throw std::invalid_argument("gae: inconsistent lengths");
  for (double r : rewards)
    if (!std::isfinite(r)) throw std::invalid_argument("gae: NaN reward");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("gae: NaN value");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (size_t i = n; i-- > 0;) {
    const double nonterminal = dones[i] ? 0.0 : 1.0;
    const double delta =
        rewards[i] + gamma * values[i + 1] * nonterminal - values[i];
    next_adv = delta + gamma * lambda * nonterminal * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
  }
  return out;
}

// ---- PPO loss (reference form, used directly by tests) ----

struct PpoLossParts {
  double total = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

inline PpoLossParts ppo_loss(const std::vector<double>& log_prob_new,
                             const std::vector<double>& log_prob_old,
                             const std::vector<double>& advantages,
                             const std::vector<double>& value_pred,
                             const std::vector<double>& returns,
                             double entropy_mean, const PpoConfig& cfg) {
  const size_t n = log_prob_new.size();
  PpoLossParts parts;
  for (size_t i = 0; i < n; ++i) {
    const double ratio = std::exp(log_prob_new[i] - log_prob_old[i]);
    const double clipped = clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    parts.surrogate -=
        std::min(ratio * advantages[i], clipped * advantages[i]);
    const double verr = value_pred[i] - returns[i];
    parts.value_loss += verr * verr;
  }
  parts.surrogate /= static_cast<double>(n);
  parts.value_loss /= static_cast<double>(n);
  parts.entropy = entropy_mean;
  parts.total = parts.surrogate + cfg.value_coef * parts.value_loss -
                cfg.entropy_coef * parts.entropy;
  return parts;
}

// ---- expert actor-critic ----

struct ExpertPolicy {
  nn::ParameterSet<float> ps;
  nn::Mlp<float> actor;
  nn::Mlp<float> critic;
  int log_std = -1;
  Family family = Family::wheeled;
  int obs_dim = 0;
  int act_dim = 0;

  static ExpertPolicy create(Family family, int obs_dim,
                             const std::vector<int>& hidden,
                             double log_std_init, Rng rng) {
    ExpertPolicy p;
    p.family = family;
    p.obs_dim = obs_dim;
    p.act_dim = native_action_dim(family);
    std::vector<int> adims{obs_dim};
    adims.insert(adims.end(), hidden.begin(), hidden.end());
    adims.push_back(p.act_dim);
    p.actor = nn::Mlp<float>::create(p.ps, "actor", adims, rng, 0.1);
    std::vector<int> cdims{obs_dim};
    cdims.insert(cdims.end(), hidden.begin(), hidden.end());
    cdims.push_back(1);
    p.critic = nn::Mlp<float>::create(p.ps, "critic", cdims, rng);
    p.log_std = p.ps.add("log_std", {p.act_dim});
    auto& ls = p.ps.at(p.log_std).tensor.v;
    std::fill(ls.begin(), ls.end(), static_cast<float>(log_std_init));
    return p;
  }

  /// Deterministic action (the Gaussian mean) for a single observation.
  std::vector<double> act_mean(const std::vector<double>& obs) const {
    if (static_cast<int>(obs.size()) != obs_dim)
      throw std::invalid_argument("expert observation size mismatch");
    std::vector<float> x(obs.begin(), obs.end());
    std::vector<float> y(static_cast<size_t>(act_dim));
    actor.forward(ps, x.data(), 1, y.data());
    return std::vector<double>(y.begin(), y.end());
  }
};

/// Gaussian log-density with per-dimension state-independent log-std.
inline double gaussian_log_prob(const float* mean, const float* log_std,
                                const double* action, int dim) {
  double lp = -0.5 * dim * std::log(2.0 * kPi);
  for (int i = 0; i < dim; ++i) {
    const double ls = log_std[i];
    const double z = (action[i] - mean[i]) * std::exp(-ls);
    lp += -0.5 * z * z - ls;
  }
  return lp;
}

inline double gaussian_entropy(const float* log_std, int dim) {
  double h = 0.5 * dim * (1.0 + std::log(2.0 * kPi));
  for (int i = 0; i < dim; ++i) h += log_std[i];
  return h;
}

// ---- rollout machinery ----

struct RolloutBatch {
  int n_envs = 0;
  int horizon = 0;
  int obs_dim = 0;
  int act_dim = 0;
  // [t][env] layout
  std::vector<float> obs;
  std::vector<double> actions;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<int> dones;
  std::vector<double> bootstrap;  // per env
  std::vector<double> advantages;
  std::vector<double> returns;
  // per-step reward term means for logging
  std::vector<double> term_sums;
  int episodes_finished = 0;
  double return_sum = 0.0;  // undiscounted, over finished episodes
};

/// One training environment slot: fixed embodiment, per-robot curriculum.
struct TrainEnv {
  int index = 0;
  EmbodimentSpec spec;
  CurriculumState curriculum;
  Episode episode;
  Rng stream;
  double episode_return = 0.0;
};

class EnvBatch {
 public:
  EnvBatch(Family family, const PipelineConfig& cfg, Rng master)
      : family_(family), cfg_(cfg) {
    const int n_envs = cfg.ppo.n_envs;
    const int n_embod =
        cfg.ppo.n_embodiments > 0 ? cfg.ppo.n_embodiments : n_envs;
    Rng pool_rng = master.child("embodiment-pool");
    pool_.reserve(static_cast<size_t>(n_embod));
    for (int i = 0; i < n_embod; ++i)
      pool_.push_back(sample_embodiment(family, pool_rng, cfg.embodiment));
    envs_.resize(static_cast<size_t>(n_envs));
    for (int e = 0; e < n_envs; ++e) {
      TrainEnv& env = envs_[static_cast<size_t>(e)];
      env.index = e;
      env.spec = pool_[static_cast<size_t>(e) % pool_.size()];
      env.curriculum.level = 0;
      env.curriculum.sigma_close = cfg.world.sigma_close;
      env.curriculum.sigma_far = cfg.world.sigma_far;
      env.stream = master.child("env", static_cast<uint64_t>(e));
      reset_env(env);
    }
  }

  const std::vector<EmbodimentSpec>& pool() const { return pool_; }
  std::vector<TrainEnv>& envs() { return envs_; }
  Family family() const { return family_; }

  void reset_env(TrainEnv& env) {
    const ObstacleKind kind =
        static_cast<ObstacleKind>(env.stream.uniform_int(3));
    Rng world_rng(env.stream.next_u64());
    WorldInstance world = generate_subfield(
        kind, env.curriculum.level, {cfg_.world.subfield_size, cfg_.world.subfield_size},
        world_rng, cfg_.world, family_ == Family::wheeled);
    EpisodeRandomization er = sample_episode_randomization(
        env.stream, cfg_.embodiment.domain_rand,
        cfg_.ppo.push_enabled && is_articulated(family_),
        cfg_.ppo.noise_enabled);
    Rng ep_rng(env.stream.next_u64());
    env.episode = make_episode(std::move(world), env.spec, er, ep_rng,
                               cfg_.episode_steps(), cfg_.dt, cfg_.embodiment);
    env.episode_return = 0.0;
  }

  /// End-of-episode curriculum update, then a fresh world.
  void finish_and_reset(TrainEnv& env) {
    env.curriculum = curriculum_update(env.episode.goal_distance(),
                                       env.curriculum, cfg_.world.max_level);
    reset_env(env);
  }

  double mean_level() const {
    double s = 0.0;
    for (const auto& e : envs_) s += e.curriculum.level;
    return s / static_cast<double>(envs_.size());
  }

 private:
  Family family_;
  PipelineConfig cfg_;
  std::vector<EmbodimentSpec> pool_;
  std::vector<TrainEnv> envs_;
};

/// Collects `horizon` steps from every environment with the current policy.
/// Terminated episodes reset inline with the curriculum rule applied.
inline RolloutBatch rollout(EnvBatch& batch, const ExpertPolicy& policy,
                            int horizon, const PipelineConfig& cfg,
                            ThreadPool& pool) {
  auto& envs = batch.envs();
  const int n_envs = static_cast<int>(envs.size());
  const int obs_dim = policy.obs_dim;
  const int act_dim = policy.act_dim;

  RolloutBatch rb;
  rb.n_envs = n_envs;
  rb.horizon = horizon;
  rb.obs_dim = obs_dim;
  rb.act_dim = act_dim;
  const size_t total = static_cast<size_t>(horizon) * n_envs;
  rb.obs.assign(total * obs_dim, 0.0f);
  rb.actions.assign(total * act_dim, 0.0);
  rb.log_probs.assign(total, 0.0);
  rb.values.assign(total, 0.0);
  rb.rewards.assign(total, 0.0);
  rb.dones.assign(total, 0);
  rb.bootstrap.assign(static_cast<size_t>(n_envs), 0.0);
  rb.term_sums.assign(RewardBreakdown::term_names().size(), 0.0);

  std::vector<float> obs_now(static_cast<size_t>(n_envs) * obs_dim);
  std::vector<float> means(static_cast<size_t>(n_envs) * act_dim);
  std::vector<float> values(static_cast<size_t>(n_envs));
  std::vector<RewardBreakdown> breakdowns(static_cast<size_t>(n_envs));

  const float* log_std = policy.ps.at(policy.log_std).tensor.v.data();

  auto build_obs = [&](int e) {
    TrainEnv& env = envs[static_cast<size_t>(e)];
    auto p = sample_proprio(env.episode, cfg.embodiment.domain_rand);
    auto obs = build_expert_obs(env.episode, p, cfg.ppo.scan,
                                cfg.ppo.obs_scales);
    for (int i = 0; i < obs_dim; ++i)
      obs_now[static_cast<size_t>(e) * obs_dim + i] =
          static_cast<float>(obs.values[static_cast<size_t>(i)]);
  };

  for (int t = 0; t < horizon; ++t) {
    pool.parallel_for(n_envs, build_obs);
    std::copy(obs_now.begin(), obs_now.end(),
              rb.obs.begin() + static_cast<int64_t>(t) * n_envs * obs_dim);

    policy.actor.forward(policy.ps, obs_now.data(), n_envs, means.data());
    policy.critic.forward(policy.ps, obs_now.data(), n_envs, values.data());

    pool.parallel_for(n_envs, [&](int e) {
      TrainEnv& env = envs[static_cast<size_t>(e)];
      const size_t flat = static_cast<size_t>(t) * n_envs + e;
      double* act = rb.actions.data() + flat * act_dim;
      for (int i = 0; i < act_dim; ++i) {
        const double sigma = std::exp(static_cast<double>(log_std[i]));
        act[i] = means[static_cast<size_t>(e) * act_dim + i] +
                 sigma * env.stream.normal();
      }
      rb.log_probs[flat] = gaussian_log_prob(
          means.data() + static_cast<size_t>(e) * act_dim, log_std, act,
          act_dim);
      rb.values[flat] = values[static_cast<size_t>(e)];

      step_episode(env.episode, act, cfg.embodiment);
      breakdowns[static_cast<size_t>(e)] = total_reward(env.episode, cfg.rewards);
      rb.rewards[flat] = breakdowns[static_cast<size_t>(e)].total;
      rb.dones[flat] = env.episode.status != EpisodeStatus::running ? 1 : 0;
    });

    // bookkeeping + resets stay single-threaded for deterministic ordering
    for (int e = 0; e < n_envs; ++e) {
      TrainEnv& env = envs[static_cast<size_t>(e)];
      const size_t flat = static_cast<size_t>(t) * n_envs + e;
      env.episode_return += rb.rewards[flat];
      const auto terms = breakdowns[static_cast<size_t>(e)].terms();
      for (size_t k = 0; k < terms.size(); ++k) rb.term_sums[k] += terms[k];
      if (rb.dones[flat]) {
        rb.episodes_finished += 1;
        rb.return_sum += env.episode_return;
        batch.finish_and_reset(env);
      }
    }
  }

  // bootstrap values from the post-rollout observations
  pool.parallel_for(n_envs, build_obs);
  policy.critic.forward(policy.ps, obs_now.data(), n_envs, values.data());
  for (int e = 0; e < n_envs; ++e)
    rb.bootstrap[static_cast<size_t>(e)] = values[static_cast<size_t>(e)];

  // per-env GAE over the [t][env] layout
  rb.advantages.assign(total, 0.0);
  rb.returns.assign(total, 0.0);
  for (int e = 0; e < n_envs; ++e) {
    std::vector<double> r(static_cast<size_t>(horizon));
    std::vector<double> v(static_cast<size_t>(horizon) + 1);
    std::vector<int> d(static_cast<size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
      const size_t flat = static_cast<size_t>(t) * n_envs + e;
      r[static_cast<size_t>(t)] = rb.rewards[flat];
      v[static_cast<size_t>(t)] = rb.values[flat];
      d[static_cast<size_t>(t)] = rb.dones[flat];
    }
    v[static_cast<size_t>(horizon)] = rb.bootstrap[static_cast<size_t>(e)];
    auto res = gae(r, v, d, cfg.ppo.gamma, cfg.ppo.gae_lambda);
    for (int t = 0; t < horizon; ++t) {
      const size_t flat = static_cast<size_t>(t) * n_envs + e;
      rb.advantages[flat] = res.advantages[static_cast<size_t>(t)];
      rb.returns[flat] = res.returns[static_cast<size_t>(t)];
    }
  }
  return rb;
}

/// Normalizes advantages in place to zero mean, unit std over the batch.
inline void normalize_advantages(std::vector<double>& adv) {
  const double n = static_cast<double>(adv.size());
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : adv) var += sq(a - mean);
  var /= n;
  const double inv = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& a : adv) a = (a - mean) * inv;
}

// ---- PPO update ----

struct UpdateStats {
  double loss = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

/// Loss and gradients for a span of minibatch rows. inv_m is the minibatch
/// normalization (1 / minibatch size); gradients are accumulated into gr.
/// Returns the chunk's contribution to (surrogate, value loss); the entropy
/// term is handled through its exact per-row share.
inline void ppo_chunk_grads(const ExpertPolicy& policy, const float* x,
                            const double* act, const double* adv,
                            const double* ret, const double* lp_old, int rows,
                            double inv_m, const PpoConfig& cfg,
                            nn::Grads<float>& gr, double* surr_out,
                            double* vloss_out) {
  const int obs_dim = policy.obs_dim;
  const int act_dim = policy.act_dim;
  const float* log_std = policy.ps.at(policy.log_std).tensor.v.data();
  std::vector<double> sigma(static_cast<size_t>(act_dim));
  for (int i = 0; i < act_dim; ++i)
    sigma[static_cast<size_t>(i)] = std::exp(static_cast<double>(log_std[i]));

  nn::Mlp<float>::Cache actor_cache, critic_cache;
  std::vector<float> mean(static_cast<size_t>(rows) * act_dim);
  std::vector<float> value(static_cast<size_t>(rows));
  policy.actor.forward(policy.ps, x, rows, mean.data(), &actor_cache);
  policy.critic.forward(policy.ps, x, rows, value.data(), &critic_cache);

  std::vector<float> dmean(static_cast<size_t>(rows) * act_dim, 0.0f);
  std::vector<float> dvalue(static_cast<size_t>(rows), 0.0f);
  float* dlog_std = gr.of(policy.log_std);
  double surr = 0.0, vloss = 0.0;

  for (int r = 0; r < rows; ++r) {
    const double* ar = act + static_cast<int64_t>(r) * act_dim;
    const float* mr = mean.data() + static_cast<int64_t>(r) * act_dim;
    const double lp_new = gaussian_log_prob(mr, log_std, ar, act_dim);
    const double ratio = std::exp(lp_new - lp_old[r]);
    const double a = adv[r];
    const double clipped = clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    surr -= std::min(ratio * a, clipped * a) * inv_m;

    const bool active =
        a >= 0.0 ? ratio <= 1.0 + cfg.clip : ratio >= 1.0 - cfg.clip;
    if (active) {
      // d(-ratio*A)/dmean = -A * ratio * z / sigma
      const double coef = -a * ratio * inv_m;
      for (int i = 0; i < act_dim; ++i) {
        const double z = (ar[i] - mr[i]) / sigma[static_cast<size_t>(i)];
        dmean[static_cast<size_t>(r) * act_dim + i] +=
            static_cast<float>(coef * z / sigma[static_cast<size_t>(i)]);
        dlog_std[i] += static_cast<float>(coef * (z * z - 1.0));
      }
    }
    const double verr = value[static_cast<size_t>(r)] - ret[r];
    vloss += verr * verr * inv_m;
    dvalue[static_cast<size_t>(r)] =
        static_cast<float>(cfg.value_coef * 2.0 * verr * inv_m);
  }
  // entropy bonus: dH/dlog_std_i = 1, weighted by this chunk's row share
  for (int i = 0; i < act_dim; ++i)
    dlog_std[i] += static_cast<float>(-cfg.entropy_coef * rows * inv_m);

  policy.actor.backward(policy.ps, gr, actor_cache, dmean.data());
  policy.critic.backward(policy.ps, gr, critic_cache, dvalue.data());
  *surr_out += surr;
  *vloss_out += vloss;
}

/// One PPO optimization phase over a collected batch: `epochs` passes of
/// `minibatches` minibatches each, gradients accumulated over fixed chunks.
inline UpdateStats ppo_update(ExpertPolicy& policy, RolloutBatch& rb,
                              const PpoConfig& cfg, Rng& update_rng,
                              ThreadPool& pool) {
  const int total = rb.n_envs * rb.horizon;
  const int obs_dim = rb.obs_dim;
  const int act_dim = rb.act_dim;

  normalize_advantages(rb.advantages);

  std::vector<int> perm(static_cast<size_t>(total));
  std::iota(perm.begin(), perm.end(), 0);

  const int mb_size = total / cfg.minibatches;
  const int n_chunks = std::max(cfg.grad_chunks, 1);
  std::vector<nn::Grads<float>> chunk_grads(static_cast<size_t>(n_chunks));
  for (auto& g : chunk_grads) g.init(policy.ps);

  UpdateStats stats;
  int stat_count = 0;
  const float* log_std = policy.ps.at(policy.log_std).tensor.v.data();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the update stream
    for (int i = total - 1; i > 0; --i) {
      const int j = static_cast<int>(update_rng.uniform_int(
          static_cast<uint64_t>(i) + 1));
      std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    }

    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      const int begin = mb * mb_size;
      const int count = mb == cfg.minibatches - 1 ? total - begin : mb_size;
      const double entropy = gaussian_entropy(log_std, act_dim);
      const double inv_m = 1.0 / count;

      const int chunk_size = (count + n_chunks - 1) / n_chunks;
      std::vector<double> chunk_surr(static_cast<size_t>(n_chunks), 0.0);
      std::vector<double> chunk_vloss(static_cast<size_t>(n_chunks), 0.0);

      pool.parallel_for(n_chunks, [&](int c) {
        const int lo = begin + c * chunk_size;
        const int hi = std::min(begin + (c + 1) * chunk_size, begin + count);
        nn::Grads<float>& gr = chunk_grads[static_cast<size_t>(c)];
        gr.zero();
        if (lo >= hi) return;
        const int rows = hi - lo;

        std::vector<float> x(static_cast<size_t>(rows) * obs_dim);
        std::vector<double> act(static_cast<size_t>(rows) * act_dim);
        std::vector<double> adv(static_cast<size_t>(rows));
        std::vector<double> ret(static_cast<size_t>(rows));
        std::vector<double> lp_old(static_cast<size_t>(rows));
        for (int r = 0; r < rows; ++r) {
          const int src = perm[static_cast<size_t>(lo + r)];
          std::copy(rb.obs.begin() + static_cast<int64_t>(src) * obs_dim,
                    rb.obs.begin() + static_cast<int64_t>(src + 1) * obs_dim,
                    x.begin() + static_cast<int64_t>(r) * obs_dim);
          std::copy(rb.actions.begin() + static_cast<int64_t>(src) * act_dim,
                    rb.actions.begin() + static_cast<int64_t>(src + 1) * act_dim,
                    act.begin() + static_cast<int64_t>(r) * act_dim);
          adv[static_cast<size_t>(r)] = rb.advantages[static_cast<size_t>(src)];
          ret[static_cast<size_t>(r)] = rb.returns[static_cast<size_t>(src)];
          lp_old[static_cast<size_t>(r)] = rb.log_probs[static_cast<size_t>(src)];
        }
        ppo_chunk_grads(policy, x.data(), act.data(), adv.data(), ret.data(),
                        lp_old.data(), rows, inv_m, cfg, gr,
                        &chunk_surr[static_cast<size_t>(c)],
                        &chunk_vloss[static_cast<size_t>(c)]);
      });

      policy.ps.zero_grad();
      nn::reduce_grads(policy.ps, chunk_grads);

      double surr = 0.0, vloss = 0.0;
      for (int c = 0; c < n_chunks; ++c) {
        surr += chunk_surr[static_cast<size_t>(c)];
        vloss += chunk_vloss[static_cast<size_t>(c)];
      }
      const double loss =
          surr + cfg.value_coef * vloss - cfg.entropy_coef * entropy;
      if (!std::isfinite(loss))
        throw DivergenceError("PPO loss is not finite");
      stats.loss += loss;
      stats.surrogate += surr;
      stats.value_loss += vloss;
      stats.entropy = entropy;
      stat_count += 1;

      // global gradient norm clip
      if (cfg.max_grad_norm > 0.0) {
        double norm_sq = 0.0;
        for (auto& e : policy.ps.entries)
          for (float g : e.tensor.g) norm_sq += static_cast<double>(g) * g;
        const double norm = std::sqrt(norm_sq);
        if (norm > cfg.max_grad_norm) {
          const float scale = static_cast<float>(cfg.max_grad_norm / norm);
          for (auto& e : policy.ps.entries)
            for (float& g : e.tensor.g) g *= scale;
        }
      }
      nn::adam_step(policy.ps, cfg.adam);
    }
  }
  if (stat_count > 0) {
    stats.loss /= stat_count;
    stats.surrogate /= stat_count;
    stats.value_loss /= stat_count;
  }
  return stats;
}

// ---- probe evaluation ----

struct ProbeCase {
  WorldInstance world;
  EmbodimentSpec spec;
  uint64_t seed = 0;
};

inline std::vector<ProbeCase> make_probe_set(Family family,
                                             const PipelineConfig& cfg,
                                             const std::vector<EmbodimentSpec>& pool,
                                             Rng probe_rng) {
  std::vector<ProbeCase> cases;
  const auto& levels = cfg.ppo.probe_levels;
  for (int i = 0; i < cfg.ppo.probe_episodes; ++i) {
    ProbeCase pc;
    const int level = levels[static_cast<size_t>(i) % levels.size()];
    const ObstacleKind kind = static_cast<ObstacleKind>(probe_rng.uniform_int(3));
    pc.seed = probe_rng.next_u64();
    pc.world = generate_subfield(
        kind, level, {cfg.world.subfield_size, cfg.world.subfield_size},
        Rng(pc.seed), cfg.world, family == Family::wheeled);
    pc.spec = pool[static_cast<size_t>(i) % pool.size()];
    cases.push_back(std::move(pc));
  }
  return cases;
}

/// Deterministic (mean-action) success rate over the probe set: success is
/// a terminal goal distance under sigma_close at the end of the episode.
inline double probe_success_rate(const ExpertPolicy& policy,
                                 const std::vector<ProbeCase>& cases,
                                 const PipelineConfig& cfg, ThreadPool& pool) {
  std::vector<int> success(cases.size(), 0);
  pool.parallel_for(static_cast<int>(cases.size()), [&](int i) {
    const ProbeCase& pc = cases[static_cast<size_t>(i)];
    EpisodeRandomization er;  // probes run clean: no pushes, no noise
    auto ep = make_episode(pc.world, pc.spec, er, Rng(pc.seed ^ 0x9e37u),
                           cfg.episode_steps(), cfg.dt, cfg.embodiment);
    while (ep.status == EpisodeStatus::running) {
      auto p = sample_proprio(ep, cfg.embodiment.domain_rand);
      auto obs = build_expert_obs(ep, p, cfg.ppo.scan, cfg.ppo.obs_scales);
      auto act = policy.act_mean(obs.values);
      step_episode(ep, act.data(), cfg.embodiment);
    }
    success[static_cast<size_t>(i)] =
        ep.goal_distance() < cfg.world.sigma_close ? 1 : 0;
  });
  double s = 0.0;
  for (int v : success) s += v;
  return s / static_cast<double>(cases.size());
}

// ---- training driver ----

struct TrainLogRow {
  int update = 0;
  double mean_return = 0.0;
  double mean_reward = 0.0;
  std::vector<double> term_means;
  double probe_sr = -1.0;  // -1: not evaluated at this update
  double mean_level = 0.0;
  double loss = 0.0;
};

struct ExpertTrainResult {
  ExpertPolicy policy;
  std::vector<TrainLogRow> log;
  double final_probe_sr = 0.0;
  uint64_t seed = 0;
};

inline std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
  std::string out = "update,mean_return,mean_reward";
  for (const auto& name : RewardBreakdown::term_names()) out += "," + name;
  out += ",probe_sr,mean_level,loss\n";
  char buf[64];
  for (const auto& r : rows) {
    out += std::to_string(r.update);
    auto add = [&](double v) {
      std::snprintf(buf, sizeof(buf), ",%.6g", v);
      out += buf;
    };
    add(r.mean_return);
    add(r.mean_reward);
    for (double t : r.term_means) add(t);
    add(r.probe_sr);
    add(r.mean_level);
    add(r.loss);
    out += "\n";
  }
  return out;
}

inline ExpertTrainResult train_expert(Family family, const PipelineConfig& cfg,
                                      uint64_t seed, ThreadPool& pool,
                                      bool verbose = false) {
  Rng master(seed);
  EnvBatch envs(family, cfg, master);

  ScanWindow window = cfg.ppo.scan;
  const int obs_dim = expert_obs_dim(family, window);
  ExpertTrainResult result;
  result.seed = seed;
  result.policy = ExpertPolicy::create(family, obs_dim, cfg.ppo.hidden,
                                       cfg.ppo.log_std_init,
                                       master.child("init"));

  Rng update_rng = master.child("update");
  const auto probe_set =
      make_probe_set(family, cfg, envs.pool(), master.child("probe"));

  for (int update = 1; update <= cfg.ppo.n_updates; ++update) {
    RolloutBatch rb = rollout(envs, result.policy, cfg.ppo.horizon, cfg, pool);
    UpdateStats stats = ppo_update(result.policy, rb, cfg.ppo, update_rng, pool);

    TrainLogRow row;
    row.update = update;
    const double steps = static_cast<double>(rb.n_envs) * rb.horizon;
    row.mean_reward = 0.0;
    for (double r : rb.rewards) row.mean_reward += r;
    row.mean_reward /= steps;
    row.mean_return = rb.episodes_finished > 0
                          ? rb.return_sum / rb.episodes_finished
                          : 0.0;
    row.term_means.reserve(rb.term_sums.size());
    for (double s : rb.term_sums) row.term_means.push_back(s / steps);
    row.mean_level = envs.mean_level();
    row.loss = stats.loss;
    if (update % cfg.ppo.probe_interval == 0 || update == cfg.ppo.n_updates) {
      row.probe_sr = probe_success_rate(result.policy, probe_set, cfg, pool);
      result.final_probe_sr = row.probe_sr;
      if (verbose) {
        std::printf("  update %4d  return %8.2f  level %4.2f  probe SR %.3f\n",
                    update, row.mean_return, row.mean_level, row.probe_sr);
        std::fflush(stdout);
      }
    }
    result.log.push_back(std::move(row));
  }
  return result;
}

// ---- checkpoint io ----

inline std::string expert_checkpoint_bytes(const ExpertPolicy& policy,
                                           const PipelineConfig& cfg,
                                           uint64_t seed) {
  nlohmann::json meta{
      {"family", to_string(policy.family)},
      {"obs_dim", policy.obs_dim},
      {"act_dim", policy.act_dim},
      {"hidden", cfg.ppo.hidden},
      {"seed", seed},
      {"config", config_to_json(cfg)},
  };
  return nn::save_parameters(policy.ps, meta, "expert");
}

struct LoadedExpert {
  ExpertPolicy policy;
  PipelineConfig config;
  uint64_t seed = 0;
};

inline LoadedExpert load_expert(const std::string& bytes) {
  Container c = container_from_bytes(bytes, "crossnav-checkpoint");
  const auto meta = c.header.at("meta");
  LoadedExpert out;
  out.config = config_from_json(meta.at("config"));
  out.seed = meta.at("seed").get<uint64_t>();
  const Family family = family_from_string(meta.at("family").get<std::string>());
  const int obs_dim = meta.at("obs_dim").get<int>();
  out.policy = ExpertPolicy::create(family, obs_dim,
                                    meta.at("hidden").get<std::vector<int>>(),
                                    out.config.ppo.log_std_init, Rng(0));
  nn::load_parameters(out.policy.ps, bytes, "expert");
  return out;
}

}  // namespace crossnav
