/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <algorithm>
#include <cstdio>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossnav/config.hpp"
#include "crossnav/expert_rl.hpp"
#include "crossnav/neural.hpp"
#include "crossnav/observe.hpp"
#include "crossnav/parallel.hpp"
#include "crossnav/simcore.hpp"

namespace crossnav {

// ---- demonstration dataset ----

struct DemoEpisode {
  Family family = Family::wheeled;
  EmbodimentSpec spec;
  uint64_t world_seed = 0;
  int level = 0;
  bool success = true;
  int n_steps = 0;
  std::vector<float> obs;      // n_steps x 382
  std::vector<float> actions;  // n_steps x 14
};

struct DemoDataset {
  int obs_dim = kUnifiedObsDim;
  int act_dim = kUnifiedActionDim;
  int chunk_len = 6;
  int obs_seq_len = 4;
  uint64_t seed = 0;
  bool noise = true;
  nlohmann::json scales;
  std::vector<DemoEpisode> episodes;

  int64_t total_steps() const {
    int64_t n = 0;
    for (const auto& e : episodes) n += e.n_steps;
    return n;
  }
};

inline nlohmann::json dataset_layout_json() {
  return nlohmann::json{{"l_g", 0},
                        {"o_s", 2},
                        {"o_prio_uni", 4},
                        {"o_hist", 34},
                        {"o_ray", 254},
                        {"total", kUnifiedObsDim},
                        {"history_frames", kHistoryFrames},
                        {"history_frame_dim", kHistoryFrameDim},
                        {"wheeled_vel_slots", {0, 2}}};
}

inline std::string dataset_to_bytes(const DemoDataset& ds) {
  nlohmann::json families = nlohmann::json::object();
  for (const auto& e : ds.episodes) {
    const std::string f = to_string(e.family);
    families[f] = families.value(f, 0) + 1;
  }
  Container c;
  c.magic = "crossnav-demos";
  c.version = 1;
  c.header = {{"obs_dim", ds.obs_dim},
              {"act_dim", ds.act_dim},
              {"chunk_len", ds.chunk_len},
              {"obs_seq_len", ds.obs_seq_len},
              {"seed", ds.seed},
              {"noise", ds.noise},
              {"layout", dataset_layout_json()},
              {"scales", ds.scales},
              {"families", families},
              {"episodes", ds.episodes.size()}};
  ByteWriter payload;
  for (const auto& e : ds.episodes) {
    ByteWriter rec;
    nlohmann::json meta{{"family", to_string(e.family)},
                        {"spec", spec_to_json(e.spec)},
                        {"world_seed", e.world_seed},
                        {"level", e.level},
                        {"success", e.success},
                        {"n_steps", e.n_steps}};
    rec.str(meta.dump());
    rec.f32_array(e.obs);
    rec.f32_array(e.actions);
    payload.u32(static_cast<uint32_t>(rec.data().size()));
    payload.bytes(rec.data().data(), rec.data().size());
  }
  c.payload = payload.data();
  return container_to_bytes(c);
}

inline DemoDataset dataset_from_bytes(const std::string& bytes) {
  Container c = container_from_bytes(bytes, "crossnav-demos");
  DemoDataset ds;
  ds.obs_dim = c.header.at("obs_dim").get<int>();
  ds.act_dim = c.header.at("act_dim").get<int>();
  ds.chunk_len = c.header.at("chunk_len").get<int>();
  ds.obs_seq_len = c.header.at("obs_seq_len").get<int>();
  ds.seed = c.header.at("seed").get<uint64_t>();
  ds.noise = c.header.at("noise").get<bool>();
  ds.scales = c.header.at("scales");
  const size_t n_episodes = c.header.at("episodes").get<size_t>();
  ByteReader r(c.payload);
  for (size_t i = 0; i < n_episodes; ++i) {
    const uint32_t len = r.u32();
    (void)len;
    DemoEpisode e;
    nlohmann::json meta = nlohmann::json::parse(r.str());
    e.family = family_from_string(meta.at("family").get<std::string>());
    e.spec = spec_from_json(meta.at("spec"));
    e.world_seed = meta.at("world_seed").get<uint64_t>();
    e.level = meta.at("level").get<int>();
    e.success = meta.at("success").get<bool>();
    e.n_steps = meta.at("n_steps").get<int>();
    e.obs.resize(static_cast<size_t>(e.n_steps) * ds.obs_dim);
    r.f32_array(e.obs.data(), e.obs.size());
    e.actions.resize(static_cast<size_t>(e.n_steps) * ds.act_dim);
    r.f32_array(e.actions.data(), e.actions.size());
    ds.episodes.push_back(std::move(e));
  }
  return ds;
}

/// Header compatibility check used when merging datasets for training.
inline void check_dataset_compatible(const DemoDataset& a,
                                     const DemoDataset& b) {
  if (a.obs_dim != b.obs_dim || a.act_dim != b.act_dim ||
      a.chunk_len != b.chunk_len || a.obs_seq_len != b.obs_seq_len ||
      a.scales.dump() != b.scales.dump())
    throw std::runtime_error("demo dataset layout headers do not match");
}

// ---- demonstration collection ----

/// Runs the expert (deterministic action mean) in fresh random worlds and
/// keeps only successful episodes. Success is the end-of-trial rule: no
/// collision and a terminal goal distance under sigma_close.
inline DemoDataset collect_demos(const LoadedExpert& expert, int n_demos,
                                 uint64_t seed, bool verbose = false) {
  if (n_demos <= 0) throw std::invalid_argument("n_demos must be positive");
  const PipelineConfig& cfg = expert.config;
  const Family family = expert.policy.family;

  DemoDataset ds;
  ds.chunk_len = cfg.distill.chunk_len;
  ds.obs_seq_len = cfg.distill.obs_seq_len;
  ds.seed = seed;
  ds.noise = cfg.distill.demo_noise;
  {
    PipelineConfig tmp = cfg;
    ds.scales = detail::visitable_to_json(tmp.ppo.obs_scales);
  }

  // the exact embodiment pool the expert trained on
  Rng pool_rng = Rng(expert.seed).child("embodiment-pool");
  const int n_embod =
      cfg.ppo.n_embodiments > 0 ? cfg.ppo.n_embodiments : cfg.ppo.n_envs;
  std::vector<EmbodimentSpec> pool;
  for (int i = 0; i < n_embod; ++i)
    pool.push_back(sample_embodiment(family, pool_rng, cfg.embodiment));

  Rng master(seed);
  Rng world_rng = master.child("demo-worlds");
  int attempts = 0;
  int window_attempts = 0;
  int window_successes = 0;

  while (static_cast<int>(ds.episodes.size()) < n_demos) {
    attempts += 1;
    window_attempts += 1;
    const int level = cfg.distill.demo_level_min +
                      static_cast<int>(world_rng.uniform_int(
                          static_cast<uint64_t>(cfg.distill.demo_level_max -
                                                cfg.distill.demo_level_min + 1)));
    const ObstacleKind kind =
        static_cast<ObstacleKind>(world_rng.uniform_int(3));
    const uint64_t wseed = world_rng.next_u64();
    WorldInstance world = generate_subfield(
        kind, level, {cfg.world.subfield_size, cfg.world.subfield_size},
        Rng(wseed), cfg.world, family == Family::wheeled);

    const EmbodimentSpec& spec =
        pool[ds.episodes.size() % pool.size()];
    EpisodeRandomization er;
    er.noise_enabled = cfg.distill.demo_noise;
    Rng ep_rng(world_rng.next_u64());
    Episode ep = make_episode(std::move(world), spec, er, ep_rng,
                              cfg.episode_steps(), cfg.dt, cfg.embodiment);

    DemoEpisode demo;
    demo.family = family;
    demo.spec = spec;
    demo.world_seed = wseed;
    demo.level = level;
    HistoryBuffer history;
    const int offset = is_articulated(family) ? 2 : 0;

    while (ep.status == EpisodeStatus::running) {
      auto p = sample_proprio(ep, cfg.embodiment.domain_rand);
      auto uni = build_unified_obs(ep, p, history, cfg.ppo.obs_scales,
                                   cfg.embodiment.domain_rand);
      auto expert_obs = build_expert_obs(ep, p, cfg.ppo.scan, cfg.ppo.obs_scales);
      auto action = expert.policy.act_mean(expert_obs.values);

      std::array<double, kUnifiedActionDim> a_uni{};
      for (size_t i = 0; i < action.size(); ++i)
        a_uni[static_cast<size_t>(offset) + i] = action[i];

      for (double v : uni.values) demo.obs.push_back(static_cast<float>(v));
      for (double v : a_uni) demo.actions.push_back(static_cast<float>(v));
      demo.n_steps += 1;

      step_episode(ep, action.data(), cfg.embodiment);
      history.push(a_uni, unified_proprio(ep, p, cfg.ppo.obs_scales));
    }

    const bool success = ep.status != EpisodeStatus::collided &&
                         ep.goal_distance() < cfg.world.sigma_close;
    if (success) {
      demo.success = true;
      ds.episodes.push_back(std::move(demo));
      window_successes += 1;
      if (verbose && ds.episodes.size() % 64 == 0) {
        std::printf("  collected %zu/%d demos (%d attempts)\n",
                    ds.episodes.size(), n_demos, attempts);
        std::fflush(stdout);
      }
    }
    if (window_attempts >= cfg.distill.starvation_window) {
      const double rate =
          static_cast<double>(window_successes) / window_attempts;
      if (rate < cfg.distill.starvation_min_rate)
        throw StarvationError("demo collection success rate " +
                              std::to_string(rate) + " below threshold");
      window_attempts = 0;
      window_successes = 0;
    }
  }
  return ds;
}

// ---- action-chunking transformer policy ----

template <typename S = float>
struct ChunkPolicyModel {
  nn::ParameterSet<S> ps;
  int enc_w = -1, enc_b = -1;
  int query_emb = -1;  // chunk-slot queries, S_a x E
  int mem_pos = -1;    // observation-sequence position embeddings, S_o x E
  std::vector<nn::DecoderBlock<S>> blocks;
  nn::LayerNormParams<S> final_ln;
  int head_w = -1, head_b = -1;
  int obs_dim = kUnifiedObsDim;
  int act_dim = kUnifiedActionDim;
  int embed = 128;
  int n_layers = 2;
  int n_heads = 4;
  int ff = 256;
  int chunk_len = 6;
  int obs_seq_len = 4;

  static ChunkPolicyModel create(const DistillConfig& cfg, Rng rng,
                                 int obs_dim = kUnifiedObsDim) {
    ChunkPolicyModel m;
    m.obs_dim = obs_dim;
    m.embed = cfg.embed_dim;
    m.n_layers = cfg.layers;
    m.n_heads = cfg.heads;
    m.ff = cfg.ff_dim;
    m.chunk_len = cfg.chunk_len;
    m.obs_seq_len = cfg.obs_seq_len;

    m.enc_w = m.ps.add("encoder.w", {obs_dim, m.embed});
    nn::xavier_uniform(m.ps.at(m.enc_w).tensor, obs_dim, m.embed, rng);
    m.enc_b = m.ps.add("encoder.b", {m.embed});
    m.query_emb = m.ps.add("query_emb", {m.chunk_len, m.embed});
    nn::small_uniform(m.ps.at(m.query_emb).tensor, 0.1, rng);
    m.mem_pos = m.ps.add("mem_pos", {m.obs_seq_len, m.embed});
    nn::small_uniform(m.ps.at(m.mem_pos).tensor, 0.1, rng);
    for (int l = 0; l < m.n_layers; ++l)
      m.blocks.push_back(nn::DecoderBlock<S>::create(
          m.ps, "decoder." + std::to_string(l), m.embed, m.n_heads, m.ff, rng));
    m.final_ln = nn::LayerNormParams<S>::create(m.ps, "final_ln", m.embed);
    m.head_w = m.ps.add("head.w", {m.embed, m.act_dim});
    nn::xavier_uniform(m.ps.at(m.head_w).tensor, m.embed, m.act_dim, rng);
    m.head_b = m.ps.add("head.b", {m.act_dim});
    return m;
  }

  struct Cache {
    int batch = 0;
    const S* obs = nullptr;                 // batch*S_o x obs_dim
    std::vector<S> memory;                  // batch*S_o x E
    std::vector<std::vector<S>> xs;         // per-layer inputs + final
    std::vector<typename nn::DecoderBlock<S>::Cache> block_caches;
    nn::LayerNormCache<S> final_cache;
    std::vector<S> final_out;               // batch*S_a x E
  };

  /// obs: (batch*S_o, obs_dim) rows, oldest first within each window;
  /// out: (batch*S_a, act_dim) chunk rows.
  void forward(const S* obs, int batch, S* out, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache != nullptr ? *cache : local;
    c.batch = batch;
    c.obs = obs;
    const int rows_mem = batch * obs_seq_len;
    const int rows_q = batch * chunk_len;

    c.memory.assign(static_cast<size_t>(rows_mem) * embed, S(0));
    nn::linear_forward(obs, rows_mem, obs_dim, embed, ps.at(enc_w).tensor.v.data(),
                   ps.at(enc_b).tensor.v.data(), c.memory.data());
    const S* mem_pos_v = ps.at(mem_pos).tensor.v.data();
    for (int r = 0; r < rows_mem; ++r) {
      const int slot = r % obs_seq_len;
      S* row = c.memory.data() + static_cast<int64_t>(r) * embed;
      const S* pos = mem_pos_v + static_cast<int64_t>(slot) * embed;
      for (int i = 0; i < embed; ++i) row[i] += pos[i];
    }

    c.xs.assign(static_cast<size_t>(n_layers) + 1,
                std::vector<S>(static_cast<size_t>(rows_q) * embed, S(0)));
    const S* queries = ps.at(query_emb).tensor.v.data();
    for (int r = 0; r < rows_q; ++r) {
      const int slot = r % chunk_len;
      std::copy(queries + static_cast<int64_t>(slot) * embed,
                queries + static_cast<int64_t>(slot + 1) * embed,
                c.xs[0].begin() + static_cast<int64_t>(r) * embed);
    }

    c.block_caches.resize(static_cast<size_t>(n_layers));
    for (int l = 0; l < n_layers; ++l) {
      blocks[static_cast<size_t>(l)].forward(
          ps, c.xs[static_cast<size_t>(l)].data(), c.memory.data(), batch,
          chunk_len, obs_seq_len, c.block_caches[static_cast<size_t>(l)],
          c.xs[static_cast<size_t>(l) + 1].data());
    }

    c.final_out.assign(static_cast<size_t>(rows_q) * embed, S(0));
    nn::ln_forward(ps, final_ln, c.xs[static_cast<size_t>(n_layers)].data(),
                   rows_q, c.final_cache, c.final_out.data());
    nn::linear_forward(c.final_out.data(), rows_q, embed, act_dim,
                   ps.at(head_w).tensor.v.data(), ps.at(head_b).tensor.v.data(),
                   out);
  }

  /// dout: (batch*S_a, act_dim). Parameter gradients accumulate into gr.
  void backward(const Cache& c, const S* dout, nn::Grads<S>& gr) const {
    const int batch = c.batch;
    const int rows_mem = batch * obs_seq_len;
    const int rows_q = batch * chunk_len;
    std::vector<S> scratch;

    std::vector<S> d_final(static_cast<size_t>(rows_q) * embed, S(0));
    nn::linear_backward(c.final_out.data(), ps.at(head_w).tensor.v.data(), dout,
                    rows_q, embed, act_dim, d_final.data(), gr.of(head_w),
                    gr.of(head_b));
    std::vector<S> dx(static_cast<size_t>(rows_q) * embed, S(0));
    nn::ln_backward(ps, gr, final_ln, c.final_cache, d_final.data(), dx.data());

    std::vector<S> dmem(static_cast<size_t>(rows_mem) * embed, S(0));
    std::vector<S> dx_prev(static_cast<size_t>(rows_q) * embed, S(0));
    for (int l = n_layers - 1; l >= 0; --l) {
      blocks[static_cast<size_t>(l)].backward(ps, gr,
                                              c.block_caches[static_cast<size_t>(l)],
                                              dx.data(), dx_prev.data(),
                                              dmem.data(), scratch);
      dx.swap(dx_prev);
    }

    // query embeddings: sum over windows per chunk slot
    S* dq = gr.of(query_emb);
    for (int r = 0; r < rows_q; ++r) {
      const int slot = r % chunk_len;
      const S* row = dx.data() + static_cast<int64_t>(r) * embed;
      S* dst = dq + static_cast<int64_t>(slot) * embed;
      for (int i = 0; i < embed; ++i) dst[i] += row[i];
    }

    // memory positions: sum over windows per sequence slot
    S* dp = gr.of(mem_pos);
    for (int r = 0; r < rows_mem; ++r) {
      const int slot = r % obs_seq_len;
      const S* row = dmem.data() + static_cast<int64_t>(r) * embed;
      S* dst = dp + static_cast<int64_t>(slot) * embed;
      for (int i = 0; i < embed; ++i) dst[i] += row[i];
    }

    nn::linear_backward(c.obs, ps.at(enc_w).tensor.v.data(), dmem.data(), rows_mem,
                    obs_dim, embed, static_cast<S*>(nullptr), gr.of(enc_w),
                    gr.of(enc_b));
  }
};

// ---- training windows ----

struct WindowIndex {
  int episode = 0;
  int t = 0;
};

inline std::vector<WindowIndex> all_windows(const DemoDataset& ds) {
  std::vector<WindowIndex> windows;
  windows.reserve(static_cast<size_t>(ds.total_steps()));
  for (int e = 0; e < static_cast<int>(ds.episodes.size()); ++e)
    for (int t = 0; t < ds.episodes[static_cast<size_t>(e)].n_steps; ++t)
      windows.push_back({e, t});
  return windows;
}

/// Gathers the observation sequence (zero rows before episode start) and the
/// ground-truth chunk (final action repeated past the episode end).
inline void gather_window(const DemoDataset& ds, const WindowIndex& w,
                          int obs_seq_len, int chunk_len, float* obs_rows,
                          float* chunk_rows) {
  const DemoEpisode& e = ds.episodes[static_cast<size_t>(w.episode)];
  const int od = ds.obs_dim, ad = ds.act_dim;
  for (int s = 0; s < obs_seq_len; ++s) {
    const int t = w.t - (obs_seq_len - 1) + s;
    float* dst = obs_rows + static_cast<int64_t>(s) * od;
    if (t < 0) {
      std::fill(dst, dst + od, 0.0f);
    } else {
      const float* src = e.obs.data() + static_cast<int64_t>(t) * od;
      std::copy(src, src + od, dst);
    }
  }
  for (int i = 0; i < chunk_len; ++i) {
    const int t = std::min(w.t + i, e.n_steps - 1);
    const float* src = e.actions.data() + static_cast<int64_t>(t) * ad;
    std::copy(src, src + ad, chunk_rows + static_cast<int64_t>(i) * ad);
  }
}

// ---- distillation training ----

struct DistillResult {
  ChunkPolicyModel<float> model;
  std::vector<double> loss_curve;  // per-epoch mean training loss
};

inline std::string loss_curve_csv(const std::vector<double>& curve) {
  std::string out = "epoch,loss\n";
  char buf[64];
  for (size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.8g\n", i + 1, curve[i]);
    out += buf;
  }
  return out;
}

inline DistillResult train_chunk_policy(const DemoDataset& ds,
                                        const DistillConfig& cfg,
                                        uint64_t seed, ThreadPool& pool,
                                        bool verbose = false) {
  if (ds.episodes.empty()) throw std::invalid_argument("empty demo dataset");
  const bool use_l1 = cfg.loss == "l1";
  if (!use_l1 && cfg.loss != "mse")
    throw std::invalid_argument("unknown loss: " + cfg.loss);

  Rng master(seed);
  DistillResult result;
  result.model = ChunkPolicyModel<float>::create(cfg, master.child("init"),
                                                 ds.obs_dim);
  ChunkPolicyModel<float>& model = result.model;

  auto windows = all_windows(ds);
  const int n_chunks = std::max(cfg.grad_chunks, 1);
  std::vector<nn::Grads<float>> chunk_grads(static_cast<size_t>(n_chunks));
  for (auto& g : chunk_grads) g.init(model.ps);

  Rng shuffle_rng = master.child("shuffle");
  const int s_o = cfg.obs_seq_len, s_a = cfg.chunk_len;
  const int od = ds.obs_dim, ad = ds.act_dim;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (size_t i = windows.size() - 1; i > 0; --i) {
      const size_t j = shuffle_rng.uniform_int(i + 1);
      std::swap(windows[i], windows[j]);
    }
    const int epoch_windows =
        cfg.windows_per_epoch > 0
            ? std::min<int>(cfg.windows_per_epoch,
                            static_cast<int>(windows.size()))
            : static_cast<int>(windows.size());

    double epoch_loss = 0.0;
    int64_t epoch_count = 0;
    for (int begin = 0; begin < epoch_windows; begin += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, epoch_windows - begin);
      const int chunk_size = (bsz + n_chunks - 1) / n_chunks;
      std::vector<double> chunk_loss(static_cast<size_t>(n_chunks), 0.0);

      pool.parallel_for(n_chunks, [&](int c) {
        nn::Grads<float>& gr = chunk_grads[static_cast<size_t>(c)];
        gr.zero();
        const int lo = begin + c * chunk_size;
        const int hi = std::min(begin + (c + 1) * chunk_size, begin + bsz);
        if (lo >= hi) return;
        const int rows = hi - lo;

        std::vector<float> obs(static_cast<size_t>(rows) * s_o * od);
        std::vector<float> gt(static_cast<size_t>(rows) * s_a * ad);
        for (int r = 0; r < rows; ++r)
          gather_window(ds, windows[static_cast<size_t>(lo + r)], s_o, s_a,
                        obs.data() + static_cast<int64_t>(r) * s_o * od,
                        gt.data() + static_cast<int64_t>(r) * s_a * ad);

        typename ChunkPolicyModel<float>::Cache cache;
        std::vector<float> pred(static_cast<size_t>(rows) * s_a * ad);
        model.forward(obs.data(), rows, pred.data(), &cache);

        std::vector<float> dpred(pred.size());
        double loss = 0.0;
        const float scale = 1.0f / static_cast<float>(bsz);
        for (int r = 0; r < rows; ++r) {
          float* dp = dpred.data() + static_cast<int64_t>(r) * s_a * ad;
          const float* pp = pred.data() + static_cast<int64_t>(r) * s_a * ad;
          const float* gp = gt.data() + static_cast<int64_t>(r) * s_a * ad;
          loss += use_l1 ? nn::l1_chunk_loss(pp, gp, s_a, ad, dp)
                         : nn::mse_chunk_loss(pp, gp, s_a, ad, dp);
        }
        for (auto& v : dpred) v *= scale;
        chunk_loss[static_cast<size_t>(c)] = loss;
        model.backward(cache, dpred.data(), gr);
      });

      model.ps.zero_grad();
      nn::reduce_grads(model.ps, chunk_grads);
      double batch_loss = 0.0;
      for (double l : chunk_loss) batch_loss += l;
      batch_loss /= bsz;
      if (!std::isfinite(batch_loss))
        throw DivergenceError("distillation loss is not finite");
      nn::adam_step(model.ps, cfg.adam);
      epoch_loss += batch_loss * bsz;
      epoch_count += bsz;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(epoch_count));
    if (verbose) {
      std::printf("  epoch %3d  loss %.6f\n", epoch, result.loss_curve.back());
      std::fflush(stdout);
    }
  }
  return result;
}

// ---- plain behavior-cloning baseline ----

struct BcPolicy {
  nn::ParameterSet<float> ps;
  nn::Mlp<float> mlp;
  int obs_dim = kUnifiedObsDim;
};

inline BcPolicy train_bc(const DemoDataset& ds, const DistillConfig& cfg,
                         uint64_t seed, ThreadPool& pool) {
  if (ds.episodes.empty()) throw std::invalid_argument("empty demo dataset");
  Rng master(seed);
  BcPolicy bc;
  bc.obs_dim = ds.obs_dim;
  std::vector<int> dims{ds.obs_dim};
  dims.insert(dims.end(), cfg.bc_hidden.begin(), cfg.bc_hidden.end());
  dims.push_back(ds.act_dim);
  Rng init_rng = master.child("init");
  bc.mlp = nn::Mlp<float>::create(bc.ps, "bc", dims, init_rng);

  auto windows = all_windows(ds);
  Rng shuffle_rng = master.child("shuffle");
  const int n_chunks = std::max(cfg.grad_chunks, 1);
  std::vector<nn::Grads<float>> chunk_grads(static_cast<size_t>(n_chunks));
  for (auto& g : chunk_grads) g.init(bc.ps);
  const int od = ds.obs_dim, ad = ds.act_dim;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (size_t i = windows.size() - 1; i > 0; --i) {
      const size_t j = shuffle_rng.uniform_int(i + 1);
      std::swap(windows[i], windows[j]);
    }
    const int epoch_windows =
        cfg.windows_per_epoch > 0
            ? std::min<int>(cfg.windows_per_epoch,
                            static_cast<int>(windows.size()))
            : static_cast<int>(windows.size());
    for (int begin = 0; begin < epoch_windows; begin += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, epoch_windows - begin);
      const int chunk_size = (bsz + n_chunks - 1) / n_chunks;
      pool.parallel_for(n_chunks, [&](int c) {
        nn::Grads<float>& gr = chunk_grads[static_cast<size_t>(c)];
        gr.zero();
        const int lo = begin + c * chunk_size;
        const int hi = std::min(begin + (c + 1) * chunk_size, begin + bsz);
        if (lo >= hi) return;
        const int rows = hi - lo;
        std::vector<float> x(static_cast<size_t>(rows) * od);
        std::vector<float> y(static_cast<size_t>(rows) * ad);
        for (int r = 0; r < rows; ++r) {
          const auto& w = windows[static_cast<size_t>(lo + r)];
          const auto& e = ds.episodes[static_cast<size_t>(w.episode)];
          std::copy(e.obs.begin() + static_cast<int64_t>(w.t) * od,
                    e.obs.begin() + static_cast<int64_t>(w.t + 1) * od,
                    x.begin() + static_cast<int64_t>(r) * od);
          std::copy(e.actions.begin() + static_cast<int64_t>(w.t) * ad,
                    e.actions.begin() + static_cast<int64_t>(w.t + 1) * ad,
                    y.begin() + static_cast<int64_t>(r) * ad);
        }
        nn::Mlp<float>::Cache cache;
        std::vector<float> pred(static_cast<size_t>(rows) * ad);
        bc.mlp.forward(bc.ps, x.data(), rows, pred.data(), &cache);
        std::vector<float> dpred(pred.size());
        for (size_t i2 = 0; i2 < pred.size(); ++i2)
          dpred[i2] = 2.0f * (pred[i2] - y[i2]) / static_cast<float>(bsz * ad);
        bc.mlp.backward(bc.ps, gr, cache, dpred.data());
      });
      bc.ps.zero_grad();
      nn::reduce_grads(bc.ps, chunk_grads);
      nn::adam_step(bc.ps, cfg.adam);
    }
  }
  return bc;
}

// ---- inference ----

enum class InferenceMode { auto_default, temporal_ensemble, first_action, execute_chunk };

inline std::string to_string(InferenceMode m) {
  switch (m) {
    case InferenceMode::auto_default: return "auto";
    case InferenceMode::temporal_ensemble: return "te";
    case InferenceMode::first_action: return "first_action";
    case InferenceMode::execute_chunk: return "execute_chunk";
  }
  throw std::invalid_argument("unknown inference mode");
}

inline InferenceMode inference_mode_from_string(const std::string& s) {
  if (s == "auto") return InferenceMode::auto_default;
  if (s == "te") return InferenceMode::temporal_ensemble;
  if (s == "first_action") return InferenceMode::first_action;
  if (s == "execute_chunk") return InferenceMode::execute_chunk;
  throw std::invalid_argument("unknown inference mode: " + s);
}

/// Ring buffer of the last S_a predicted chunks keyed by prediction step.
struct ChunkHistory {
  struct Entry {
    int t = 0;
    std::vector<double> chunk;  // S_a x channels
  };
  int chunk_len = 6;
  int channels = kUnifiedActionDim;
  std::deque<Entry> entries;

  void push(int t, std::vector<double> chunk) {
    if (!entries.empty() && t <= entries.back().t)
      throw std::invalid_argument("chunk history timesteps must increase");
    entries.push_back({t, std::move(chunk)});
    while (static_cast<int>(entries.size()) > chunk_len) entries.pop_front();
  }
};

/// Exponentially weighted average over the chunk predictions that cover step
/// t. The oldest contributing chunk carries weight exp(0) = 1.
inline std::vector<double> temporal_ensemble(const ChunkHistory& history,
                                             int t, double k) {
  if (history.entries.empty())
    throw std::invalid_argument("temporal ensemble on an empty history");
  const int s_a = history.chunk_len;
  const int ch = history.channels;
  std::vector<double> out(static_cast<size_t>(ch), 0.0);
  double total_w = 0.0;
  for (const auto& e : history.entries) {
    const int i = e.t;
    if (i < t - s_a + 1 || i > t) continue;
    const int row = t - i;
    const double w = std::exp(-k * (i - t + s_a - 1));
    for (int c = 0; c < ch; ++c)
      out[static_cast<size_t>(c)] +=
          w * e.chunk[static_cast<size_t>(row) * ch + c];
    total_w += w;
  }
  if (total_w <= 0.0)
    throw std::invalid_argument("no chunks cover the requested step");
  for (auto& v : out) v /= total_w;
  return out;
}

/// Stateful single-episode driver around the chunk policy: keeps the
/// observation window, chunk history and the execute-chunk cursor.
class ChunkPolicyRunner {
 public:
  ChunkPolicyRunner(const ChunkPolicyModel<float>* model, InferenceMode mode,
                    Family family, double te_k)
      : model_(model), family_(family), te_k_(te_k) {
    mode_ = mode != InferenceMode::auto_default
                ? mode
                : (is_articulated(family) ? InferenceMode::first_action
                                          : InferenceMode::temporal_ensemble);
    reset();
  }

  InferenceMode mode() const { return mode_; }

  void reset() {
    t_ = 0;
    obs_window_.assign(static_cast<size_t>(model_->obs_seq_len),
                       std::vector<float>(static_cast<size_t>(model_->obs_dim), 0.0f));
    history_ = ChunkHistory{};
    history_.chunk_len = model_->chunk_len;
    history_.channels = model_->act_dim;
    pending_.clear();
    pending_idx_ = 0;
  }

  /// Unified 14-channel action for the current step.
  std::array<double, kUnifiedActionDim> act(const std::vector<double>& o_uni) {
    if (static_cast<int>(o_uni.size()) != model_->obs_dim)
      throw std::invalid_argument("unified observation size mismatch");
    obs_window_.pop_front();
    obs_window_.emplace_back(o_uni.begin(), o_uni.end());

    std::array<double, kUnifiedActionDim> action{};
    switch (mode_) {
      case InferenceMode::temporal_ensemble: {
        history_.push(t_, predict());
        const auto a = temporal_ensemble(history_, t_, te_k_);
        std::copy(a.begin(), a.end(), action.begin());
        break;
      }
      case InferenceMode::first_action: {
        const auto chunk = predict();
        for (int c = 0; c < model_->act_dim; ++c)
          action[static_cast<size_t>(c)] = chunk[static_cast<size_t>(c)];
        break;
      }
      case InferenceMode::execute_chunk: {
        if (pending_.empty() || pending_idx_ >= model_->chunk_len) {
          pending_ = predict();
          pending_idx_ = 0;
        }
        for (int c = 0; c < model_->act_dim; ++c)
          action[static_cast<size_t>(c)] =
              pending_[static_cast<size_t>(pending_idx_) * model_->act_dim + c];
        pending_idx_ += 1;
        break;
      }
      case InferenceMode::auto_default:
        throw std::logic_error("unresolved inference mode");
    }
    t_ += 1;
    return action;
  }

 private:
  std::vector<double> predict() {
    const int s_o = model_->obs_seq_len;
    std::vector<float> obs(static_cast<size_t>(s_o) * model_->obs_dim);
    for (int s = 0; s < s_o; ++s)
      std::copy(obs_window_[static_cast<size_t>(s)].begin(),
                obs_window_[static_cast<size_t>(s)].end(),
                obs.begin() + static_cast<int64_t>(s) * model_->obs_dim);
    std::vector<float> out(static_cast<size_t>(model_->chunk_len) * model_->act_dim);
    model_->forward(obs.data(), 1, out.data());
    return std::vector<double>(out.begin(), out.end());
  }

  const ChunkPolicyModel<float>* model_;
  Family family_;
  InferenceMode mode_;
  double te_k_;
  int t_ = 0;
  std::deque<std::vector<float>> obs_window_;
  ChunkHistory history_;
  std::vector<double> pending_;
  int pending_idx_ = 0;
};

// ---- checkpoint io ----

inline std::string chunk_checkpoint_bytes(const ChunkPolicyModel<float>& model,
                                          const PipelineConfig& cfg,
                                          uint64_t seed,
                                          const std::string& loss_kind) {
  nlohmann::json meta{{"obs_dim", model.obs_dim},
                      {"act_dim", model.act_dim},
                      {"embed", model.embed},
                      {"layers", model.n_layers},
                      {"heads", model.n_heads},
                      {"ff", model.ff},
                      {"chunk_len", model.chunk_len},
                      {"obs_seq_len", model.obs_seq_len},
                      {"loss", loss_kind},
                      {"seed", seed},
                      {"config", config_to_json(cfg)}};
  return nn::save_parameters(model.ps, meta, "chunk");
}

struct LoadedChunkPolicy {
  ChunkPolicyModel<float> model;
  PipelineConfig config;
  uint64_t seed = 0;
  std::string loss_kind;
};

inline LoadedChunkPolicy load_chunk_policy(const std::string& bytes) {
  Container c = container_from_bytes(bytes, "crossnav-checkpoint");
  const auto meta = c.header.at("meta");
  LoadedChunkPolicy out;
  out.config = config_from_json(meta.at("config"));
  out.seed = meta.at("seed").get<uint64_t>();
  out.loss_kind = meta.at("loss").get<std::string>();
  DistillConfig dc = out.config.distill;
  dc.embed_dim = meta.at("embed").get<int>();
  dc.layers = meta.at("layers").get<int>();
  dc.heads = meta.at("heads").get<int>();
  dc.ff_dim = meta.at("ff").get<int>();
  dc.chunk_len = meta.at("chunk_len").get<int>();
  dc.obs_seq_len = meta.at("obs_seq_len").get<int>();
  out.model = ChunkPolicyModel<float>::create(dc, Rng(0),
                                              meta.at("obs_dim").get<int>());
  nn::load_parameters(out.model.ps, bytes, "chunk");
  return out;
}

}  // namespace crossnav
