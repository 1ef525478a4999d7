/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#include "catch_amalgamated.hpp"
#include "crossnav/distill.hpp"
#include "oracles.hpp"

using namespace crossnav;

namespace {

/// Small synthetic dataset with predictable chunk targets: each episode has
/// a constant identity channel plus a time channel, and actions are linear
/// in both, so future actions are inferable from the current observation.
DemoDataset synthetic_dataset(int episodes, int steps, uint64_t seed,
                              Family family = Family::wheeled) {
  DemoDataset ds;
  ds.seed = seed;
  ds.scales = nlohmann::json::object();
  Rng rng(seed);
  for (int e = 0; e < episodes; ++e) {
    DemoEpisode ep;
    ep.family = family;
    ep.spec.family = family;
    ep.world_seed = rng.next_u64();
    ep.n_steps = steps;
    const double ident = rng.uniform(-1, 1);
    for (int t = 0; t < steps; ++t) {
      const double phase = static_cast<double>(t) / steps;
      std::vector<float> obs(static_cast<size_t>(kUnifiedObsDim), 0.0f);
      obs[0] = static_cast<float>(ident);
      obs[1] = static_cast<float>(phase);
      for (float v : obs) ep.obs.push_back(v);
      std::array<float, kUnifiedActionDim> act{};
      if (family == Family::wheeled) {
        act[0] = static_cast<float>(0.5 * ident);
        act[1] = static_cast<float>(0.3 * phase - 0.1);
      } else {
        for (int j = 2; j < kUnifiedActionDim; ++j)
          act[static_cast<size_t>(j)] =
              static_cast<float>(0.1 * j * ident + 0.2 * phase);
      }
      for (float v : act) ep.actions.push_back(v);
    }
    ds.episodes.push_back(std::move(ep));
  }
  return ds;
}

DistillConfig tiny_distill_config() {
  DistillConfig cfg;
  cfg.embed_dim = 32;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.ff_dim = 64;
  cfg.batch_size = 64;
  cfg.epochs = 4;
  cfg.windows_per_epoch = 0;
  cfg.grad_chunks = 2;
  cfg.adam.lr = 1e-3;
  return cfg;
}

}  // namespace

TEST_CASE("demo datasets round-trip through the container format") {
  auto ds = synthetic_dataset(3, 10, 77);
  const std::string bytes = dataset_to_bytes(ds);
  auto ds2 = dataset_from_bytes(bytes);
  CHECK(ds2.episodes.size() == 3);
  CHECK(ds2.obs_dim == kUnifiedObsDim);
  CHECK(dataset_to_bytes(ds2) == bytes);

  DemoDataset other = ds;
  other.scales = nlohmann::json{{"different", 1}};
  CHECK_THROWS(check_dataset_compatible(ds, other));
}

TEST_CASE("window gathering pads the sequence start and the chunk tail") {
  auto ds = synthetic_dataset(1, 8, 5);
  const int s_o = 4, s_a = 6;
  std::vector<float> obs(static_cast<size_t>(s_o) * kUnifiedObsDim);
  std::vector<float> chunk(static_cast<size_t>(s_a) * kUnifiedActionDim);

  // t = 0: three zero rows then the first observation
  gather_window(ds, {0, 0}, s_o, s_a, obs.data(), chunk.data());
  for (int s = 0; s < 3; ++s)
    for (int i = 0; i < kUnifiedObsDim; ++i)
      CHECK(obs[static_cast<size_t>(s) * kUnifiedObsDim + i] == 0.0f);
  CHECK(obs[static_cast<size_t>(3) * kUnifiedObsDim] == ds.episodes[0].obs[0]);

  // t = 6 of 8 steps: chunk rows 6,7 then the final action repeated
  gather_window(ds, {0, 6}, s_o, s_a, obs.data(), chunk.data());
  const float* last = ds.episodes[0].actions.data() +
                      static_cast<int64_t>(7) * kUnifiedActionDim;
  for (int i = 2; i < s_a; ++i)
    for (int c = 0; c < kUnifiedActionDim; ++c)
      CHECK(chunk[static_cast<size_t>(i) * kUnifiedActionDim + c] == last[c]);
}

TEST_CASE("chunk policy emits S_a x 14 chunks") {
  DistillConfig cfg = tiny_distill_config();
  auto model = ChunkPolicyModel<float>::create(cfg, Rng(3));
  std::vector<float> obs(static_cast<size_t>(cfg.obs_seq_len) * kUnifiedObsDim,
                         0.1f);
  std::vector<float> out(static_cast<size_t>(cfg.chunk_len) * kUnifiedActionDim);
  model.forward(obs.data(), 1, out.data());
  CHECK(out.size() == 6u * 14u);
  for (float v : out) CHECK(std::isfinite(v));
}

TEST_CASE("paper-scale model parameter count lands on 4.85M within 3%") {
  DistillConfig cfg;
  cfg.embed_dim = 256;
  cfg.layers = 4;
  cfg.heads = 4;
  cfg.ff_dim = 1280;
  auto model = ChunkPolicyModel<float>::create(cfg, Rng(1));
  const double params = static_cast<double>(model.ps.total_params());
  CHECK(params == Catch::Approx(4.85e6).epsilon(0.03));
}

TEST_CASE("full-model gradient check in double precision") {
  DistillConfig cfg;
  cfg.embed_dim = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.ff_dim = 16;
  cfg.chunk_len = 3;
  cfg.obs_seq_len = 2;
  auto model = ChunkPolicyModel<double>::create(cfg, Rng(9), 12);

  Rng rng(10);
  const int batch = 2;
  std::vector<double> obs(static_cast<size_t>(batch) * 2 * 12);
  std::vector<double> gt(static_cast<size_t>(batch) * 3 * 14);
  for (auto& v : obs) v = rng.uniform(-1, 1);
  for (auto& v : gt) v = rng.uniform(-1, 1);

  auto loss_fn = [&] {
    std::vector<double> pred(static_cast<size_t>(batch) * 3 * 14);
    model.forward(obs.data(), batch, pred.data());
    double loss = 0.0;
    for (int b = 0; b < batch; ++b)
      loss += nn::mse_chunk_loss(
          pred.data() + static_cast<int64_t>(b) * 3 * 14,
          gt.data() + static_cast<int64_t>(b) * 3 * 14, 3, 14);
    return loss / batch;
  };

  typename ChunkPolicyModel<double>::Cache cache;
  std::vector<double> pred(static_cast<size_t>(batch) * 3 * 14);
  model.forward(obs.data(), batch, pred.data(), &cache);
  std::vector<double> dpred(pred.size());
  for (int b = 0; b < batch; ++b)
    nn::mse_chunk_loss(pred.data() + static_cast<int64_t>(b) * 3 * 14,
                       gt.data() + static_cast<int64_t>(b) * 3 * 14, 3, 14,
                       dpred.data() + static_cast<int64_t>(b) * 3 * 14);
  for (auto& v : dpred) v /= batch;
  nn::Grads<double> gr;
  gr.init(model.ps);
  model.backward(cache, dpred.data(), gr);

  double worst = 0.0;
  for (size_t p = 0; p < model.ps.entries.size(); ++p) {
    auto& t = model.ps.entries[p].tensor;
    for (size_t i = 0; i < t.v.size(); i += 5) {
      const double orig = t.v[i];
      const double eps = 1e-6;
      t.v[i] = orig + eps;
      const double fp = loss_fn();
      t.v[i] = orig - eps;
      const double fm = loss_fn();
      t.v[i] = orig;
      const double num = (fp - fm) / (2 * eps);
      const double ana = gr.g[p][i];
      worst = std::max(worst, std::abs(num - ana) /
                                  std::max({std::abs(num), std::abs(ana), 1e-4}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("distillation overfits a small synthetic dataset") {
  auto ds = synthetic_dataset(6, 20, 11);
  DistillConfig cfg = tiny_distill_config();
  cfg.epochs = 250;
  cfg.adam.lr = 3e-3;
  cfg.adam.weight_decay = 0.0;
  ThreadPool pool(2);
  auto result = train_chunk_policy(ds, cfg, 42, pool);
  REQUIRE(result.loss_curve.size() == 250);
  CHECK(result.loss_curve.back() < 1e-3);
  CHECK(result.loss_curve.back() < result.loss_curve.front());
  CHECK(result.loss_curve[1] < result.loss_curve[0]);

  // trained chunk-slot queries produce distinct rows
  std::vector<float> obs(static_cast<size_t>(cfg.obs_seq_len) * kUnifiedObsDim,
                         0.0f);
  obs[0] = 0.8f;
  std::vector<float> out(static_cast<size_t>(cfg.chunk_len) * kUnifiedActionDim);
  result.model.forward(obs.data(), 1, out.data());
  bool rows_differ = false;
  for (int r = 1; r < cfg.chunk_len && !rows_differ; ++r)
    for (int c = 0; c < kUnifiedActionDim; ++c)
      if (out[static_cast<size_t>(r) * kUnifiedActionDim + c] !=
          out[static_cast<size_t>(c)]) {
        rows_differ = true;
        break;
      }
  CHECK(rows_differ);
}

TEST_CASE("the l1 ablation flag swaps the training loss") {
  auto ds = synthetic_dataset(4, 10, 13);
  DistillConfig cfg = tiny_distill_config();
  cfg.epochs = 2;
  ThreadPool pool(2);
  cfg.loss = "l1";
  auto l1 = train_chunk_policy(ds, cfg, 1, pool);
  CHECK(l1.loss_curve.size() == 2);
  cfg.loss = "huber";
  CHECK_THROWS(train_chunk_policy(ds, cfg, 1, pool));
}

TEST_CASE("distillation is bit-identical across thread counts") {
  auto ds = synthetic_dataset(4, 16, 17);
  DistillConfig cfg = tiny_distill_config();
  cfg.epochs = 2;
  auto run = [&](int threads) {
    ThreadPool pool(threads);
    auto r = train_chunk_policy(ds, cfg, 5, pool);
    PipelineConfig pc;
    return chunk_checkpoint_bytes(r.model, pc, 5, cfg.loss);
  };
  REQUIRE(run(1) == run(2));
}

TEST_CASE("temporal ensemble: exactness, weights, convexity, degenerate") {
  // hand example: S_a=2, k=ln 2, older chunk row-1 = 2, newer row-0 = 4
  {
    ChunkHistory h;
    h.chunk_len = 2;
    h.channels = 1;
    h.push(9, {0.0, 2.0});   // predicted at t=9: rows for t=9,10
    h.push(10, {4.0, 0.0});  // predicted at t=10: rows for t=10,11
    auto a = temporal_ensemble(h, 10, std::log(2.0));
    CHECK(a[0] == Catch::Approx(8.0 / 3.0).epsilon(1e-12));
  }
  // identical chunk predictions collapse to the common value
  {
    ChunkHistory h;
    h.chunk_len = 3;
    h.channels = 2;
    for (int t = 0; t < 3; ++t)
      h.push(t, {1.5, -0.5, 1.5, -0.5, 1.5, -0.5});
    auto a = temporal_ensemble(h, 2, 0.05);
    CHECK(a[0] == Catch::Approx(1.5).epsilon(1e-12));
    CHECK(a[1] == Catch::Approx(-0.5).epsilon(1e-12));
  }
  // S_a = 1: ensemble equals the latest first action for any k
  {
    ChunkHistory h;
    h.chunk_len = 1;
    h.channels = 1;
    h.push(4, {7.25});
    for (double k : {0.001, 0.01, 0.1})
      CHECK(temporal_ensemble(h, 4, k)[0] == 7.25);
  }
  // convexity: the ensembled value lies inside the contributing min/max
  Rng rng(23);
  for (int s_a = 1; s_a <= 6; ++s_a) {
    for (double k : {0.001, 0.01, 0.1}) {
      ChunkHistory h;
      h.chunk_len = s_a;
      h.channels = 3;
      const int t = 20;
      double lo = 1e30, hi = -1e30;
      for (int i = t - s_a + 1; i <= t; ++i) {
        std::vector<double> chunk(static_cast<size_t>(s_a) * 3);
        for (auto& v : chunk) v = rng.uniform(-2, 2);
        const int row = t - i;
        lo = std::min(lo, chunk[static_cast<size_t>(row) * 3]);
        hi = std::max(hi, chunk[static_cast<size_t>(row) * 3]);
        h.push(i, std::move(chunk));
      }
      auto a = temporal_ensemble(h, t, k);
      CHECK(a[0] >= lo - 1e-12);
      CHECK(a[0] <= hi + 1e-12);
    }
  }
  // history invariants
  ChunkHistory h;
  h.chunk_len = 2;
  h.channels = 1;
  h.push(3, {1.0, 1.0});
  CHECK_THROWS(h.push(3, {1.0, 1.0}));
  h.push(4, {1.0, 1.0});
  h.push(5, {1.0, 1.0});
  CHECK(h.entries.size() == 2);  // bounded by chunk_len
  CHECK_THROWS(temporal_ensemble(ChunkHistory{}, 0, 0.01));
}

TEST_CASE("inference modes: defaults, chunk reuse, S_a=1 equivalence") {
  DistillConfig cfg = tiny_distill_config();
  auto model = ChunkPolicyModel<float>::create(cfg, Rng(31));

  ChunkPolicyRunner wheeled(&model, InferenceMode::auto_default,
                            Family::wheeled, cfg.te_k);
  CHECK(wheeled.mode() == InferenceMode::temporal_ensemble);
  ChunkPolicyRunner quad(&model, InferenceMode::auto_default,
                         Family::small_articulated, cfg.te_k);
  CHECK(quad.mode() == InferenceMode::first_action);

  // execute-chunk replays one prediction for S_a steps; once the observation
  // window saturates with a constant input, consecutive chunks coincide
  std::vector<double> obs(static_cast<size_t>(kUnifiedObsDim), 0.25);
  ChunkPolicyRunner ec(&model, InferenceMode::execute_chunk, Family::wheeled,
                       cfg.te_k);
  std::vector<std::array<double, kUnifiedActionDim>> ec_actions;
  for (int t = 0; t < 18; ++t) ec_actions.push_back(ec.act(obs));
  for (int t = 6; t < 12; ++t)
    for (int c = 0; c < 2; ++c)
      CHECK(ec_actions[static_cast<size_t>(t)][static_cast<size_t>(c)] ==
            Catch::Approx(
                ec_actions[static_cast<size_t>(t + 6)][static_cast<size_t>(c)]));
  // within a window the chunk rows generally differ (repredicts only every
  // S_a steps, unlike first-action mode)
  bool varied = false;
  for (int c = 0; c < 2 && !varied; ++c)
    varied = ec_actions[6][static_cast<size_t>(c)] !=
             ec_actions[7][static_cast<size_t>(c)];
  CHECK(varied);

  // with S_a = 1, TE and first-action coincide step by step
  DistillConfig cfg1 = cfg;
  cfg1.chunk_len = 1;
  auto model1 = ChunkPolicyModel<float>::create(cfg1, Rng(32));
  ChunkPolicyRunner te1(&model1, InferenceMode::temporal_ensemble,
                        Family::wheeled, cfg.te_k);
  ChunkPolicyRunner fa1(&model1, InferenceMode::first_action, Family::wheeled,
                        cfg.te_k);
  Rng orng(5);
  for (int t = 0; t < 8; ++t) {
    for (auto& v : obs) v = orng.uniform(-0.5, 0.5);
    auto a = te1.act(obs);
    auto b = fa1.act(obs);
    for (int c = 0; c < kUnifiedActionDim; ++c)
      CHECK(a[static_cast<size_t>(c)] ==
            Catch::Approx(b[static_cast<size_t>(c)]).margin(1e-12));
  }
}

TEST_CASE("chunk checkpoints round-trip") {
  DistillConfig cfg = tiny_distill_config();
  auto model = ChunkPolicyModel<float>::create(cfg, Rng(31));
  PipelineConfig pc;
  pc.distill = cfg;
  const std::string bytes = chunk_checkpoint_bytes(model, pc, 77, "mse");
  auto loaded = load_chunk_policy(bytes);
  CHECK(loaded.seed == 77);
  CHECK(loaded.loss_kind == "mse");
  CHECK(loaded.model.embed == cfg.embed_dim);

  std::vector<float> obs(static_cast<size_t>(cfg.obs_seq_len) * kUnifiedObsDim,
                         0.3f);
  std::vector<float> a(static_cast<size_t>(cfg.chunk_len) * kUnifiedActionDim);
  std::vector<float> b(a.size());
  model.forward(obs.data(), 1, a.data());
  loaded.model.forward(obs.data(), 1, b.data());
  for (size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_CASE("bc baseline: output width and overfit") {
  auto ds = synthetic_dataset(4, 16, 41);
  DistillConfig cfg = tiny_distill_config();
  cfg.epochs = 80;
  cfg.bc_hidden = {64};
  cfg.adam.lr = 1e-3;
  cfg.adam.weight_decay = 0.0;
  ThreadPool pool(2);
  auto bc = train_bc(ds, cfg, 3, pool);

  double mse = 0.0;
  int64_t count = 0;
  for (const auto& e : ds.episodes) {
    for (int t = 0; t < e.n_steps; ++t) {
      std::vector<float> x(
          e.obs.begin() + static_cast<int64_t>(t) * kUnifiedObsDim,
          e.obs.begin() + static_cast<int64_t>(t + 1) * kUnifiedObsDim);
      std::vector<float> y(static_cast<size_t>(kUnifiedActionDim));
      bc.mlp.forward(bc.ps, x.data(), 1, y.data());
      REQUIRE(y.size() == 14);
      for (int c = 0; c < kUnifiedActionDim; ++c) {
        const double d =
            y[static_cast<size_t>(c)] -
            e.actions[static_cast<int64_t>(t) * kUnifiedActionDim + c];
        mse += d * d;
        count += 1;
      }
    }
  }
  CHECK(mse / static_cast<double>(count) < 1e-3);
  ThreadPool pool1(1);
  CHECK_THROWS(train_bc(DemoDataset{}, cfg, 3, pool1));
}

TEST_CASE("collecting from a stationary expert honors the success rule") {
  // an untrained wheeled expert barely moves; with a huge success radius
  // every timeout episode counts as a success, with a tiny one none do
  PipelineConfig cfg;
  cfg.ppo.n_envs = 4;
  cfg.ppo.hidden = {8};
  cfg.distill.demo_level_min = 0;
  cfg.distill.demo_level_max = 0;
  cfg.rewards.episode_time = 0.64;  // 32-step episodes keep the test fast

  LoadedExpert expert;
  expert.config = cfg;
  expert.config.world.sigma_close = 100.0;
  expert.seed = 9;
  expert.policy = ExpertPolicy::create(
      Family::wheeled, expert_obs_dim(Family::wheeled, cfg.ppo.scan),
      cfg.ppo.hidden, cfg.ppo.log_std_init, Rng(9));

  auto ds = collect_demos(expert, 3, 55);
  REQUIRE(ds.episodes.size() == 3);
  for (const auto& e : ds.episodes) {
    CHECK(e.success);
    CHECK(e.n_steps == 32);
    // wheeled demos keep the articulated channels at zero
    for (int t = 0; t < e.n_steps; ++t)
      for (int c = 2; c < kUnifiedActionDim; ++c)
        CHECK(e.actions[static_cast<int64_t>(t) * kUnifiedActionDim + c] == 0.0f);
  }

  auto ds2 = collect_demos(expert, 3, 55);
  CHECK(dataset_to_bytes(ds) == dataset_to_bytes(ds2));

  CHECK_THROWS_AS(collect_demos(expert, 0, 1), std::invalid_argument);

  expert.config.world.sigma_close = 1e-9;
  expert.config.distill.starvation_window = 20;
  CHECK_THROWS_AS(collect_demos(expert, 3, 55), StarvationError);
}
