/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */

// Command-line front end for the cross-embodiment navigation pipeline:
//   train-expert   stage-1 PPO expert training
//   collect        success-only demonstration collection
//   distill        chunked-action policy distillation
//   evaluate       trial, ablation and scalability suites
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure,
// 3 divergence/starvation abort.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "crossnav/config.hpp"
#include "crossnav/distill.hpp"
#include "crossnav/evalharness.hpp"
#include "crossnav/expert_rl.hpp"
#include "crossnav/parallel.hpp"

namespace fs = std::filesystem;
using namespace crossnav;

namespace {

fs::path resolve_out(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  const char* root = std::getenv("CROSSNAV_OUT_ROOT");
  if (root != nullptr && *root != '\0') return fs::path(root) / p;
  return p;
}

PipelineConfig load_cfg(const std::string& config_file,
                        const std::string& preset) {
  if (!config_file.empty()) {
    PipelineConfig cfg = load_config(config_file);
    if (!preset.empty() && preset != cfg.preset)
      throw std::runtime_error("--preset conflicts with the config file");
    return cfg;
  }
  return PipelineConfig::from_preset(preset.empty() ? "desk" : preset);
}

struct CommonOpts {
  std::string config_file;
  std::string preset;
  uint64_t seed = 0;
  std::string out = "out";
  int threads = 0;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_config = true) {
  if (with_config) {
    cmd->add_option("--config", o.config_file, "pipeline config file (json)");
    cmd->add_option("--preset", o.preset, "scale preset: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
  }
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory or file");
  cmd->add_option("--threads", o.threads, "worker thread cap (0: all cores)");
  cmd->add_flag("--verbose", o.verbose, "progress output");
}

int cmd_train_expert(const CommonOpts& o, const std::string& family_str) {
  PipelineConfig cfg = load_cfg(o.config_file, o.preset);
  const Family family = family_from_string(family_str);
  ThreadPool& pool = global_pool(o.threads);

  auto result = train_expert(family, cfg, o.seed, pool, o.verbose);
  const fs::path dir = resolve_out(o.out);
  const std::string stem =
      "expert_" + family_str + "_seed" + std::to_string(o.seed);
  const fs::path ckpt = dir / (stem + ".ckpt");
  write_artifact(ckpt, expert_checkpoint_bytes(result.policy, cfg, o.seed));
  write_artifact(dir / (stem + "_log.csv"), train_log_csv(result.log));
  std::printf("checkpoint: %s\nfinal probe SR: %.3f\n", ckpt.c_str(),
              result.final_probe_sr);
  return 0;
}

int cmd_collect(const CommonOpts& o, const std::string& expert_path, int n) {
  auto expert = load_expert(read_file(expert_path));
  auto dataset = collect_demos(expert, n, o.seed, o.verbose);
  fs::path out = resolve_out(o.out);
  if (out.extension().empty())
    out /= "demos_" + to_string(expert.policy.family) + "_seed" +
           std::to_string(o.seed) + ".bin";
  write_artifact(out, dataset_to_bytes(dataset));
  std::printf("dataset: %s (%zu episodes, %lld steps)\n", out.c_str(),
              dataset.episodes.size(),
              static_cast<long long>(dataset.total_steps()));
  return 0;
}

DemoDataset merge_datasets(const std::vector<std::string>& paths) {
  DemoDataset merged;
  bool first = true;
  for (const auto& path : paths) {
    auto ds = dataset_from_bytes(read_file(path));
    if (first) {
      merged = std::move(ds);
      first = false;
    } else {
      check_dataset_compatible(merged, ds);
      for (auto& e : ds.episodes) merged.episodes.push_back(std::move(e));
    }
  }
  return merged;
}

int cmd_distill(const CommonOpts& o, const std::vector<std::string>& datasets,
                const std::string& loss, bool bc_baseline) {
  PipelineConfig cfg = load_cfg(o.config_file, o.preset);
  if (!loss.empty()) cfg.distill.loss = loss;
  ThreadPool& pool = global_pool(o.threads);

  DemoDataset merged = merge_datasets(datasets);
  std::printf("merged %zu episodes (%lld steps)\n", merged.episodes.size(),
              static_cast<long long>(merged.total_steps()));

  const fs::path dir = resolve_out(o.out);
  if (bc_baseline) {
    auto bc = train_bc(merged, cfg.distill, o.seed, pool);
    nlohmann::json meta{{"obs_dim", bc.obs_dim},
                        {"hidden", cfg.distill.bc_hidden},
                        {"seed", o.seed},
                        {"config", config_to_json(cfg)}};
    const fs::path ckpt = dir / ("bc_seed" + std::to_string(o.seed) + ".ckpt");
    write_artifact(ckpt, nn::save_parameters(bc.ps, meta, "bc"));
    std::printf("checkpoint: %s\n", ckpt.c_str());
    return 0;
  }

  auto result = train_chunk_policy(merged, cfg.distill, o.seed, pool, o.verbose);
  const std::string stem =
      "chunk_" + cfg.distill.loss + "_seed" + std::to_string(o.seed);
  const fs::path ckpt = dir / (stem + ".ckpt");
  write_artifact(ckpt, chunk_checkpoint_bytes(result.model, cfg, o.seed,
                                              cfg.distill.loss));
  write_artifact(dir / (stem + "_loss.csv"), loss_curve_csv(result.loss_curve));
  std::printf("checkpoint: %s\nfinal loss: %.6g\n", ckpt.c_str(),
              result.loss_curve.back());
  return 0;
}

int cmd_evaluate(const CommonOpts& o, const std::string& policy_path,
                 const std::string& suite, const std::string& mode_str,
                 const std::vector<std::string>& families, int n_trials,
                 const std::vector<std::string>& datasets) {
  ThreadPool& pool = global_pool(o.threads);
  const fs::path dir = resolve_out(o.out);

  if (suite == "ablation" || suite == "scalability") {
    PipelineConfig cfg = load_cfg(o.config_file, o.preset);
    if (n_trials > 0) cfg.eval.n_trials = n_trials;
    if (suite == "ablation") {
      if (datasets.empty())
        throw CLI::ValidationError("--dataset required for the ablation suite");
      DemoDataset merged = merge_datasets(datasets);
      auto rows = ablation_suite(merged, cfg, o.seed, pool, o.verbose);
      write_artifact(dir / "ablation.csv", ablation_csv(rows));
      std::printf("%s", ablation_csv(rows).c_str());
    } else {
      auto rows = scalability_suite(cfg, o.seed, pool, o.verbose);
      write_artifact(dir / "scalability.csv", scalability_csv(rows));
      std::printf("%s", scalability_csv(rows).c_str());
    }
    return 0;
  }
  if (suite != "trials") throw CLI::ValidationError("unknown suite: " + suite);
  if (policy_path.empty())
    throw CLI::ValidationError("--policy required for the trials suite");

  const std::string bytes = read_file(policy_path);
  Container c = container_from_bytes(bytes, "crossnav-checkpoint");
  const std::string kind = c.header.at("kind").get<std::string>();

  std::string summary;
  auto run_one = [&](Family family, const AgentFactory& factory,
                     const PipelineConfig& cfg) {
    const int trials = n_trials > 0 ? n_trials : cfg.eval.n_trials;
    auto report = run_trials(factory, family, cfg, trials, o.seed, pool);
    const std::string name = "trials_" + to_string(family);
    write_artifact(dir / (name + ".csv"), trial_report_csv(report));
    summary += trial_summary_text(report);
    if (cfg.eval.svg_plots) {
      // replay the first trial for a quick visual check
      auto agent = factory();
      agent->reset();
      Rng seeder = Rng(o.seed).child("trials");
      Rng trial_rng(seeder.next_u64());
      const int level = cfg.eval.eval_levels[0];
      const ObstacleKind okind =
          static_cast<ObstacleKind>(trial_rng.uniform_int(3));
      WorldInstance world = generate_subfield(
          okind, level, {cfg.world.subfield_size, cfg.world.subfield_size},
          Rng(trial_rng.next_u64()), cfg.world, family == Family::wheeled);
      Rng embod_rng = trial_rng.child("embodiment");
      EpisodeRandomization er;
      Episode ep = make_episode(
          world, sample_embodiment(family, embod_rng, cfg.embodiment), er,
          trial_rng.child("episode"), cfg.eval.horizon_steps, cfg.dt,
          cfg.embodiment);
      ep.lambda_steps = cfg.episode_steps();
      std::vector<Vec2> traj{ep.state.position};
      while (ep.status == EpisodeStatus::running) {
        auto action = agent->act(ep);
        step_episode(ep, action.data(), cfg.embodiment);
        traj.push_back(ep.state.position);
      }
      write_file(dir / (name + ".svg"), trajectory_svg(ep.world, traj));
    }
  };

  if (kind == "expert") {
    auto expert = std::make_shared<LoadedExpert>(load_expert(bytes));
    run_one(expert->policy.family,
            [expert] { return std::make_unique<ExpertAgent>(expert.get()); },
            expert->config);
  } else if (kind == "chunk") {
    auto policy = std::make_shared<LoadedChunkPolicy>(load_chunk_policy(bytes));
    const InferenceMode mode =
        inference_mode_from_string(mode_str.empty() ? "auto" : mode_str);
    std::vector<Family> fams;
    if (families.empty()) {
      fams = {Family::wheeled, Family::small_articulated,
              Family::large_articulated};
    } else {
      for (const auto& f : families) fams.push_back(family_from_string(f));
    }
    for (Family family : fams)
      run_one(family,
              [policy, mode, family] {
                return std::make_unique<ChunkAgent>(policy.get(), mode, family);
              },
              policy->config);
  } else {
    throw std::runtime_error("cannot evaluate checkpoint kind: " + kind);
  }
  write_artifact(dir / "summary.txt", summary);
  std::printf("%s", summary.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-embodiment navigation pipeline"};
  app.require_subcommand(1);

  CommonOpts train_opts, collect_opts, distill_opts, eval_opts;

  auto* train = app.add_subcommand("train-expert", "train a stage-1 expert");
  std::string family;
  train
      ->add_option("--family", family,
                   "wheeled | small_articulated | large_articulated")
      ->required()
      ->check(CLI::IsMember(
          {"wheeled", "small_articulated", "large_articulated"}));
  add_common(train, train_opts);

  auto* collect = app.add_subcommand("collect", "collect demonstrations");
  std::string expert_path;
  int n_demos = 0;
  collect->add_option("--expert", expert_path, "expert checkpoint")->required();
  collect->add_option("--n", n_demos, "number of demonstrations")->required();
  add_common(collect, collect_opts, false);

  auto* distill = app.add_subcommand("distill", "train the unified policy");
  std::vector<std::string> dataset_paths;
  std::string loss;
  bool bc_baseline = false;
  distill->add_option("--dataset", dataset_paths, "demo dataset file(s)")
      ->required();
  distill->add_option("--loss", loss, "mse | l1")
      ->check(CLI::IsMember({"mse", "l1"}));
  distill->add_flag("--bc", bc_baseline, "train the BC baseline instead");
  add_common(distill, distill_opts);

  auto* evaluate = app.add_subcommand("evaluate", "run an evaluation suite");
  std::string policy_path, suite = "trials", mode;
  std::vector<std::string> eval_families, eval_datasets;
  int n_trials = 0;
  evaluate->add_option("--policy", policy_path, "checkpoint to evaluate");
  evaluate->add_option("--suite", suite, "trials | ablation | scalability")
      ->check(CLI::IsMember({"trials", "ablation", "scalability"}));
  evaluate
      ->add_option("--mode", mode, "auto | te | first_action | execute_chunk")
      ->check(CLI::IsMember({"auto", "te", "first_action", "execute_chunk"}));
  evaluate->add_option("--family", eval_families, "families to evaluate");
  evaluate->add_option("--n-trials", n_trials, "trials per family");
  evaluate->add_option("--dataset", eval_datasets,
                       "demo dataset(s) for the ablation suite");
  add_common(evaluate, eval_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train_expert(train_opts, family);
    if (*collect) return cmd_collect(collect_opts, expert_path, n_demos);
    if (*distill)
      return cmd_distill(distill_opts, dataset_paths, loss, bc_baseline);
    if (*evaluate)
      return cmd_evaluate(eval_opts, policy_path, suite, mode, eval_families,
                          n_trials, eval_datasets);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const StarvationError& e) {
    std::cerr << "collection starved: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
