/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "crossnav/binio.hpp"
#include "crossnav/embodiment.hpp"
#include "crossnav/neural.hpp"
#include "crossnav/observe.hpp"
#include "crossnav/rewards.hpp"
#include "crossnav/worldgen.hpp"

namespace crossnav {

namespace detail {

struct ProbeVisitor {
  template <class U>
  void operator()(const char*, U&) const {}
};

template <typename T, typename = void>
struct is_visitable : std::false_type {};
template <typename T>
struct is_visitable<T, std::void_t<decltype(std::declval<T&>().fields(
                           ProbeVisitor{}))>> : std::true_type {};

template <typename U>
nlohmann::json field_to_json(U& f);

template <typename T>
nlohmann::json visitable_to_json(T& obj) {
  nlohmann::json j = nlohmann::json::object();
  obj.fields([&](const char* name, auto& field) {
    j[name] = field_to_json(field);
  });
  return j;
}

template <typename U>
nlohmann::json field_to_json(U& f) {
  if constexpr (is_visitable<U>::value) {
    return visitable_to_json(f);
  } else {
    return nlohmann::json(f);
  }
}

template <typename U>
void field_from_json(const nlohmann::json& j, U& f, const std::string& path);

/// Assigns matching keys and rejects unknown ones.
template <typename T>
void visitable_from_json(const nlohmann::json& j, T& obj,
                         const std::string& path) {
  if (!j.is_object())
    throw std::runtime_error("config section " + path + " must be an object");
  std::vector<std::string> known;
  obj.fields([&](const char* name, auto&) { known.emplace_back(name); });
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const auto& k : known)
      if (k == item.key()) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::runtime_error("unknown config key: " + path + item.key());
  }
  obj.fields([&](const char* name, auto& field) {
    if (j.contains(name)) field_from_json(j.at(name), field, path + name + ".");
  });
}

template <typename U>
void field_from_json(const nlohmann::json& j, U& f, const std::string& path) {
  if constexpr (is_visitable<U>::value) {
    visitable_from_json(j, f, path);
  } else {
    j.get_to(f);
  }
}

}  // namespace detail

/// Stage-1 (expert PPO training) configuration.
struct PpoConfig {
  int n_envs = 64;
  int n_updates = 300;
  int horizon = 64;
  int minibatches = 4;
  int epochs = 5;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;
  double log_std_init = -0.5;
  nn::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8, 0.0};
  std::vector<int> hidden{128, 128};
  int n_embodiments = 0;  // 0: one embodiment per env
  ObsScales obs_scales;
  ScanWindow scan;
  bool push_enabled = true;     // articulated families only
  bool noise_enabled = true;
  int probe_episodes = 32;
  std::vector<int> probe_levels{0, 1};
  int probe_interval = 50;
  int grad_chunks = 8;

  template <class V>
  void fields(V&& v) {
    v("n_envs", n_envs);
    v("n_updates", n_updates);
    v("horizon", horizon);
    v("minibatches", minibatches);
    v("epochs", epochs);
    v("gamma", gamma);
    v("gae_lambda", gae_lambda);
    v("clip", clip);
    v("entropy_coef", entropy_coef);
    v("value_coef", value_coef);
    v("max_grad_norm", max_grad_norm);
    v("log_std_init", log_std_init);
    v("adam", adam);
    v("hidden", hidden);
    v("n_embodiments", n_embodiments);
    v("obs_scales", obs_scales);
    v("scan", scan);
    v("push_enabled", push_enabled);
    v("noise_enabled", noise_enabled);
    v("probe_episodes", probe_episodes);
    v("probe_levels", probe_levels);
    v("probe_interval", probe_interval);
    v("grad_chunks", grad_chunks);
  }
};

/// Stage-2 (demonstration collection + distillation) configuration.
struct DistillConfig {
  int n_demos = 256;  // per expert policy
  int demo_level_min = 0;
  int demo_level_max = 2;
  bool demo_noise = true;
  double starvation_min_rate = 0.05;
  int starvation_window = 100;
  int chunk_len = 6;      // S_a
  int obs_seq_len = 4;    // S_o
  int history_frames = 5; // N_hist
  int n_rays = 128;
  double ray_min = 0.2;
  double ray_max = 8.0;
  double fov = 1.5707963267948966;  // 90 deg
  int embed_dim = 128;
  int layers = 2;
  int heads = 4;
  int ff_dim = 256;
  int batch_size = 256;
  int epochs = 12;
  int windows_per_epoch = 24000;  // 0: every window each epoch
  nn::AdamConfig adam{1e-4, 0.9, 0.999, 1e-8, 1e-3};
  double te_k = 0.01;
  std::string loss = "mse";  // or "l1"
  std::vector<int> bc_hidden{256, 128};
  int grad_chunks = 8;

  template <class V>
  void fields(V&& v) {
    v("n_demos", n_demos);
    v("demo_level_min", demo_level_min);
    v("demo_level_max", demo_level_max);
    v("demo_noise", demo_noise);
    v("starvation_min_rate", starvation_min_rate);
    v("starvation_window", starvation_window);
    v("chunk_len", chunk_len);
    v("obs_seq_len", obs_seq_len);
    v("history_frames", history_frames);
    v("n_rays", n_rays);
    v("ray_min", ray_min);
    v("ray_max", ray_max);
    v("fov", fov);
    v("embed_dim", embed_dim);
    v("layers", layers);
    v("heads", heads);
    v("ff_dim", ff_dim);
    v("batch_size", batch_size);
    v("epochs", epochs);
    v("windows_per_epoch", windows_per_epoch);
    v("adam", adam);
    v("te_k", te_k);
    v("loss", loss);
    v("bc_hidden", bc_hidden);
    v("grad_chunks", grad_chunks);
  }
};

/// Trial/metric configuration.
struct EvalConfig {
  int n_trials = 100;
  int horizon_steps = 750;
  double success_radius = 0.5;
  double astar_resolution = 0.1;
  std::vector<int> eval_levels{0, 1, 2};
  bool svg_plots = false;
  std::vector<int> scalability_counts{8, 32, 128};
  int scalability_updates = 120;  // reduced expert budget inside the suite

  template <class V>
  void fields(V&& v) {
    v("n_trials", n_trials);
    v("horizon_steps", horizon_steps);
    v("success_radius", success_radius);
    v("astar_resolution", astar_resolution);
    v("eval_levels", eval_levels);
    v("svg_plots", svg_plots);
    v("scalability_counts", scalability_counts);
    v("scalability_updates", scalability_updates);
  }
};

/// Whole-pipeline configuration with "desk" and "paper" scale presets.
/// Reward/embodiment/domain-randomization constants carry the published
/// values in both presets; only the scale knobs differ.
struct PipelineConfig {
  std::string preset = "desk";
  uint64_t master_seed = 0;
  double dt = 0.02;
  std::string out_dir = "out";
  WorldConfig world;
  EmbodimentConfig embodiment;
  RewardConfig rewards;
  PpoConfig ppo;
  DistillConfig distill;
  EvalConfig eval;

  template <class V>
  void fields(V&& v) {
    v("preset", preset);
    v("master_seed", master_seed);
    v("dt", dt);
    v("out_dir", out_dir);
    v("world", world);
    v("embodiment", embodiment);
    v("rewards", rewards);
    v("ppo", ppo);
    v("distill", distill);
    v("eval", eval);
  }

  /// Training episode length in control steps (T / dt).
  int episode_steps() const {
    return static_cast<int>(std::llround(rewards.episode_time / dt));
  }

  static PipelineConfig desk() { return PipelineConfig{}; }

  static PipelineConfig paper() {
    PipelineConfig c;
    c.preset = "paper";
    c.world.grid_rows = 6;
    c.world.grid_cols = 64;
    c.ppo.n_envs = 4096;
    c.ppo.n_updates = 4000;
    c.ppo.horizon = 6;  // batch size 24576 = 4096 envs x 6 steps
    c.ppo.hidden = {1024, 512, 256};
    c.distill.n_demos = 4096;
    c.distill.embed_dim = 256;
    c.distill.layers = 4;
    c.distill.heads = 4;
    c.distill.ff_dim = 1280;
    c.distill.epochs = 100;
    c.distill.windows_per_epoch = 0;
    c.eval.n_trials = 3000;
    c.eval.scalability_counts = {128, 1024, 4096};
    return c;
  }

  static PipelineConfig from_preset(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "paper") return paper();
    throw std::invalid_argument("unknown preset: " + name);
  }
};

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  return detail::visitable_to_json(copy);
}

/// Strict loader: starts from the preset named in the file (default desk)
/// and applies overrides; unknown keys are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg = PipelineConfig::from_preset(j.value("preset", "desk"));
  detail::visitable_from_json(j, cfg, "");
  return cfg;
}

inline void save_config(const PipelineConfig& cfg,
                        const std::filesystem::path& path) {
  write_file(path, config_to_json(cfg).dump(2) + "\n");
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return config_from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace crossnav
