/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#include <filesystem>

#include "catch_amalgamated.hpp"
#include "crossnav/config.hpp"

using namespace crossnav;

TEST_CASE("config round-trips through json exactly") {
  PipelineConfig cfg = PipelineConfig::desk();
  auto j1 = config_to_json(cfg);
  PipelineConfig cfg2 = config_from_json(j1);
  auto j2 = config_to_json(cfg2);
  CHECK(j1.dump() == j2.dump());

  PipelineConfig paper = PipelineConfig::paper();
  auto jp = config_to_json(paper);
  CHECK(config_to_json(config_from_json(jp)).dump() == jp.dump());
}

TEST_CASE("unknown config keys are rejected with a path") {
  auto j = config_to_json(PipelineConfig::desk());
  j["wold"] = 1;  // typo
  CHECK_THROWS_WITH(config_from_json(j),
                    Catch::Matchers::ContainsSubstring("wold"));
  j.erase("wold");
  j["rewards"]["c1_softt"] = 10;
  CHECK_THROWS_WITH(config_from_json(j),
                    Catch::Matchers::ContainsSubstring("rewards.c1_softt"));
}

TEST_CASE("overrides apply on top of the named preset") {
  nlohmann::json j{{"preset", "paper"}, {"master_seed", 7}};
  auto cfg = config_from_json(j);
  CHECK(cfg.ppo.n_envs == 4096);
  CHECK(cfg.master_seed == 7);

  nlohmann::json j2{{"preset", "desk"},
                    {"ppo", {{"n_envs", 16}}}};
  auto cfg2 = config_from_json(j2);
  CHECK(cfg2.ppo.n_envs == 16);
  CHECK(cfg2.ppo.n_updates == 300);  // untouched desk default

  CHECK_THROWS(PipelineConfig::from_preset("galaxy"));
}

TEST_CASE("episode steps derive from the episode time and control step") {
  PipelineConfig cfg;
  CHECK(cfg.episode_steps() == 400);  // 8 s / 0.02 s
  cfg.rewards.episode_time = 4.0;
  CHECK(cfg.episode_steps() == 200);
}

TEST_CASE("paper preset carries the published scale values") {
  PipelineConfig paper = PipelineConfig::paper();
  CHECK(paper.world.grid_rows == 6);
  CHECK(paper.world.grid_cols == 64);
  CHECK(paper.ppo.n_envs == 4096);
  CHECK(paper.ppo.n_updates == 4000);
  CHECK(paper.ppo.n_envs * paper.ppo.horizon == 24576);  // published batch
  CHECK(paper.ppo.hidden == std::vector<int>{1024, 512, 256});
  CHECK(paper.distill.n_demos == 4096);
  CHECK(paper.distill.embed_dim == 256);
  CHECK(paper.distill.layers == 4);
  CHECK(paper.distill.heads == 4);
  CHECK(paper.distill.epochs == 100);
  CHECK(paper.eval.n_trials == 3000);
}

TEST_CASE("config files save and load through the filesystem") {
  namespace fs = std::filesystem;
  const fs::path tmp = fs::temp_directory_path() / "crossnav_cfg_test.json";
  PipelineConfig cfg;
  cfg.master_seed = 123;
  save_config(cfg, tmp);
  auto loaded = load_config(tmp);
  CHECK(loaded.master_seed == 123);
  CHECK(config_to_json(loaded).dump() == config_to_json(cfg).dump());
  fs::remove(tmp);
}
