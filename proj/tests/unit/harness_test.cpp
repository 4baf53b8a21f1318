#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rro/errors.hpp"
#include "rro/harness.hpp"
#include "rro/reward.hpp"

namespace rro {
namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.suite_tasks = 6;
  c.suite_depth = 3;
  c.suite_branching = 3;
  c.suite_seed = 5;
  c.sft_epochs = 40;
  return c;
}

TEST(Stages, MatchesThirdsReference) {
  for (std::size_t n = 1; n <= 60; ++n) {
    for (std::size_t t = 1; t <= n; ++t) EXPECT_EQ(stage_of(t, n), testing::stage_ref(t, n));
  }
  EXPECT_THROW(stage_of(0, 3), InvalidArgumentError);
  EXPECT_THROW(stage_of(4, 3), InvalidArgumentError);
}

TEST(Stages, ContiguousBoundedPartition) {
  for (std::size_t n = 3; n <= 60; ++n) {
    std::array<std::size_t, 3> size{};
    int last = 1;
    for (std::size_t t = 1; t <= n; ++t) {
      const int s = stage_of(t, n);
      EXPECT_GE(s, last);
      EXPECT_LE(s - last, 1);
      last = s;
      ++size[s - 1];
    }
    EXPECT_EQ(size[0] + size[1] + size[2], n);
    for (auto k : size) EXPECT_LE(k, (n + 2) / 3);
  }
}

TEST(Rising, HandExample) {
  StageTally tally;
  const std::vector<double> r = {0.2, 0.5, 0.4, 0.6, 0.6, 0.9};
  tally_rising(0.3, r, Comparison::kStrict, tally);
  const auto a = proportions_of(tally);
  for (int s = 0; s < 3; ++s) {
    EXPECT_EQ(a.proportions[s], 0.5);
    EXPECT_EQ(a.n_actions[s], 2u);
  }
}

TEST(Rising, MonotoneSequences) {
  StageTally down, up;
  tally_rising(1.0, std::vector<double>{0.9, 0.9, 0.5, 0.2, 0.2, 0.0, 0.0}, Comparison::kStrict, down);
  tally_rising(0.0, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}, Comparison::kStrict, up);
  for (int s = 0; s < 3; ++s) {
    EXPECT_EQ(proportions_of(down).proportions[s], 0.0);
    EXPECT_EQ(proportions_of(up).proportions[s], 1.0);
  }
}

TEST(Rising, AnalysisProportionsInRange) {
  const auto env = make_tree_suite(4, 3, 3, 2);
  const auto fm = make_feature_map(env);
  const std::vector<double> theta(fm->dimension(), 0.0);
  const std::vector<std::size_t> tasks = {0, 1, 2, 3};
  for (auto src : {RewardSource::kOracle, RewardSource::kMonteCarlo}) {
    const auto a = rising_analysis(env, PolicyView(*fm, theta), tasks, 30, src, 16, 1);
    EXPECT_EQ(a.n_trajectories, 30u);
    EXPECT_EQ(a.n_actions[0] + a.n_actions[1] + a.n_actions[2], 90u);
    for (double p : a.proportions) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
  EXPECT_THROW(rising_analysis(env, PolicyView(*fm, theta), tasks, 0, RewardSource::kOracle, 1, 1),
               InvalidArgumentError);
}

TEST(Harness, NoneEqualsUniformOracleValue) {
  const auto config = small_config();
  const auto ws = make_workspace(config);
  const auto run = run_method_full(ws, config, Method::kNone, 1);
  const std::vector<double> zero(ws.features->dimension(), 0.0);
  double want = 0;
  for (auto task : ws.eval_tasks) {
    want += static_cast<double>(testing::value_ref(*ws.env, *ws.features, zero, ws.env->reset(task)));
  }
  want /= static_cast<double>(ws.eval_tasks.size());
  EXPECT_NEAR(run.result.avg_reward, want, 1e-12);
  EXPECT_EQ(run.result.avg_samples_per_step, 0.0);
  EXPECT_EQ(run.result.pairs_emitted, 0u);
}

TEST(Harness, NoiselessSftReachesOptimum) {
  auto config = small_config();
  config.expert_noise = 0.0;
  config.expert_per_task = 1;
  config.sft_epochs = 60;
  const auto ws = make_workspace(config);
  const auto* tree = dynamic_cast<const EnumTreeEnv*>(ws.env.get());
  ASSERT_NE(tree, nullptr);
  double best = 0;
  for (auto task : ws.eval_tasks) best += tree->best_value(task, 0);
  best /= static_cast<double>(ws.eval_tasks.size());
  EXPECT_NEAR(run_method_full(ws, config, Method::kSft, 3).result.avg_reward, best, 1e-12);
}

TEST(Harness, SampleAccountingMatchesCounter) {
  const auto config = small_config();
  const auto ws = make_workspace(config);
  const auto sft = run_sft_stage(ws, config, 1);
  for (auto m : {Method::kRro, Method::kFixedK, Method::kEto}) {
    auto c = config;
    c.method = m;
    const auto stage = run_collect_stage(ws, c, 1, sft.params);
    ASSERT_GT(stage.explored_steps, 0u);
    EXPECT_NEAR(stage.avg_samples_per_step(),
                static_cast<double>(stage.counted_evaluations) / static_cast<double>(stage.explored_steps),
                1e-12);
    const auto r = run_method_full(ws, c, m, 1).result;
    EXPECT_NEAR(r.avg_samples_per_step,
                static_cast<double>(r.candidate_evaluations) / static_cast<double>(r.explored_steps),
                1e-12);
    if (m == Method::kRro) {
      EXPECT_LE(r.avg_samples_per_step, static_cast<double>(config.k_max));
      EXPECT_GE(r.avg_samples_per_step, static_cast<double>(config.min_candidates));
    }
    if (m == Method::kFixedK) EXPECT_EQ(r.avg_samples_per_step, 5.0);
  }
}

TEST(Harness, CompareIsDeterministicAndShaped) {
  auto config = small_config();
  config.methods = {Method::kSft};
  config.seeds = {7};
  const auto rows = compare_methods(config);
  ASSERT_EQ(rows.size(), 1u);
  const auto csv = results_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n') + 1),
            "method,env,seed,avg_reward,avg_samples_per_step,pairs_emitted,wall_time_s\n");

  config.methods = {Method::kNone, Method::kSft, Method::kEto, Method::kFixedK, Method::kRro};
  config.seeds = {1, 2};
  const auto a = results_csv(compare_methods(config));
  const auto b = results_csv(compare_methods(config));
  EXPECT_EQ(a, b);
  config.workers = 4;
  EXPECT_EQ(results_csv(compare_methods(config)), a);
}

TEST(Harness, CompareMatchesIndividualRuns) {
  auto config = small_config();
  config.seeds = {4};
  const auto rows = compare_methods(config);
  const auto ws = make_workspace(config);
  ASSERT_EQ(rows.size(), config.methods.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(results_csv_row(rows[i]),
              results_csv_row(run_method_full(ws, config, config.methods[i], 4).result));
  }
}

TEST(Harness, OrderingOnDefaultSuite) {
  ExperimentConfig config;
  config.methods = {Method::kNone, Method::kSft, Method::kRro};
  const auto rows = compare_methods(config);
  EXPECT_GT(rows[1].avg_reward, rows[0].avg_reward);
  EXPECT_GE(rows[2].avg_reward, rows[1].avg_reward);
}

TEST(Harness, SweepShape) {
  auto config = small_config();
  const std::vector<std::size_t> ks = {2, 3, 4, 5};
  const auto a = efficiency_sweep(config, ks, 1);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a[i].method, Method::kFixedK);
    EXPECT_EQ(a[i].x_samples, static_cast<double>(ks[i]));
  }
  EXPECT_EQ(a[4].method, Method::kRro);
  EXPECT_EQ(curve_csv(a), curve_csv(efficiency_sweep(config, ks, 1)));
  EXPECT_THROW(efficiency_sweep(config, {}, 1), InvalidArgumentError);
}

TEST(Harness, TaskSplit) {
  auto config = small_config();
  config.n_train_tasks = 4;
  config.heldout_eval = true;
  const auto ws = make_workspace(config);
  EXPECT_EQ(ws.train_tasks, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(ws.eval_tasks, (std::vector<std::size_t>{4, 5}));
  config.n_train_tasks = 6;
  EXPECT_THROW(make_workspace(config), ConfigError);
}

TEST(Csv, SixDecimals) {
  EXPECT_EQ(format_fixed(0.5), "0.500000");
  EXPECT_EQ(format_fixed(1.0 / 3.0), "0.333333");
  RisingAnalysis a;
  a.proportions = {0.5, 0.25, 1.0};
  a.n_actions = {2, 4, 1};
  EXPECT_EQ(rising_csv(a),
            "stage,proportion,n_actions\ninitial,0.500000,2\nmiddle,0.250000,4\nfinal,1.000000,1\n");
}

}  // namespace
}  // namespace rro
