#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "rro/enum_tree_env.hpp"
#include "rro/errors.hpp"
#include "rro/shop_env.hpp"

namespace rro {
namespace {

using testing::enumerate_paths;
using testing::hand_tree;
using testing::small_shop;

TEST(EnumTree, ResetGivesRoot) {
  const auto env = hand_tree();
  const auto s = env.reset(0);
  EXPECT_EQ(s.state_id, 0u);
  EXPECT_EQ(s.step_index, 0);
  EXPECT_FALSE(s.terminal);
  EXPECT_EQ(env.reset(env.task(0)), s);
}

TEST(EnumTree, UnknownTaskThrows) {
  const auto env = hand_tree();
  EXPECT_THROW(env.task_index("nope"), UnknownTaskError);
  EXPECT_THROW(env.reset(TaskInstance{"nope", {}, 2}), UnknownTaskError);
  EXPECT_THROW(env.reset(5), UnknownTaskError);
}

TEST(EnumTree, LegalActionsInFixedOrder) {
  const EnumTreeEnv env(2, 3, {std::vector<double>(9, 0.5)});
  EXPECT_EQ(env.legal_actions(env.reset(0)), (std::vector<ActionId>{0, 1, 2}));
  auto s = env.reset(0);
  s = env.transition(s, 2).next;
  s = env.transition(s, 1).next;
  EXPECT_TRUE(s.terminal);
  EXPECT_TRUE(env.legal_actions(s).empty());
}

TEST(EnumTree, BreadthFirstNumbering) {
  const EnumTreeEnv env(2, 2, {{0, 0, 0, 0}});
  EXPECT_EQ(env.child(0, 0), 1u);
  EXPECT_EQ(env.child(0, 1), 2u);
  EXPECT_EQ(env.child(1, 0), 3u);
  EXPECT_EQ(env.child(2, 1), 6u);
  EXPECT_EQ(env.internal_nodes(), 3u);
  EXPECT_EQ(env.node_depth(env.transition(env.reset(0), 0).next.state_id), 1);
}

TEST(EnumTree, IllegalActionThrows) {
  const auto env = hand_tree();
  EXPECT_THROW(env.transition(env.reset(0), 2), IllegalActionError);
  EXPECT_THROW(env.transition(env.reset(0), -1), IllegalActionError);
}

TEST(EnumTree, LeafRewardLookup) {
  const auto env = hand_tree();
  const auto t = env.replay(0, std::vector<ActionId>{1, 0});
  EXPECT_TRUE(t.terminal());
  EXPECT_DOUBLE_EQ(env.outcome_reward(t), 0.5);
  EXPECT_DOUBLE_EQ(env.outcome_reward(env.replay(0, std::vector<ActionId>{0, 1})), 0.0);
}

TEST(EnumTree, TruncationScoresZero) {
  const EnumTreeEnv env(2, 2, {{1, 1, 1, 1}}, 1);
  const auto t = env.replay(0, std::vector<ActionId>{0});
  EXPECT_TRUE(t.terminal());
  EXPECT_DOUBLE_EQ(env.outcome_reward(t), 0.0);
}

TEST(EnumTree, StepAtLimitIsTerminal) {
  const EnumTreeEnv env(3, 2, {std::vector<double>(8, 1.0)}, 2);
  auto s = env.reset(0);
  s = env.transition(s, 0).next;
  EXPECT_EQ(s.step_index, 1);
  EXPECT_TRUE(env.transition(s, 1).next.terminal);
}

TEST(EnumTree, OutcomeRewardNeedsTerminalTrajectory) {
  const auto env = hand_tree();
  EXPECT_THROW(env.outcome_reward(env.replay(0, std::vector<ActionId>{0})), InvalidArgumentError);
}

TEST(EnumTree, StateKeyRoundTrip) {
  const auto env = hand_tree();
  const auto t = env.replay(0, std::vector<ActionId>{1, 1});
  for (const auto& s : t.states) EXPECT_EQ(env.parse_state_key(env.state_key(s)), s);
}

TEST(EnumTree, ActionNamesRoundTrip) {
  const EnumTreeEnv env(1, 4, {{0, 0, 0, 0}});
  for (ActionId a = 0; a < 4; ++a) EXPECT_EQ(env.parse_action(env.action_name(a)), a);
  EXPECT_THROW(env.parse_action("b1"), ParseError);
}

TEST(EnumTree, RejectsBadShapes) {
  EXPECT_THROW(EnumTreeEnv(0, 2, {{0}}), InvalidArgumentError);
  EXPECT_THROW(EnumTreeEnv(9, 2, {{0}}), InvalidArgumentError);
  EXPECT_THROW(EnumTreeEnv(1, 7, {std::vector<double>(7, 0)}), InvalidArgumentError);
  EXPECT_THROW(EnumTreeEnv(2, 2, {{0, 0, 0}}), InvalidArgumentError);
  EXPECT_THROW(EnumTreeEnv(1, 2, {{0, 1.5}}), InvalidArgumentError);
}

TEST(EnumTree, ExhaustivePathCountIsBToTheD) {
  std::mt19937_64 gen(1);
  for (int d = 1; d <= 4; ++d) {
    for (int b = 1; b <= 3; ++b) {
      const auto env = testing::random_tree(d, b, 2, gen);
      for (std::size_t task = 0; task < 2; ++task) {
        std::size_t paths = 0;
        std::set<std::uint64_t> leaves;
        std::vector<ActionId> prefix;
        enumerate_paths(env, env.reset(task), prefix,
                        [&](const std::vector<ActionId>& acts, const EnvState& end) {
                          ++paths;
                          leaves.insert(end.state_id);
                          EXPECT_EQ(acts.size(), static_cast<std::size_t>(d));
                          const double r = env.terminal_reward(end);
                          EXPECT_GE(r, 0.0);
                          EXPECT_LE(r, 1.0);
                        });
        EXPECT_EQ(paths, env.leaf_count());
        EXPECT_EQ(leaves.size(), env.leaf_count());
      }
    }
  }
}

TEST(EnumTree, ExpertReachesBestLeaf) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto env = testing::random_tree(1 + trial % 4, 1 + trial % 3, 3, gen);
    for (std::size_t task = 0; task < 3; ++task) {
      auto t = env.start(task);
      while (!t.terminal()) env.extend(t, env.expert_action(t.end_state()));
      const auto& leaves = env.leaf_rewards(task);
      EXPECT_DOUBLE_EQ(env.outcome_reward(t), *std::max_element(leaves.begin(), leaves.end()));
    }
  }
}

TEST(EnumTree, SuiteIsSeededAndOnGrid) {
  const auto a = make_tree_suite(5, 3, 2, 77);
  const auto b = make_tree_suite(5, 3, 2, 77);
  ASSERT_EQ(a.tasks().size(), 5u);
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_EQ(a.leaf_rewards(t), b.leaf_rewards(t));
    for (double r : a.leaf_rewards(t)) EXPECT_DOUBLE_EQ(r * 20, std::round(r * 20));
  }
  EXPECT_NE(make_tree_suite(5, 3, 2, 78).leaf_rewards(0), a.leaf_rewards(0));
}

TEST(ShopSim, StartStateIsLandingPage) {
  const auto env = small_shop();
  const auto s = env.reset(0);
  EXPECT_EQ(s.step_index, 0);
  EXPECT_FALSE(s.terminal);
  EXPECT_EQ(env.task(0).instruction.size(), 3u);
  const auto page = ShopSimEnv::page(s);
  EXPECT_EQ(page.constraints, 0u);
  EXPECT_EQ(page.selected, -1);
  EXPECT_TRUE(env.results(s).empty());
}

TEST(ShopSim, SearchFilterSelectBuy) {
  const auto env = small_shop();
  using K = ShopSimEnv::ActionKind;
  auto t = env.start(2);
  env.extend(t, env.parse_action("search:wool"));
  EXPECT_EQ(env.results(t.end_state()), (std::vector<std::size_t>{1, 3}));
  env.extend(t, env.encode(K::kFilter, 0));  // blue
  EXPECT_EQ(env.results(t.end_state()), (std::vector<std::size_t>{3}));
  env.extend(t, env.parse_action("select:i3"));
  EXPECT_EQ(ShopSimEnv::page(t.end_state()).selected, 3);
  env.extend(t, env.parse_action("buy"));
  EXPECT_TRUE(t.terminal());
  EXPECT_TRUE(env.legal_actions(t.end_state()).empty());
  EXPECT_DOUBLE_EQ(env.outcome_reward(t), 2.0 / 3.0);
}

TEST(ShopSim, BuyRequiresSelection) {
  const auto env = small_shop();
  const auto legal = env.legal_actions(env.reset(0));
  EXPECT_EQ(std::count(legal.begin(), legal.end(), env.parse_action("buy")), 0);
  EXPECT_THROW(env.transition(env.reset(0), env.parse_action("buy")), IllegalActionError);
}

TEST(ShopSim, RunningOutOfStepsScoresZero) {
  const auto env = small_shop(2);
  auto t = env.start(0);
  env.extend(t, env.parse_action("search:red"));
  env.extend(t, env.parse_action("select:i1"));
  EXPECT_TRUE(t.terminal());
  EXPECT_DOUBLE_EQ(env.outcome_reward(t), 0.0);
}

TEST(ShopSim, ActionNamesRoundTrip) {
  const auto env = small_shop();
  const auto n = static_cast<ActionId>(2 * env.attribute_count() + env.item_count() + 1);
  for (ActionId a = 0; a < n; ++a) EXPECT_EQ(env.parse_action(env.action_name(a)), a);
  EXPECT_THROW(env.parse_action("search:green"), ParseError);
  EXPECT_THROW(env.parse_action("dance"), ParseError);
}

TEST(ShopSim, ExpertBuysBestItem) {
  const auto env = small_shop();
  for (std::size_t task = 0; task < env.tasks().size(); ++task) {
    double best = 0;
    for (std::size_t i = 0; i < env.item_count(); ++i) best = std::max(best, env.match_fraction(task, i));
    auto t = env.start(task);
    while (!t.terminal()) env.extend(t, env.expert_action(t.end_state()));
    EXPECT_DOUBLE_EQ(env.outcome_reward(t), best) << "task " << task;
  }
}

TEST(ShopSim, FuzzedRolloutsStayInRangeAndReplay) {
  const auto env = small_shop(5);
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t task = trial % env.tasks().size();
    auto t = env.start(task);
    while (!t.terminal()) {
      const auto legal = env.legal_actions(t.end_state());
      ASSERT_FALSE(legal.empty());
      env.extend(t, legal[gen() % legal.size()]);
    }
    const double r = env.outcome_reward(t);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
    const auto again = env.replay(task, t.actions());
    EXPECT_EQ(again.steps, t.steps);
  }
}

TEST(ExpertDataset, NoiselessFollowsExpert) {
  const auto env = hand_tree();
  const std::vector<std::size_t> tasks = {0};
  const auto data = generate_expert_dataset(env, tasks, 0.0, 5, 3);
  ASSERT_EQ(data.size(), 3u);
  for (const auto& t : data) EXPECT_DOUBLE_EQ(env.outcome_reward(t), 1.0);
}

TEST(ExpertDataset, NoiseIsSeeded) {
  const auto env = make_tree_suite(4, 3, 3, 1);
  const std::vector<std::size_t> tasks = {0, 1, 2, 3};
  const auto a = generate_expert_dataset(env, tasks, 0.1, 9, 2);
  const auto b = generate_expert_dataset(env, tasks, 0.1, 9, 2);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].steps, b[i].steps);
  EXPECT_THROW(generate_expert_dataset(env, tasks, 1.0, 9), InvalidArgumentError);
  EXPECT_THROW(generate_expert_dataset(env, tasks, -0.1, 9), InvalidArgumentError);
}

}  // namespace
}  // namespace rro
