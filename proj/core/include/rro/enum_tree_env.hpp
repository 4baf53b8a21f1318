#pragma once

#include <optional>
#include <vector>

#include "rro/env.hpp"

namespace rro {

// Layered acyclic tree of depth D and branching B. Every task shares the
// topology and carries its own B^D leaf rewards. Nodes are numbered in
// breadth-first order, so internal nodes occupy ids [0, internal_nodes()).
class EnumTreeEnv final : public Environment {
 public:
  static constexpr int kMaxDepth = 8;
  static constexpr int kMaxBranching = 6;

  // One leaf-reward table per task. max_steps defaults to the depth; a smaller
  // limit truncates episodes before they reach a leaf.
  EnumTreeEnv(int depth, int branching, std::vector<std::vector<double>> leaf_rewards,
              std::optional<int> max_steps = std::nullopt);

  std::string_view kind() const override { return "tree"; }

  std::vector<ActionId> legal_actions(const EnvState& state) const override;
  double terminal_reward(const EnvState& state) const override;
  ActionId expert_action(const EnvState& state) const override;
  std::string action_name(ActionId action) const override;
  ActionId parse_action(std::string_view name) const override;
  bool enumerable() const override { return true; }

  int depth() const { return depth_; }
  int branching() const { return branching_; }
  std::size_t internal_nodes() const { return offsets_[depth_]; }
  std::size_t leaf_count() const { return leaf_count_; }

  int node_depth(std::uint64_t node) const;
  std::uint64_t child(std::uint64_t node, ActionId action) const;
  bool is_leaf(std::uint64_t node) const { return node >= offsets_[depth_]; }
  const std::vector<double>& leaf_rewards(std::size_t task) const { return leaves_.at(task); }
  // Largest leaf reward reachable below `node`.
  double best_value(std::size_t task, std::uint64_t node) const { return best_[task][node]; }

 protected:
  EnvState initial_state(std::size_t task_index) const override;
  TransitionResult apply(const EnvState& state, ActionId action) const override;

 private:
  int depth_;
  int branching_;
  std::size_t leaf_count_;
  std::vector<std::uint64_t> offsets_;  // first node id at each depth, size D+2
  std::vector<std::vector<double>> leaves_;
  std::vector<std::vector<double>> best_;
};

// Benchmark suite: n_tasks trees with leaf rewards drawn uniformly from the
// grid {0, 0.05, ..., 1} using the given seed.
EnumTreeEnv make_tree_suite(std::size_t n_tasks, int depth, int branching, std::uint64_t seed);

}  // namespace rro
