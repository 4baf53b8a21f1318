#include "rro/enum_tree_env.hpp"

#include <algorithm>
#include <charconv>

#include "rro/errors.hpp"

namespace rro {

namespace {

std::vector<TaskInstance> tree_tasks(std::size_t n, int max_steps) {
  std::vector<TaskInstance> tasks;
  tasks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TaskInstance t;
    t.task_id = "tree-" + std::to_string(i);
    t.instruction = {"reach", "best", "leaf", "tree-" + std::to_string(i)};
    t.max_steps = max_steps;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

}  // namespace

EnumTreeEnv::EnumTreeEnv(int depth, int branching, std::vector<std::vector<double>> leaf_rewards,
                         std::optional<int> max_steps)
    : Environment(tree_tasks(leaf_rewards.size(), max_steps.value_or(depth))),
      depth_(depth),
      branching_(branching),
      leaves_(std::move(leaf_rewards)) {
  if (depth < 1 || depth > kMaxDepth) throw InvalidArgumentError("tree depth must be in [1, 8]");
  if (branching < 1 || branching > kMaxBranching) {
    throw InvalidArgumentError("tree branching must be in [1, 6]");
  }
  if (leaves_.empty()) throw InvalidArgumentError("tree environment needs at least one task");
  leaf_count_ = 1;
  offsets_.assign(static_cast<std::size_t>(depth) + 2, 0);
  for (int d = 0; d <= depth; ++d) {
    offsets_[d + 1] = offsets_[d] + leaf_count_;
    if (d < depth) leaf_count_ *= static_cast<std::size_t>(branching);
  }
  for (const auto& table : leaves_) {
    if (table.size() != leaf_count_) {
      throw InvalidArgumentError("expected " + std::to_string(leaf_count_) + " leaf rewards, got " +
                                 std::to_string(table.size()));
    }
    for (double r : table) {
      if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgumentError("leaf reward outside [0, 1]");
    }
  }

  const std::size_t total = offsets_[depth_ + 1];
  best_.resize(leaves_.size());
  for (std::size_t t = 0; t < leaves_.size(); ++t) {
    auto& best = best_[t];
    best.assign(total, 0.0);
    for (std::size_t i = 0; i < leaf_count_; ++i) best[offsets_[depth_] + i] = leaves_[t][i];
    for (std::uint64_t node = offsets_[depth_]; node-- > 0;) {
      double v = 0.0;
      for (int a = 0; a < branching_; ++a) v = std::max(v, best[child(node, a)]);
      best[node] = v;
    }
  }
}

int EnumTreeEnv::node_depth(std::uint64_t node) const {
  int d = 0;
  while (d <= depth_ && node >= offsets_[d + 1]) ++d;
  return d;
}

std::uint64_t EnumTreeEnv::child(std::uint64_t node, ActionId action) const {
  const int d = node_depth(node);
  const std::uint64_t pos = node - offsets_[d];
  return offsets_[d + 1] + pos * static_cast<std::uint64_t>(branching_) +
         static_cast<std::uint64_t>(action);
}

EnvState EnumTreeEnv::initial_state(std::size_t task_index) const {
  return EnvState{task_index, 0, 0, false};
}

std::vector<ActionId> EnumTreeEnv::legal_actions(const EnvState& state) const {
  if (state.terminal) return {};
  std::vector<ActionId> out(static_cast<std::size_t>(branching_));
  for (int a = 0; a < branching_; ++a) out[a] = a;
  return out;
}

TransitionResult EnumTreeEnv::apply(const EnvState& state, ActionId action) const {
  TransitionResult r;
  r.next.task = state.task;
  r.next.state_id = child(state.state_id, action);
  r.next.step_index = state.step_index + 1;
  r.next.terminal =
      is_leaf(r.next.state_id) || r.next.step_index >= task(state.task).max_steps;
  const int d = node_depth(r.next.state_id);
  const auto pos = r.next.state_id - offsets_[d];
  r.observation = {is_leaf(r.next.state_id) ? "leaf" : "node", std::to_string(d),
                   std::to_string(pos)};
  return r;
}

double EnumTreeEnv::terminal_reward(const EnvState& state) const {
  if (!is_leaf(state.state_id)) return 0.0;  // truncated before reaching a leaf
  return leaves_[state.task][state.state_id - offsets_[depth_]];
}

ActionId EnumTreeEnv::expert_action(const EnvState& state) const {
  const auto& best = best_[state.task];
  ActionId arg = 0;
  for (int a = 1; a < branching_; ++a) {
    if (best[child(state.state_id, a)] > best[child(state.state_id, arg)]) arg = a;
  }
  return arg;
}

std::string EnumTreeEnv::action_name(ActionId action) const {
  return "a" + std::to_string(action);
}

ActionId EnumTreeEnv::parse_action(std::string_view name) const {
  ActionId a = -1;
  if (name.size() < 2 || name[0] != 'a' ||
      std::from_chars(name.data() + 1, name.data() + name.size(), a).ec != std::errc{} || a < 0 ||
      a >= branching_) {
    throw ParseError("unknown tree action '" + std::string(name) + "'");
  }
  return a;
}

EnumTreeEnv make_tree_suite(std::size_t n_tasks, int depth, int branching, std::uint64_t seed) {
  std::size_t leaves = 1;
  for (int d = 0; d < depth; ++d) leaves *= static_cast<std::size_t>(std::max(branching, 1));
  std::vector<std::vector<double>> tables(n_tasks, std::vector<double>(leaves));
  const StreamKey root(seed);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    RngStream rng(root.child({stream_tag::kTask, t}));
    for (auto& r : tables[t]) r = static_cast<double>(rng.below(21)) / 20.0;
  }
  return EnumTreeEnv(depth, branching, std::move(tables));
}

}  // namespace rro
