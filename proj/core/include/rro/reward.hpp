#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "rro/env.hpp"
#include "rro/policy.hpp"
#include "rro/rng.hpp"

namespace rro {

// The (s_t, a_t) a process reward refers to: the prefix e_{1:t} of `task`
// whose last action is `action` (absent for the empty prefix).
struct PrefixRef {
  std::size_t task = 0;
  std::size_t step = 0;
  std::optional<ActionId> action;
  EnvState state;
};

PrefixRef prefix_ref(const Trajectory& prefix);

struct ProcessRewardEstimate {
  double value = 0.0;
  std::size_t m = 0;
  std::vector<double> rollout_outcomes;
  PrefixRef prefix;
};

struct ExactProcessReward {
  double value = 0.0;
  PrefixRef prefix;
};

// Monte-Carlo process reward: the mean outcome reward of m policy rollouts
// completing `prefix`. Rollout j draws from key.child({rollout, j}) and the
// mean is reduced in rollout order, so the estimate is bit-identical for any
// worker count. A terminal prefix has no rollout freedom and scores its own
// outcome reward.
ProcessRewardEstimate mc_process_reward(const Environment& env, const Trajectory& prefix,
                                        const PolicyView& policy, std::size_t m, StreamKey key,
                                        std::size_t workers = 1);

// Exact policy-conditional expected outcome of enumerable environments.
// Memoized per (task, state, step); not thread-safe, create one per thread.
class ExactOracle {
 public:
  static constexpr std::size_t kDefaultStateLimit = 4'000'000;
  static constexpr std::size_t kDefaultPathLimit = 2'000'000;

  ExactOracle(const Environment& env, const PolicyView& policy,
              std::size_t state_limit = kDefaultStateLimit,
              std::size_t path_limit = kDefaultPathLimit);

  // Backward recursion: terminal -> outcome reward, otherwise
  // Σ_a π(a|s) · value(next(s, a)).
  double value(const EnvState& state);

  // Forward enumeration of every completion, Σ_paths P(path) · outcome.
  // Shares no intermediate results with value(); used as the second route in
  // verify_decomposition.
  double path_value(const EnvState& state);

  std::size_t memo_size() const { return memo_.size(); }

 private:
  struct Key {
    std::size_t task;
    std::uint64_t state_id;
    int step;
    bool terminal;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };

  void enumerate(const EnvState& state, double probability, double& total, std::size_t& paths);

  const Environment& env_;
  PolicyView policy_;
  std::size_t state_limit_;
  std::size_t path_limit_;
  std::unordered_map<Key, double, KeyHash> memo_;
};

ExactProcessReward exact_process_reward(const Environment& env, const Trajectory& prefix,
                                        const PolicyView& policy);

struct DecompositionReport {
  std::size_t checked_prefixes = 0;
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_violation <= tolerance; }
};

// Checks r(e_{1:t}) = Σ_a π(a|e_{1:t}) · r(e_{1:t} ⊕ a) at every reachable
// non-terminal prefix of every task. Prefixes ending in the same state are
// checked once, since the policy conditions on state only.
DecompositionReport verify_decomposition(const Environment& env, const PolicyView& policy,
                                         double tolerance);

struct RisingExistenceReport {
  std::size_t checked_prefixes = 0;
  std::size_t violations = 0;
  double min_slack = 0.0;  // min over prefixes of max_a r(e ⊕ a) − r(e)
  double tolerance = 0.0;
  bool passed() const { return violations == 0; }
};

// Checks max_a r(e_{1:t} ⊕ a) ≥ r(e_{1:t}) − tolerance at every reachable
// non-terminal prefix.
RisingExistenceReport verify_rising_existence(const Environment& env, const PolicyView& policy,
                                              double tolerance);

// {"task_id", "step", "action", "m", "value", "outcomes"} per line.
void write_estimates_jsonl(std::ostream& out, const Environment& env,
                           std::span<const ProcessRewardEstimate> estimates);

}  // namespace rro
