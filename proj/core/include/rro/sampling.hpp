#pragma once

#include <atomic>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rro/env.hpp"
#include "rro/policy.hpp"
#include "rro/reward.hpp"
#include "rro/rng.hpp"

namespace rro {

enum class Comparison { kWeak, kStrict };

// True when `candidate` counts as rising over `previous`.
constexpr bool is_rising(double candidate, double previous, Comparison cmp) {
  return cmp == Comparison::kWeak ? candidate >= previous : candidate > previous;
}

struct ExplorationBudget {
  std::size_t min_candidates = 2;
  std::size_t max_candidates = 8;
  std::size_t rollouts = 8;  // m
  Comparison comparison = Comparison::kWeak;

  void validate() const;
};

struct CandidateRecord {
  ActionId action = 0;
  ProcessRewardEstimate prm;
  std::size_t sample_index = 0;  // 1-based
};

enum class StopReason { kRisingFound, kBudgetExhausted };

struct ExplorationResult {
  std::vector<CandidateRecord> candidates;
  double prev_reward = 0.0;
  StopReason stop_reason = StopReason::kBudgetExhausted;
  std::optional<std::size_t> stop_index;  // τ, 1-based, when rising_found
};

enum class Provenance { kRro, kFixedK, kEtoTrajectory };

std::string_view to_string(StopReason reason);
std::string_view to_string(Provenance provenance);
std::string_view to_string(Comparison comparison);
Comparison parse_comparison(std::string_view text);

// Preference between two continuations of the same context state. Step-level
// pairs continue with a single action; trajectory-level pairs (ETO) with the
// full action sequence from the task's initial state.
struct PreferencePair {
  std::size_t task = 0;
  std::size_t step = 0;  // t of the explored action; 0 for trajectory pairs
  EnvState context;
  std::vector<ActionId> chosen;
  std::vector<ActionId> rejected;
  double chosen_reward = 0.0;
  double rejected_reward = 0.0;
  std::size_t n_candidates = 0;
  std::optional<StopReason> stop_reason;
  Provenance provenance = Provenance::kRro;
};

// Instrumentation shared by every exploration routine it is handed to.
struct SamplingCounters {
  std::atomic<std::size_t> candidate_evaluations{0};
  std::atomic<std::size_t> rollouts{0};
};

// Produces the i-th explored candidate (1-based) with its process reward.
class CandidateSource {
 public:
  virtual ~CandidateSource() = default;
  virtual CandidateRecord next(std::size_t sample_index) = 0;
};

// Samples â_t ~ π(·|e_{1:t−1}) and scores e_{1:t−1} ⊕ â_t with m rollouts.
// Candidate i uses substream key.child({candidate, i}).
class PolicyCandidateSource final : public CandidateSource {
 public:
  PolicyCandidateSource(const Environment& env, const Trajectory& prefix, const PolicyView& policy,
                        std::size_t rollouts, StreamKey key, std::size_t workers = 1,
                        SamplingCounters* counters = nullptr);
  CandidateRecord next(std::size_t sample_index) override;

 private:
  const Environment& env_;
  const Trajectory& prefix_;
  PolicyView policy_;
  std::size_t rollouts_;
  StreamKey key_;
  std::size_t workers_;
  SamplingCounters* counters_;
};

// Replays a fixed list of (action, reward) candidates.
class ScriptedCandidateSource final : public CandidateSource {
 public:
  struct Entry {
    ActionId action;
    double reward;
  };
  explicit ScriptedCandidateSource(std::vector<Entry> stream) : stream_(std::move(stream)) {}
  CandidateRecord next(std::size_t sample_index) override;

 private:
  std::vector<Entry> stream_;
};

// The reward-rising stopping rule: draw candidates until the one just drawn
// (at index ≥ min_candidates) is rising over `prev_reward`, or until
// max_candidates have been drawn.
ExplorationResult explore_until_rising(double prev_reward, const ExplorationBudget& budget,
                                       CandidateSource& source);

ExplorationResult rro_explore(const Environment& env, const Trajectory& prefix, double prev_reward,
                              const PolicyView& policy, const ExplorationBudget& budget,
                              StreamKey key, std::size_t workers = 1,
                              SamplingCounters* counters = nullptr);

// Baseline: exactly k candidates, no early stop. Candidates are independent
// so they are evaluated in parallel when workers > 1.
ExplorationResult fixed_explore(const Environment& env, const Trajectory& prefix,
                                const PolicyView& policy, std::size_t k, std::size_t rollouts,
                                StreamKey key, std::size_t workers = 1,
                                SamplingCounters* counters = nullptr);

// chosen = argmax PRM, rejected = argmin PRM, ties to the lowest sample
// index. No pair for fewer than two candidates or a flat reward set.
std::optional<PreferencePair> build_pair(const ExplorationResult& result, const Trajectory& prefix,
                                         Provenance provenance = Provenance::kRro);

enum class CollectMode { kWalk, kFreshPrefix };
CollectMode parse_collect_mode(std::string_view text);
std::string_view to_string(CollectMode mode);

struct ExplorationStrategy {
  enum class Kind { kRro, kFixedK };
  Kind kind = Kind::kRro;
  ExplorationBudget budget;
  std::size_t fixed_k = 5;
};

struct StepCollection {
  std::vector<PreferencePair> pairs;
  std::vector<std::size_t> samples_per_step;  // candidates evaluated at each explored step
  std::vector<ProcessRewardEstimate> estimates;
};

// Step-level pair collection for one task.
//  walk:         one trajectory, advanced with the chosen action; r_0 is the
//                process reward of the empty prefix and r_t the chosen
//                candidate's reward.
//  fresh_prefix: for each t, a new (t−1)-step prefix is sampled from the
//                policy and its own process reward is the comparison point.
StepCollection collect_step_pairs(const Environment& env, std::size_t task,
                                  const PolicyView& policy, const ExplorationStrategy& strategy,
                                  CollectMode mode, StreamKey key, std::size_t workers = 1,
                                  SamplingCounters* counters = nullptr);

struct TrajectoryCollection {
  std::optional<PreferencePair> pair;
  std::vector<double> outcomes;
  std::size_t sampled_steps = 0;
};

// Trajectory-level outcome supervision (the eto method): n_rollouts full
// trajectories, best vs worst outcome reward.
TrajectoryCollection collect_trajectory_pairs_eto(const Environment& env, std::size_t task,
                                                  const PolicyView& policy, std::size_t n_rollouts,
                                                  StreamKey key);

// {"task_id", "step", "context_state", "chosen", "rejected", "chosen_reward",
//  "rejected_reward", "n_candidates", "stop_reason", "provenance"} per line.
// Single-action continuations are written as an action name, longer ones as
// an array of names.
void write_pairs_jsonl(std::ostream& out, const Environment& env,
                       std::span<const PreferencePair> pairs);
std::vector<PreferencePair> read_pairs_jsonl(std::istream& in, const Environment& env);

}  // namespace rro
