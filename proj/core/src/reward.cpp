#include "rro/reward.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <unordered_set>

#include "json.hpp"
#include "rro/errors.hpp"
#include "rro/parallel.hpp"

namespace rro {

PrefixRef prefix_ref(const Trajectory& prefix) {
  PrefixRef ref;
  ref.task = prefix.task;
  ref.step = prefix.length();
  if (!prefix.steps.empty()) ref.action = prefix.steps.back().action;
  ref.state = prefix.end_state();
  return ref;
}

ProcessRewardEstimate mc_process_reward(const Environment& env, const Trajectory& prefix,
                                        const PolicyView& policy, std::size_t m, StreamKey key,
                                        std::size_t workers) {
  if (m == 0) throw InvalidArgumentError("process reward needs m >= 1 rollouts");
  if (prefix.states.empty()) throw InvalidArgumentError("degenerate prefix without a start state");
  ProcessRewardEstimate est;
  est.prefix = prefix_ref(prefix);
  if (prefix.terminal()) {
    est.value = env.outcome_reward(prefix);
    est.m = 1;
    est.rollout_outcomes = {est.value};
    return est;
  }
  est.m = m;
  est.rollout_outcomes.assign(m, 0.0);
  parallel_for(m, workers, [&](std::size_t j) {
    RngStream rng(key.child({stream_tag::kRollout, j}));
    const Trajectory full = sample_rollout(policy, env, prefix, rng);
    est.rollout_outcomes[j] = env.outcome_reward(full);
  });
  double total = 0.0;
  for (double r : est.rollout_outcomes) total += r;
  est.value = total / static_cast<double>(m);
  return est;
}

std::size_t ExactOracle::KeyHash::operator()(const Key& k) const {
  std::uint64_t h = mix64(k.state_id);
  h = mix64(h ^ static_cast<std::uint64_t>(k.task));
  h = mix64(h ^ (static_cast<std::uint64_t>(k.step) << 1 | (k.terminal ? 1 : 0)));
  return static_cast<std::size_t>(h);
}

ExactOracle::ExactOracle(const Environment& env, const PolicyView& policy, std::size_t state_limit,
                         std::size_t path_limit)
    : env_(env), policy_(policy), state_limit_(state_limit), path_limit_(path_limit) {
  if (!env.enumerable()) {
    throw OracleUnsupportedError(std::string(env.kind()) + " environment is not enumerable");
  }
}

double ExactOracle::value(const EnvState& state) {
  if (state.terminal) return env_.terminal_reward(state);
  const Key key{state.task, state.state_id, state.step_index, state.terminal};
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  if (memo_.size() >= state_limit_) {
    throw OracleUnsupportedError("reachable state space exceeds " + std::to_string(state_limit_));
  }
  const auto legal = env_.legal_actions(state);
  const auto pi = action_distribution(policy_, state, legal);
  double v = 0.0;
  for (std::size_t i = 0; i < legal.size(); ++i) {
    v += pi[i] * value(env_.transition(state, legal[i]).next);
  }
  memo_.emplace(key, v);
  return v;
}

double ExactOracle::path_value(const EnvState& state) {
  double total = 0.0;
  std::size_t paths = 0;
  enumerate(state, 1.0, total, paths);
  return total;
}

void ExactOracle::enumerate(const EnvState& state, double probability, double& total,
                            std::size_t& paths) {
  if (state.terminal) {
    if (++paths > path_limit_) {
      throw OracleUnsupportedError("completion count exceeds " + std::to_string(path_limit_));
    }
    total += probability * env_.terminal_reward(state);
    return;
  }
  const auto legal = env_.legal_actions(state);
  const auto pi = action_distribution(policy_, state, legal);
  for (std::size_t i = 0; i < legal.size(); ++i) {
    enumerate(env_.transition(state, legal[i]).next, probability * pi[i], total, paths);
  }
}

ExactProcessReward exact_process_reward(const Environment& env, const Trajectory& prefix,
                                        const PolicyView& policy) {
  ExactOracle oracle(env, policy);
  return ExactProcessReward{oracle.value(prefix.end_state()), prefix_ref(prefix)};
}

namespace {

// Visits each distinct reachable non-terminal state once, depth-first in
// legal-action order.
void for_each_internal_state(const Environment& env,
                             const std::function<void(const EnvState&)>& visit) {
  struct Hash {
    std::size_t operator()(const EnvState& s) const {
      return static_cast<std::size_t>(
          mix64(s.state_id ^ mix64(s.task * 1315423911ULL + static_cast<std::uint64_t>(s.step_index))));
    }
  };
  std::unordered_set<EnvState, Hash> seen;
  for (std::size_t t = 0; t < env.tasks().size(); ++t) {
    std::vector<EnvState> stack{env.reset(t)};
    while (!stack.empty()) {
      const EnvState s = stack.back();
      stack.pop_back();
      if (s.terminal || !seen.insert(s).second) continue;
      visit(s);
      const auto legal = env.legal_actions(s);
      for (auto it = legal.rbegin(); it != legal.rend(); ++it) {
        stack.push_back(env.transition(s, *it).next);
      }
    }
  }
}

}  // namespace

DecompositionReport verify_decomposition(const Environment& env, const PolicyView& policy,
                                         double tolerance) {
  ExactOracle oracle(env, policy);
  DecompositionReport report;
  report.tolerance = tolerance;
  for_each_internal_state(env, [&](const EnvState& s) {
    const auto legal = env.legal_actions(s);
    const auto pi = action_distribution(policy, s, legal);
    double expanded = 0.0;
    for (std::size_t i = 0; i < legal.size(); ++i) {
      expanded += pi[i] * oracle.value(env.transition(s, legal[i]).next);
    }
    const double direct = oracle.path_value(s);
    report.max_violation = std::max(report.max_violation, std::abs(direct - expanded));
    ++report.checked_prefixes;
  });
  return report;
}

RisingExistenceReport verify_rising_existence(const Environment& env, const PolicyView& policy,
                                              double tolerance) {
  ExactOracle oracle(env, policy);
  RisingExistenceReport report;
  report.tolerance = tolerance;
  report.min_slack = INFINITY;
  for_each_internal_state(env, [&](const EnvState& s) {
    const double current = oracle.value(s);
    double best = -INFINITY;
    for (ActionId a : env.legal_actions(s)) {
      best = std::max(best, oracle.value(env.transition(s, a).next));
    }
    const double slack = best - current;
    report.min_slack = std::min(report.min_slack, slack);
    if (slack < -tolerance) ++report.violations;
    ++report.checked_prefixes;
  });
  if (report.checked_prefixes == 0) report.min_slack = 0.0;
  return report;
}

void write_estimates_jsonl(std::ostream& out, const Environment& env,
                           std::span<const ProcessRewardEstimate> estimates) {
  for (const auto& e : estimates) {
    nlohmann::json line = {
        {"task_id", env.task(e.prefix.task).task_id},
        {"step", e.prefix.step},
        {"action", e.prefix.action ? nlohmann::json(env.action_name(*e.prefix.action))
                                   : nlohmann::json(nullptr)},
        {"m", e.m},
        {"value", e.value},
        {"outcomes", e.rollout_outcomes}};
    out << line.dump() << '\n';
  }
}

}  // namespace rro
