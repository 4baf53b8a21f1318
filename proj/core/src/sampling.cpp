#include "rro/sampling.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "rro/errors.hpp"
#include "rro/parallel.hpp"

namespace rro {

void ExplorationBudget::validate() const {
  if (min_candidates < 1) throw InvalidArgumentError("min_candidates must be >= 1");
  if (max_candidates < min_candidates) {
    throw InvalidArgumentError("max_candidates must be >= min_candidates");
  }
  if (rollouts < 1) throw InvalidArgumentError("rollouts must be >= 1");
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::kRisingFound ? "rising_found" : "budget_exhausted";
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::kRro: return "rro";
    case Provenance::kFixedK: return "fixed_k";
    case Provenance::kEtoTrajectory: return "eto_trajectory";
  }
  return "";
}

std::string_view to_string(Comparison comparison) {
  return comparison == Comparison::kWeak ? "weak" : "strict";
}

Comparison parse_comparison(std::string_view text) {
  if (text == "weak") return Comparison::kWeak;
  if (text == "strict") return Comparison::kStrict;
  throw ParseError("comparison must be 'weak' or 'strict'");
}

CollectMode parse_collect_mode(std::string_view text) {
  if (text == "walk") return CollectMode::kWalk;
  if (text == "fresh_prefix") return CollectMode::kFreshPrefix;
  throw ParseError("collect mode must be 'walk' or 'fresh_prefix'");
}

std::string_view to_string(CollectMode mode) {
  return mode == CollectMode::kWalk ? "walk" : "fresh_prefix";
}

PolicyCandidateSource::PolicyCandidateSource(const Environment& env, const Trajectory& prefix,
                                             const PolicyView& policy, std::size_t rollouts,
                                             StreamKey key, std::size_t workers,
                                             SamplingCounters* counters)
    : env_(env),
      prefix_(prefix),
      policy_(policy),
      rollouts_(rollouts),
      key_(key),
      workers_(workers),
      counters_(counters) {}

CandidateRecord PolicyCandidateSource::next(std::size_t sample_index) {
  const StreamKey key = key_.child({stream_tag::kCandidate, sample_index});
  RngStream rng(key.child(stream_tag::kAction));
  const ActionId action = sample_action(policy_, env_, prefix_.end_state(), rng);
  Trajectory extended = prefix_;
  env_.extend(extended, action);
  CandidateRecord rec;
  rec.action = action;
  rec.sample_index = sample_index;
  rec.prm = mc_process_reward(env_, extended, policy_, rollouts_, key, workers_);
  if (counters_) {
    counters_->candidate_evaluations.fetch_add(1, std::memory_order_relaxed);
    counters_->rollouts.fetch_add(rec.prm.m, std::memory_order_relaxed);
  }
  return rec;
}

CandidateRecord ScriptedCandidateSource::next(std::size_t sample_index) {
  if (sample_index == 0 || sample_index > stream_.size()) {
    throw InvalidArgumentError("scripted candidate stream exhausted");
  }
  const auto& e = stream_[sample_index - 1];
  CandidateRecord rec;
  rec.action = e.action;
  rec.sample_index = sample_index;
  rec.prm.value = e.reward;
  rec.prm.m = 1;
  rec.prm.rollout_outcomes = {e.reward};
  return rec;
}

ExplorationResult explore_until_rising(double prev_reward, const ExplorationBudget& budget,
                                       CandidateSource& source) {
  budget.validate();
  ExplorationResult result;
  result.prev_reward = prev_reward;
  for (std::size_t i = 1; i <= budget.max_candidates; ++i) {
    result.candidates.push_back(source.next(i));
    if (i >= budget.min_candidates &&
        is_rising(result.candidates.back().prm.value, prev_reward, budget.comparison)) {
      result.stop_reason = StopReason::kRisingFound;
      result.stop_index = i;
      return result;
    }
  }
  result.stop_reason = StopReason::kBudgetExhausted;
  return result;
}

ExplorationResult rro_explore(const Environment& env, const Trajectory& prefix, double prev_reward,
                              const PolicyView& policy, const ExplorationBudget& budget,
                              StreamKey key, std::size_t workers, SamplingCounters* counters) {
  if (prefix.terminal()) throw InvalidArgumentError("cannot explore from a terminal prefix");
  if (!(prev_reward >= 0.0 && prev_reward <= 1.0)) {
    throw InvalidArgumentError("previous reward must lie in [0, 1]");
  }
  PolicyCandidateSource source(env, prefix, policy, budget.rollouts, key, workers, counters);
  return explore_until_rising(prev_reward, budget, source);
}

ExplorationResult fixed_explore(const Environment& env, const Trajectory& prefix,
                                const PolicyView& policy, std::size_t k, std::size_t rollouts,
                                StreamKey key, std::size_t workers, SamplingCounters* counters) {
  if (k < 2) throw InvalidArgumentError("fixed exploration needs k >= 2 candidates");
  if (prefix.terminal()) throw InvalidArgumentError("cannot explore from a terminal prefix");
  ExplorationResult result;
  result.candidates.resize(k);
  // Candidate-level parallelism; rollouts inside a candidate stay sequential.
  parallel_for(k, workers, [&](std::size_t i) {
    PolicyCandidateSource source(env, prefix, policy, rollouts, key, 1, counters);
    result.candidates[i] = source.next(i + 1);
  });
  result.stop_reason = StopReason::kBudgetExhausted;
  return result;
}

std::optional<PreferencePair> build_pair(const ExplorationResult& result, const Trajectory& prefix,
                                         Provenance provenance) {
  const auto& c = result.candidates;
  if (c.size() < 2) return std::nullopt;
  std::size_t hi = 0;
  std::size_t lo = 0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (c[i].prm.value > c[hi].prm.value) hi = i;
    if (c[i].prm.value < c[lo].prm.value) lo = i;
  }
  if (!(c[hi].prm.value > c[lo].prm.value)) return std::nullopt;
  PreferencePair pair;
  pair.task = prefix.task;
  pair.step = prefix.length() + 1;
  pair.context = prefix.end_state();
  pair.chosen = {c[hi].action};
  pair.rejected = {c[lo].action};
  pair.chosen_reward = c[hi].prm.value;
  pair.rejected_reward = c[lo].prm.value;
  pair.n_candidates = c.size();
  pair.stop_reason = result.stop_reason;
  pair.provenance = provenance;
  return pair;
}

namespace {

ExplorationResult explore_step(const Environment& env, const Trajectory& prefix, double prev,
                               const PolicyView& policy, const ExplorationStrategy& strategy,
                               StreamKey key, std::size_t workers, SamplingCounters* counters) {
  if (strategy.kind == ExplorationStrategy::Kind::kRro) {
    return rro_explore(env, prefix, prev, policy, strategy.budget, key, workers, counters);
  }
  auto result = fixed_explore(env, prefix, policy, strategy.fixed_k, strategy.budget.rollouts, key,
                              workers, counters);
  result.prev_reward = prev;
  return result;
}

std::size_t best_index(const ExplorationResult& result) {
  std::size_t hi = 0;
  for (std::size_t i = 1; i < result.candidates.size(); ++i) {
    if (result.candidates[i].prm.value > result.candidates[hi].prm.value) hi = i;
  }
  return hi;
}

Provenance provenance_of(const ExplorationStrategy& s) {
  return s.kind == ExplorationStrategy::Kind::kRro ? Provenance::kRro : Provenance::kFixedK;
}

}  // namespace

StepCollection collect_step_pairs(const Environment& env, std::size_t task,
                                  const PolicyView& policy, const ExplorationStrategy& strategy,
                                  CollectMode mode, StreamKey key, std::size_t workers,
                                  SamplingCounters* counters) {
  strategy.budget.validate();
  const StreamKey task_key = key.child({stream_tag::kTask, task});
  const std::size_t m = strategy.budget.rollouts;
  StepCollection out;

  auto record = [&](const ExplorationResult& result, const Trajectory& prefix) {
    out.samples_per_step.push_back(result.candidates.size());
    for (const auto& c : result.candidates) out.estimates.push_back(c.prm);
    if (auto pair = build_pair(result, prefix, provenance_of(strategy))) {
      out.pairs.push_back(std::move(*pair));
    }
  };

  if (mode == CollectMode::kWalk) {
    Trajectory traj = env.start(task);
    auto r0 = mc_process_reward(env, traj, policy, m, task_key.child({stream_tag::kPrev, 0}),
                                workers);
    double prev = r0.value;
    out.estimates.push_back(std::move(r0));
    while (!traj.terminal()) {
      const std::size_t t = traj.length() + 1;
      const auto result = explore_step(env, traj, prev, policy, strategy,
                                       task_key.child({stream_tag::kPrefix, t}), workers, counters);
      record(result, traj);
      const auto& best = result.candidates[best_index(result)];
      prev = best.prm.value;
      env.extend(traj, best.action);
    }
    return out;
  }

  const int horizon = env.task(task).max_steps;
  for (int t = 1; t <= horizon; ++t) {
    const StreamKey step_key = task_key.child({stream_tag::kPrefix, static_cast<std::uint64_t>(t)});
    RngStream rng(step_key.child(stream_tag::kAction));
    Trajectory prefix = env.start(task);
    while (!prefix.terminal() && prefix.length() + 1 < static_cast<std::size_t>(t)) {
      env.extend(prefix, sample_action(policy, env, prefix.end_state(), rng));
    }
    if (prefix.terminal()) break;
    auto prev = mc_process_reward(env, prefix, policy, m, step_key.child(stream_tag::kPrev), workers);
    const double prev_value = prev.value;
    out.estimates.push_back(std::move(prev));
    const auto result =
        explore_step(env, prefix, prev_value, policy, strategy, step_key, workers, counters);
    record(result, prefix);
  }
  return out;
}

TrajectoryCollection collect_trajectory_pairs_eto(const Environment& env, std::size_t task,
                                                  const PolicyView& policy, std::size_t n_rollouts,
                                                  StreamKey key) {
  if (n_rollouts < 2) throw InvalidArgumentError("ETO pairs need n_rollouts >= 2");
  const StreamKey task_key = key.child({stream_tag::kTask, task});
  TrajectoryCollection out;
  std::vector<Trajectory> rollouts;
  for (std::size_t j = 0; j < n_rollouts; ++j) {
    RngStream rng(task_key.child({stream_tag::kRollout, j}));
    rollouts.push_back(sample_rollout(policy, env, env.start(task), rng));
    out.outcomes.push_back(env.outcome_reward(rollouts.back()));
    out.sampled_steps += rollouts.back().length();
  }
  std::size_t hi = 0;
  std::size_t lo = 0;
  for (std::size_t j = 1; j < n_rollouts; ++j) {
    if (out.outcomes[j] > out.outcomes[hi]) hi = j;
    if (out.outcomes[j] < out.outcomes[lo]) lo = j;
  }
  if (!(out.outcomes[hi] > out.outcomes[lo])) return out;
  PreferencePair pair;
  pair.task = task;
  pair.step = 0;
  pair.context = env.reset(task);
  pair.chosen = rollouts[hi].actions();
  pair.rejected = rollouts[lo].actions();
  pair.chosen_reward = out.outcomes[hi];
  pair.rejected_reward = out.outcomes[lo];
  pair.n_candidates = n_rollouts;
  pair.provenance = Provenance::kEtoTrajectory;
  out.pair = std::move(pair);
  return out;
}

void write_pairs_jsonl(std::ostream& out, const Environment& env,
                       std::span<const PreferencePair> pairs) {
  using nlohmann::json;
  auto continuation = [&](const std::vector<ActionId>& actions) {
    if (actions.size() == 1) return json(env.action_name(actions.front()));
    json arr = json::array();
    for (auto a : actions) arr.push_back(env.action_name(a));
    return arr;
  };
  for (const auto& p : pairs) {
    json line = {{"task_id", env.task(p.task).task_id},
                 {"step", p.step},
                 {"context_state", env.state_key(p.context)},
                 {"chosen", continuation(p.chosen)},
                 {"rejected", continuation(p.rejected)},
                 {"chosen_reward", p.chosen_reward},
                 {"rejected_reward", p.rejected_reward},
                 {"n_candidates", p.n_candidates},
                 {"stop_reason", p.stop_reason ? json(to_string(*p.stop_reason)) : json(nullptr)},
                 {"provenance", to_string(p.provenance)}};
    out << line.dump() << '\n';
  }
}

std::vector<PreferencePair> read_pairs_jsonl(std::istream& in, const Environment& env) {
  using nlohmann::json;
  auto continuation = [&](const json& j) {
    std::vector<ActionId> actions;
    if (j.is_string()) {
      actions.push_back(env.parse_action(j.get<std::string>()));
    } else {
      for (const auto& a : j) actions.push_back(env.parse_action(a.get<std::string>()));
    }
    return actions;
  };
  std::vector<PreferencePair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      PreferencePair p;
      p.task = env.task_index(j.at("task_id").get<std::string>());
      p.step = j.at("step").get<std::size_t>();
      p.context = env.parse_state_key(j.at("context_state").get<std::string>());
      if (p.context.task != p.task) throw ParseError("context state belongs to another task");
      p.chosen = continuation(j.at("chosen"));
      p.rejected = continuation(j.at("rejected"));
      p.chosen_reward = j.at("chosen_reward").get<double>();
      p.rejected_reward = j.at("rejected_reward").get<double>();
      p.n_candidates = j.at("n_candidates").get<std::size_t>();
      const auto& stop = j.at("stop_reason");
      if (!stop.is_null()) {
        p.stop_reason = stop.get<std::string>() == "rising_found" ? StopReason::kRisingFound
                                                                   : StopReason::kBudgetExhausted;
      }
      const auto prov = j.at("provenance").get<std::string>();
      if (prov == "rro") {
        p.provenance = Provenance::kRro;
      } else if (prov == "fixed_k") {
        p.provenance = Provenance::kFixedK;
      } else if (prov == "eto_trajectory") {
        p.provenance = Provenance::kEtoTrajectory;
      } else {
        throw ParseError("unknown provenance '" + prov + "'");
      }
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace rro
