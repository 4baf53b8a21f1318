#include "rro/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <unordered_map>

#include "rro/enum_tree_env.hpp"
#include "rro/env_io.hpp"
#include "rro/errors.hpp"
#include "rro/reward.hpp"

namespace rro {

namespace {

constexpr std::uint64_t kExpertTag = 0x657870;   // "exp"
constexpr std::uint64_t kCollectTag = 0x636f6c;  // "col"
constexpr std::uint64_t kDpoTag = 0x64706f;      // "dpo"

std::vector<std::size_t> range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v;
  for (std::size_t i = begin; i < end; ++i) v.push_back(i);
  return v;
}

}  // namespace

Workspace make_workspace(const ExperimentConfig& config) {
  Workspace ws;
  if (config.env_file.empty()) {
    ws.env = std::make_unique<EnumTreeEnv>(make_tree_suite(
        config.suite_tasks, config.suite_depth, config.suite_branching, config.suite_seed));
    ws.env_label = "tree_suite";
  } else {
    ws.env = load_environment(config.env_file);
    ws.env_label = std::filesystem::path(config.env_file).stem().string();
  }
  ws.features = make_feature_map(*ws.env);

  const std::size_t n = ws.env->tasks().size();
  const std::size_t n_train = config.n_train_tasks == 0 ? n : config.n_train_tasks;
  if (n_train > n) {
    throw ConfigError("n_train_tasks exceeds the environment's task count", {"n_train_tasks"});
  }
  ws.train_tasks = range(0, n_train);
  if (config.heldout_eval) {
    const std::size_t rest = n - n_train;
    const std::size_t n_eval = config.n_eval_tasks == 0 ? rest : config.n_eval_tasks;
    if (n_eval == 0 || n_eval > rest) {
      throw ConfigError("not enough held-out tasks for evaluation", {"n_eval_tasks", "heldout_eval"});
    }
    ws.eval_tasks = range(n_train, n_train + n_eval);
  } else {
    const std::size_t n_eval = config.n_eval_tasks == 0 ? n : config.n_eval_tasks;
    if (n_eval > n) throw ConfigError("n_eval_tasks exceeds the task count", {"n_eval_tasks"});
    ws.eval_tasks = range(0, n_eval);
  }
  return ws;
}

SftStage run_sft_stage(const Workspace& ws, const ExperimentConfig& config, std::uint64_t seed) {
  SftStage stage;
  stage.dataset = generate_expert_dataset(*ws.env, ws.train_tasks, config.expert_noise,
                                          StreamKey(seed).child(kExpertTag).value(),
                                          config.expert_per_task);
  auto [params, report] = train_sft(*ws.env, *ws.features,
                                    PolicyParams::zeros(ws.features->dimension()), stage.dataset,
                                    config.sft_lr, config.sft_epochs);
  stage.params = std::move(params);
  stage.report = std::move(report);
  return stage;
}

CollectStage run_collect_stage(const Workspace& ws, const ExperimentConfig& config,
                               std::uint64_t seed, const PolicyParams& sft_params) {
  CollectStage stage;
  if (config.method == Method::kNone || config.method == Method::kSft) return stage;
  const PolicySnapshot policy = snapshot(ws.features, sft_params, config.sample_temperature);
  SamplingCounters counters;

  for (std::size_t pass = 0; pass < config.collect_passes; ++pass) {
    const StreamKey key = StreamKey(seed).child({kCollectTag, pass});
    for (std::size_t task : ws.train_tasks) {
      if (config.method == Method::kEto) {
        auto c = collect_trajectory_pairs_eto(*ws.env, task, policy, config.eto_rollouts, key);
        // Each rollout step samples exactly one action.
        stage.explored_steps += c.sampled_steps;
        stage.candidates += c.sampled_steps;
        stage.counted_evaluations += c.sampled_steps;
        if (c.pair) stage.pairs.push_back(std::move(*c.pair));
        continue;
      }
      ExplorationStrategy strategy;
      strategy.kind = config.method == Method::kRro ? ExplorationStrategy::Kind::kRro
                                                    : ExplorationStrategy::Kind::kFixedK;
      strategy.budget = config.budget();
      strategy.fixed_k = config.fixed_k;
      auto c = collect_step_pairs(*ws.env, task, policy, strategy, config.collect_mode, key,
                                  config.workers, &counters);
      stage.explored_steps += c.samples_per_step.size();
      for (auto n : c.samples_per_step) stage.candidates += n;
      for (auto& p : c.pairs) stage.pairs.push_back(std::move(p));
      for (auto& e : c.estimates) stage.estimates.push_back(std::move(e));
    }
  }
  if (config.method != Method::kEto) stage.counted_evaluations = counters.candidate_evaluations.load();
  return stage;
}

DpoStage run_dpo_stage(const Workspace& ws, const ExperimentConfig& config, std::uint64_t seed,
                       const PolicyParams& sft_params, std::span<const PreferencePair> pairs) {
  const PolicySnapshot reference = snapshot(ws.features, sft_params);
  auto [params, report] =
      train_dpo(*ws.env, *ws.features, sft_params, reference, pairs,
                config.dpo_config(StreamKey(seed).child(kDpoTag).value()), config.dpo_mode);
  return DpoStage{std::move(params), std::move(report)};
}

namespace {

// Expected outcome of argmax decoding with exact logit ties split evenly.
class GreedyValue {
 public:
  GreedyValue(const Environment& env, const PolicyView& policy) : env_(env), policy_(policy) {}

  double operator()(const EnvState& s) {
    if (s.terminal) return env_.terminal_reward(s);
    const std::string key = env_.state_key(s);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const auto legal = env_.legal_actions(s);
    const auto logits = action_logits(policy_, s, legal);
    const double hi = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    std::size_t ties = 0;
    for (std::size_t i = 0; i < legal.size(); ++i) {
      if (logits[i] != hi) continue;
      total += (*this)(env_.transition(s, legal[i]).next);
      ++ties;
    }
    const double v = total / static_cast<double>(ties);
    memo_.emplace(key, v);
    return v;
  }

 private:
  const Environment& env_;
  PolicyView policy_;
  std::unordered_map<std::string, double> memo_;
};

}  // namespace

double evaluate_greedy(const Environment& env, const PolicyView& policy,
                       std::span<const std::size_t> tasks) {
  if (tasks.empty()) throw InvalidArgumentError("no evaluation tasks");
  GreedyValue value(env, policy);
  double total = 0.0;
  for (std::size_t task : tasks) total += value(env.reset(task));
  return total / static_cast<double>(tasks.size());
}

namespace {

MethodRun run_with_sft(const Workspace& ws, const ExperimentConfig& base, Method method,
                       std::uint64_t seed, const SftStage* cached_sft) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig config = base;
  config.method = method;

  MethodRun run;
  run.result.method = method;
  run.result.env = ws.env_label;
  run.result.seed = seed;

  if (method == Method::kNone) {
    run.sft_params = PolicyParams::zeros(ws.features->dimension());
    run.final_params = run.sft_params;
  } else {
    std::optional<SftStage> fresh;
    if (!cached_sft) fresh = run_sft_stage(ws, config, seed);
    run.sft_params = cached_sft ? cached_sft->params : fresh->params;
    run.final_params = run.sft_params;
    if (method != Method::kSft) {
      auto collected = run_collect_stage(ws, config, seed, run.sft_params);
      run.result.pairs_emitted = collected.pairs.size();
      run.result.explored_steps = collected.explored_steps;
      run.result.candidate_evaluations = collected.counted_evaluations;
      run.result.avg_samples_per_step = collected.avg_samples_per_step();
      run.final_params = run_dpo_stage(ws, config, seed, run.sft_params, collected.pairs).params;
    }
  }
  run.result.avg_reward =
      evaluate_greedy(*ws.env, PolicyView(*ws.features, run.final_params.theta), ws.eval_tasks);
  if (config.record_wall_time) {
    run.result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return run;
}

}  // namespace

MethodRun run_method_full(const Workspace& ws, const ExperimentConfig& config, Method method,
                          std::uint64_t seed) {
  return run_with_sft(ws, config, method, seed, nullptr);
}

MethodResult run_method(const ExperimentConfig& config) {
  const Workspace ws = make_workspace(config);
  return run_method_full(ws, config, config.method, config.seeds.front()).result;
}

std::vector<MethodResult> compare_methods(const ExperimentConfig& config) {
  const Workspace ws = make_workspace(config);
  std::vector<MethodResult> rows;
  std::vector<std::optional<SftStage>> sft_cache(config.seeds.size());
  for (Method method : config.methods) {
    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
      const std::uint64_t seed = config.seeds[s];
      const SftStage* sft = nullptr;
      if (method != Method::kNone && !config.record_wall_time) {
        if (!sft_cache[s]) sft_cache[s] = run_sft_stage(ws, config, seed);
        sft = &*sft_cache[s];
      }
      rows.push_back(run_with_sft(ws, config, method, seed, sft).result);
    }
  }
  return rows;
}

std::vector<MethodSummary> summarize(std::span<const MethodResult> results) {
  std::vector<MethodSummary> out;
  for (const auto& r : results) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const MethodSummary& s) { return s.method == r.method; });
    if (it == out.end()) {
      out.push_back(MethodSummary{r.method});
      it = out.end() - 1;
    }
    it->runs += 1;
    it->mean_reward += r.avg_reward;
    it->mean_samples += r.avg_samples_per_step;
    it->total_pairs += r.pairs_emitted;
  }
  for (auto& s : out) {
    s.mean_reward /= static_cast<double>(s.runs);
    s.mean_samples /= static_cast<double>(s.runs);
    double var = 0.0;
    for (const auto& r : results) {
      if (r.method == s.method) var += (r.avg_reward - s.mean_reward) * (r.avg_reward - s.mean_reward);
    }
    s.std_reward = s.runs > 1 ? std::sqrt(var / static_cast<double>(s.runs - 1)) : 0.0;
  }
  return out;
}

std::vector<CurvePoint> efficiency_sweep(const ExperimentConfig& config,
                                         std::span<const std::size_t> k_values,
                                         std::uint64_t seed) {
  if (k_values.empty()) throw InvalidArgumentError("efficiency sweep needs at least one K");
  const Workspace ws = make_workspace(config);
  const SftStage sft = run_sft_stage(ws, config, seed);
  std::vector<CurvePoint> out;
  for (std::size_t k : k_values) {
    ExperimentConfig c = config;
    c.fixed_k = k;
    const auto r = run_with_sft(ws, c, Method::kFixedK, seed, &sft).result;
    out.push_back({Method::kFixedK, r.avg_samples_per_step, r.avg_reward});
  }
  const auto r = run_with_sft(ws, config, Method::kRro, seed, &sft).result;
  out.push_back({Method::kRro, r.avg_samples_per_step, r.avg_reward});
  return out;
}

int stage_of(std::size_t t, std::size_t n) {
  if (t < 1 || t > n) throw InvalidArgumentError("step outside trajectory");
  const std::size_t s = (3 * t + n - 1) / n;
  return static_cast<int>(std::min<std::size_t>(3, s));
}

void tally_rising(double r0, std::span<const double> step_rewards, Comparison rising,
                  StageTally& tally) {
  const std::size_t n = step_rewards.size();
  double prev = r0;
  for (std::size_t t = 1; t <= n; ++t) {
    const int stage = stage_of(t, n) - 1;
    tally.actions[stage] += 1;
    if (is_rising(step_rewards[t - 1], prev, rising)) tally.rising[stage] += 1;
    prev = step_rewards[t - 1];
  }
}

RisingAnalysis proportions_of(const StageTally& tally) {
  RisingAnalysis a;
  for (int s = 0; s < 3; ++s) {
    a.n_actions[s] = tally.actions[s];
    a.proportions[s] = tally.actions[s] == 0 ? 0.0
                                             : static_cast<double>(tally.rising[s]) /
                                                   static_cast<double>(tally.actions[s]);
  }
  return a;
}

RisingAnalysis rising_analysis(const Environment& env, const PolicyView& policy,
                               std::span<const std::size_t> tasks, std::size_t n_trajectories,
                               RewardSource source, std::size_t rollouts, std::uint64_t seed,
                               Comparison rising) {
  if (n_trajectories < 1) throw InvalidArgumentError("rising analysis needs n_trajectories >= 1");
  if (tasks.empty()) throw InvalidArgumentError("rising analysis needs at least one task");
  std::optional<ExactOracle> oracle;
  if (source == RewardSource::kOracle) oracle.emplace(env, policy);
  const StreamKey root(seed);
  StageTally tally;
  for (std::size_t i = 0; i < n_trajectories; ++i) {
    const std::size_t task = tasks[i % tasks.size()];
    RngStream rng(root.child({stream_tag::kRollout, i}));
    const Trajectory traj = sample_rollout(policy, env, env.start(task), rng);
    std::vector<double> rewards;
    double r0 = 0.0;
    for (std::size_t t = 0; t <= traj.length(); ++t) {
      double r;
      if (oracle) {
        r = oracle->value(traj.states[t]);
      } else {
        Trajectory prefix;
        prefix.task = task;
        prefix.steps.assign(traj.steps.begin(), traj.steps.begin() + static_cast<std::ptrdiff_t>(t));
        prefix.states.assign(traj.states.begin(),
                             traj.states.begin() + static_cast<std::ptrdiff_t>(t) + 1);
        r = mc_process_reward(env, prefix, policy, rollouts,
                              root.child({stream_tag::kPrefix, i, t}))
                .value;
      }
      if (t == 0) {
        r0 = r;
      } else {
        rewards.push_back(r);
      }
    }
    tally_rising(r0, rewards, rising, tally);
  }
  RisingAnalysis a = proportions_of(tally);
  a.n_trajectories = n_trajectories;
  a.source = source;
  return a;
}

std::string format_fixed(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

std::string results_csv_header() {
  return "method,env,seed,avg_reward,avg_samples_per_step,pairs_emitted,wall_time_s\n";
}

std::string results_csv_row(const MethodResult& r) {
  return std::string(to_string(r.method)) + "," + r.env + "," + std::to_string(r.seed) + "," +
         format_fixed(r.avg_reward) + "," + format_fixed(r.avg_samples_per_step) + "," +
         std::to_string(r.pairs_emitted) + "," + format_fixed(r.wall_time_s) + "\n";
}

std::string results_csv(std::span<const MethodResult> rows) {
  std::string out = results_csv_header();
  for (const auto& r : rows) out += results_csv_row(r);
  return out;
}

std::string curve_csv(std::span<const CurvePoint> points) {
  std::string out = "method,x_samples,avg_reward\n";
  for (const auto& p : points) {
    out += std::string(to_string(p.method)) + "," + format_fixed(p.x_samples) + "," +
           format_fixed(p.avg_reward) + "\n";
  }
  return out;
}

std::string rising_csv(const RisingAnalysis& analysis) {
  static constexpr const char* kStages[3] = {"initial", "middle", "final"};
  std::string out = "stage,proportion,n_actions\n";
  for (int s = 0; s < 3; ++s) {
    out += std::string(kStages[s]) + "," + format_fixed(analysis.proportions[s]) + "," +
           std::to_string(analysis.n_actions[s]) + "\n";
  }
  return out;
}

std::string train_report_csv(const TrainReport& report) {
  std::string out = "epoch,loss,grad_norm\n";
  for (std::size_t e = 0; e < report.losses.size(); ++e) {
    out += std::to_string(e + 1) + "," + format_fixed(report.losses[e]) + "," +
           format_fixed(report.grad_norms[e]) + "\n";
  }
  return out;
}

std::string summary_csv(std::span<const MethodSummary> rows) {
  std::string out = "method,runs,mean_avg_reward,std_avg_reward,mean_samples_per_step,total_pairs\n";
  for (const auto& s : rows) {
    out += std::string(to_string(s.method)) + "," + std::to_string(s.runs) + "," +
           format_fixed(s.mean_reward) + "," + format_fixed(s.std_reward) + "," +
           format_fixed(s.mean_samples) + "," + std::to_string(s.total_pairs) + "\n";
  }
  return out;
}

}  // namespace rro
