#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rro/config.hpp"
#include "rro/env.hpp"
#include "rro/policy.hpp"
#include "rro/sampling.hpp"
#include "rro/training.hpp"

namespace rro {

// Environment, feature map and task split for one experiment.
struct Workspace {
  std::unique_ptr<Environment> env;
  std::shared_ptr<const FeatureMap> features;
  std::string env_label;
  std::vector<std::size_t> train_tasks;
  std::vector<std::size_t> eval_tasks;
};

Workspace make_workspace(const ExperimentConfig& config);

struct SftStage {
  SftDataset dataset;
  PolicyParams params;
  TrainReport report;
};

struct CollectStage {
  std::vector<PreferencePair> pairs;
  std::vector<ProcessRewardEstimate> estimates;
  std::size_t explored_steps = 0;
  std::size_t candidates = 0;              // Σ per-step sample counts
  std::size_t counted_evaluations = 0;     // instrumentation counter
  double avg_samples_per_step() const {
    return explored_steps == 0 ? 0.0
                               : static_cast<double>(candidates) / static_cast<double>(explored_steps);
  }
};

struct DpoStage {
  PolicyParams params;
  TrainReport report;
};

// Pipeline stages. Each derives its random streams from (seed, stage) only.
SftStage run_sft_stage(const Workspace& ws, const ExperimentConfig& config, std::uint64_t seed);
CollectStage run_collect_stage(const Workspace& ws, const ExperimentConfig& config,
                               std::uint64_t seed, const PolicyParams& sft_params);
DpoStage run_dpo_stage(const Workspace& ws, const ExperimentConfig& config, std::uint64_t seed,
                       const PolicyParams& sft_params, std::span<const PreferencePair> pairs);

// Mean outcome reward of greedy (argmax) decoding over `tasks`. Exact logit
// ties are split evenly and the resulting expectation is computed exactly, so
// θ = 0 scores the uniform policy's expected outcome.
double evaluate_greedy(const Environment& env, const PolicyView& policy,
                       std::span<const std::size_t> tasks);

struct MethodResult {
  Method method = Method::kNone;
  std::string env;
  std::uint64_t seed = 0;
  double avg_reward = 0.0;
  double avg_samples_per_step = 0.0;
  std::size_t pairs_emitted = 0;
  std::size_t explored_steps = 0;
  std::size_t candidate_evaluations = 0;  // instrumentation counter
  double wall_time_s = 0.0;
};

struct MethodRun {
  MethodResult result;
  PolicyParams sft_params;
  PolicyParams final_params;
};

// none: θ = 0. sft: SFT only. eto / fixed_k / rro: SFT, pair collection from
// π_SFT, then DPO against the frozen π_SFT.
MethodRun run_method_full(const Workspace& ws, const ExperimentConfig& config, Method method,
                          std::uint64_t seed);
MethodResult run_method(const ExperimentConfig& config);

// Every (method, seed) in config.methods × config.seeds, in that order.
std::vector<MethodResult> compare_methods(const ExperimentConfig& config);

struct MethodSummary {
  Method method;
  std::size_t runs = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double mean_samples = 0.0;
  std::size_t total_pairs = 0;
};
std::vector<MethodSummary> summarize(std::span<const MethodResult> results);

struct CurvePoint {
  Method method;
  double x_samples = 0.0;
  double avg_reward = 0.0;
};

// fixed_k at each K, then rro once at its measured average sample count.
std::vector<CurvePoint> efficiency_sweep(const ExperimentConfig& config,
                                         std::span<const std::size_t> k_values, std::uint64_t seed);

// Stage of step t (1-based) in an n-step trajectory: min(3, ⌈3t/n⌉).
int stage_of(std::size_t t, std::size_t n);

struct StageTally {
  std::array<std::size_t, 3> rising{};
  std::array<std::size_t, 3> actions{};
};

// Adds one trajectory's step rewards r_1..r_n against predecessor r_0.
void tally_rising(double r0, std::span<const double> step_rewards, Comparison rising,
                  StageTally& tally);

struct RisingAnalysis {
  std::array<double, 3> proportions{};  // initial, middle, final
  std::array<std::size_t, 3> n_actions{};
  std::size_t n_trajectories = 0;
  RewardSource source = RewardSource::kOracle;
};

RisingAnalysis proportions_of(const StageTally& tally);

// Samples trajectories from `policy` (round-robin over `tasks`) and reports
// the per-stage fraction of actions whose process reward rises over the
// previous step's.
RisingAnalysis rising_analysis(const Environment& env, const PolicyView& policy,
                               std::span<const std::size_t> tasks, std::size_t n_trajectories,
                               RewardSource source, std::size_t rollouts, std::uint64_t seed,
                               Comparison rising = Comparison::kStrict);

// CSV writers; floats at 6 decimal places.
std::string format_fixed(double value);
std::string results_csv_header();
std::string results_csv_row(const MethodResult& r);
std::string results_csv(std::span<const MethodResult> rows);
std::string curve_csv(std::span<const CurvePoint> points);
std::string rising_csv(const RisingAnalysis& analysis);
std::string train_report_csv(const TrainReport& report);
std::string summary_csv(std::span<const MethodSummary> rows);

}  // namespace rro
