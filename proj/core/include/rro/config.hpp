#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rro/sampling.hpp"
#include "rro/training.hpp"

namespace rro {

enum class Method { kNone, kSft, kEto, kFixedK, kRro };
Method parse_method(std::string_view text);
std::string_view to_string(Method method);

enum class RewardSource { kOracle, kMonteCarlo };
RewardSource parse_reward_source(std::string_view text);
std::string_view to_string(RewardSource source);

// Flat `key = value` experiment configuration. Lists are comma-separated.
struct ExperimentConfig {
  // Environment: a definition file, or the built-in seeded tree suite.
  std::string env_file;
  std::size_t suite_tasks = 20;
  int suite_depth = 4;
  int suite_branching = 3;
  std::uint64_t suite_seed = 2024;

  Method method = Method::kRro;
  std::vector<Method> methods = {Method::kNone, Method::kSft, Method::kEto, Method::kFixedK,
                                 Method::kRro};
  std::vector<std::uint64_t> seeds = {1};
  std::size_t n_train_tasks = 0;  // 0 = every task
  std::size_t n_eval_tasks = 0;   // 0 = every task
  bool heldout_eval = false;      // evaluate on tasks after the training ones

  std::size_t expert_per_task = 2;
  double expert_noise = 0.3;
  double sft_lr = 1.0;
  std::size_t sft_epochs = 100;

  std::size_t rollouts = 8;
  std::size_t fixed_k = 5;
  std::size_t k_max = 8;
  std::size_t min_candidates = 2;
  Comparison comparison = Comparison::kWeak;
  CollectMode collect_mode = CollectMode::kWalk;
  std::size_t collect_passes = 1;
  std::size_t eto_rollouts = 5;

  double dpo_beta = 0.5;
  double dpo_lr = 20.0;
  std::size_t dpo_epochs = 50;
  std::size_t dpo_batch = 0;
  DpoMode dpo_mode = DpoMode::kOfflineEpoch;

  double sample_temperature = 1.0;
  std::size_t workers = 1;
  std::string output_dir = "out";
  bool record_wall_time = false;

  RewardSource rising_source = RewardSource::kOracle;
  Comparison rising_comparison = Comparison::kStrict;
  std::size_t rising_trajectories = 200;
  std::size_t rising_rollouts = 32;
  std::vector<std::size_t> sweep_k = {2, 3, 4, 5};

  ExplorationBudget budget() const;
  DpoConfig dpo_config(std::uint64_t seed) const;
  void validate() const;
};

// Unknown keys and malformed values raise ConfigError naming every
// offending key. Relative env_file / output_dir paths resolve against
// `base_dir`.
ExperimentConfig parse_config(std::string_view text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// key = value lines for every field, in declaration order.
std::string format_config(const ExperimentConfig& config);

}  // namespace rro
