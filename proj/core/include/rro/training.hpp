#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rro/env.hpp"
#include "rro/policy.hpp"
#include "rro/sampling.hpp"

namespace rro {

using SftDataset = std::vector<Trajectory>;

struct DpoConfig {
  double beta = 0.1;
  double learning_rate = 0.05;
  std::size_t epochs = 1;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

enum class DpoMode { kOfflineEpoch, kOnlinePerStep };
DpoMode parse_dpo_mode(std::string_view text);
std::string_view to_string(DpoMode mode);

struct TrainReport {
  std::vector<double> losses;      // one per epoch
  std::vector<double> grad_norms;  // one per epoch
  double final_loss = 0.0;
  std::string checkpoint;  // set by callers that persist the result
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// −mean over trajectories of Σ_t log π(a_t | e_{1:t−1}) and its gradient.
LossAndGrad sft_loss_and_grad(const Environment& env, const PolicyView& policy,
                              std::span<const Trajectory> dataset);

// −log σ(β Δ), evaluated as softplus(−β Δ).
double dpo_pair_loss(double delta, double beta);

// Σ log π(actions | context) along the continuation; adds its gradient into
// `grad` when non-null.
double sequence_log_prob(const Environment& env, const PolicyView& policy, const EnvState& context,
                         std::span<const ActionId> actions, SparseVector* grad = nullptr);

// Δ = (log π_θ(y_w|x) − log π_ref(y_w|x)) − (log π_θ(y_l|x) − log π_ref(y_l|x)).
double dpo_margin(const Environment& env, const PolicyView& policy, const PolicyView& reference,
                  const PreferencePair& pair);

LossAndGrad dpo_loss_and_grad(const Environment& env, const PolicyView& policy,
                              const PolicyView& reference, std::span<const PreferencePair> pairs,
                              double beta);

// θ − learning_rate · grad. Throws on a non-finite gradient.
PolicyParams gradient_step(const PolicyParams& params, std::span<const double> grad,
                           double learning_rate);

// Full-batch gradient descent on the SFT loss.
std::pair<PolicyParams, TrainReport> train_sft(const Environment& env, const FeatureMap& features,
                                               PolicyParams params,
                                               std::span<const Trajectory> dataset,
                                               double learning_rate, std::size_t epochs);

// offline_epoch: `epochs` passes over the pair set (full batch or seeded
// minibatches). online_per_step: one step per pair in collection order, per
// epoch. The reference policy is never refreshed.
std::pair<PolicyParams, TrainReport> train_dpo(const Environment& env, const FeatureMap& features,
                                               PolicyParams params, const PolicySnapshot& reference,
                                               std::span<const PreferencePair> pairs,
                                               const DpoConfig& config, DpoMode mode);

enum class LossKind { kSft, kDpo };

struct GradientCheckReport {
  std::size_t trials = 0;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  std::size_t max_dimension = 0;
  bool passed() const { return max_relative_error <= tolerance; }
};

// Compares analytic gradients to central differences on random small
// instances (d ≤ 200). The error of one trial is ‖g − g_fd‖₂ / max(‖g‖₂, ‖g_fd‖₂).
GradientCheckReport check_gradients(LossKind kind, std::size_t trials, double h, double tolerance,
                                    std::uint64_t seed, double beta = 0.1);

double l2_norm(std::span<const double> v);

}  // namespace rro
