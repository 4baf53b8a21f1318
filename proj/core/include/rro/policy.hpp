#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "rro/enum_tree_env.hpp"
#include "rro/env.hpp"
#include "rro/rng.hpp"
#include "rro/shop_env.hpp"

namespace rro {

struct Feature {
  std::size_t index = 0;
  double value = 0.0;

  friend bool operator==(const Feature&, const Feature&) = default;
};

// Sorted by index, no duplicates, unless noted otherwise.
using SparseVector = std::vector<Feature>;

// φ(state, action) -> sparse vector in R^d. The policy conditions on the
// current environment state, which is Markov-sufficient for both reference
// environments.
class FeatureMap {
 public:
  virtual ~FeatureMap() = default;
  virtual std::size_t dimension() const = 0;
  // Overwrites `out` with the sorted feature vector.
  virtual void features(const EnvState& state, ActionId action, SparseVector& out) const = 0;
};

// One-hot over (task, internal node, action).
class TabularFeatureMap final : public FeatureMap {
 public:
  explicit TabularFeatureMap(const EnumTreeEnv& env);
  std::size_t dimension() const override { return dim_; }
  void features(const EnvState& state, ActionId action, SparseVector& out) const override;

 private:
  std::size_t internal_;
  std::size_t branching_;
  std::size_t dim_;
};

// Indicator features of (action kind, page state, instruction match).
class ShopFeatureMap final : public FeatureMap {
 public:
  static constexpr std::size_t kDimension = 21;

  explicit ShopFeatureMap(const ShopSimEnv& env) : env_(env) {}
  std::size_t dimension() const override { return kDimension; }
  void features(const EnvState& state, ActionId action, SparseVector& out) const override;

 private:
  const ShopSimEnv& env_;
};

// The returned map references `env`, which must outlive it.
std::shared_ptr<const FeatureMap> make_feature_map(const Environment& env);

struct PolicyParams {
  std::vector<double> theta;

  // θ = 0, the uniform policy.
  static PolicyParams zeros(std::size_t dimension) { return {std::vector<double>(dimension, 0.0)}; }
  std::size_t dimension() const { return theta.size(); }
};

// Non-owning view used by every policy computation.
struct PolicyView {
  const FeatureMap* features = nullptr;
  std::span<const double> theta;
  double temperature = 1.0;

  PolicyView(const FeatureMap& map, std::span<const double> params, double temp = 1.0);
};

// Frozen copy of the parameters (π_ref, or the sampling policy shared by
// parallel rollout workers).
class PolicySnapshot {
 public:
  PolicySnapshot(std::shared_ptr<const FeatureMap> features, std::vector<double> theta,
                 double temperature = 1.0);

  PolicyView view() const { return PolicyView(*features_, *theta_, temperature_); }
  operator PolicyView() const { return view(); }  // NOLINT(google-explicit-constructor)

  const FeatureMap& features() const { return *features_; }
  const std::shared_ptr<const FeatureMap>& feature_map() const { return features_; }
  std::span<const double> theta() const { return *theta_; }
  double temperature() const { return temperature_; }

 private:
  std::shared_ptr<const FeatureMap> features_;
  std::shared_ptr<const std::vector<double>> theta_;
  double temperature_;
};

PolicySnapshot snapshot(std::shared_ptr<const FeatureMap> features, const PolicyParams& params,
                        double temperature = 1.0);

std::vector<double> action_logits(const PolicyView& policy, const EnvState& state,
                                  std::span<const ActionId> legal);

// Softmax over legal actions with max-logit subtraction.
std::vector<double> action_distribution(const PolicyView& policy, const EnvState& state,
                                        std::span<const ActionId> legal);

double log_prob(const PolicyView& policy, const EnvState& state, std::span<const ActionId> legal,
                ActionId action);
double log_prob(const PolicyView& policy, const Environment& env, const EnvState& state,
                ActionId action);

// ∇θ log π(action | state) = (φ(s, a) − E_π[φ(s, ·)]) / temperature.
SparseVector grad_log_prob(const PolicyView& policy, const EnvState& state,
                           std::span<const ActionId> legal, ActionId action);
SparseVector grad_log_prob(const PolicyView& policy, const Environment& env, const EnvState& state,
                           ActionId action);

ActionId sample_action(const PolicyView& policy, const Environment& env, const EnvState& state,
                       RngStream& rng);

// Highest-probability action; ties go to the earliest legal action.
ActionId greedy_action(const PolicyView& policy, const Environment& env, const EnvState& state);

// Extends `prefix` with sampled actions until it is terminal.
Trajectory sample_rollout(const PolicyView& policy, const Environment& env, Trajectory prefix,
                          RngStream& rng);

Trajectory greedy_rollout(const PolicyView& policy, const Environment& env, std::size_t task);

// Checkpoint text format: dimension on the first line, then one value per
// line at 17 significant digits (exact round trip).
void write_checkpoint(std::ostream& out, const PolicyParams& params);
PolicyParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace rro
