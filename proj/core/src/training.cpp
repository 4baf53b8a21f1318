#include "rro/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

#include "rro/enum_tree_env.hpp"
#include "rro/errors.hpp"
#include "rro/shop_env.hpp"

namespace rro {

void DpoConfig::validate() const {
  if (!(beta > 0.0)) throw InvalidArgumentError("DPO beta must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgumentError("DPO learning rate must be positive");
  if (epochs < 1) throw InvalidArgumentError("DPO epochs must be >= 1");
}

DpoMode parse_dpo_mode(std::string_view text) {
  if (text == "offline_epoch") return DpoMode::kOfflineEpoch;
  if (text == "online_per_step") return DpoMode::kOnlinePerStep;
  throw ParseError("DPO mode must be 'offline_epoch' or 'online_per_step'");
}

std::string_view to_string(DpoMode mode) {
  return mode == DpoMode::kOfflineEpoch ? "offline_epoch" : "online_per_step";
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

namespace {

void add_scaled(std::vector<double>& dense, const SparseVector& sparse, double scale) {
  for (const auto& f : sparse) dense[f.index] += scale * f.value;
}

// Sorts and merges duplicate indices.
SparseVector canonical(SparseVector v) {
  std::stable_sort(v.begin(), v.end(),
                   [](const Feature& a, const Feature& b) { return a.index < b.index; });
  SparseVector out;
  for (const auto& f : v) {
    if (!out.empty() && out.back().index == f.index) {
      out.back().value += f.value;
    } else {
      out.push_back(f);
    }
  }
  return out;
}

// a − b for canonical vectors.
SparseVector difference(const SparseVector& a, const SparseVector& b) {
  SparseVector out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].index < b[j].index)) {
      out.push_back(a[i++]);
    } else if (i == a.size() || b[j].index < a[i].index) {
      out.push_back({b[j].index, -b[j].value});
      ++j;
    } else {
      out.push_back({a[i].index, a[i].value - b[j].value});
      ++i;
      ++j;
    }
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

LossAndGrad sft_loss_and_grad(const Environment& env, const PolicyView& policy,
                              std::span<const Trajectory> dataset) {
  if (dataset.empty()) throw InvalidArgumentError("SFT dataset is empty");
  LossAndGrad out;
  out.grad.assign(policy.theta.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(dataset.size());
  for (const auto& traj : dataset) {
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& state = traj.states[t];
      const auto legal = env.legal_actions(state);
      const ActionId a = traj.steps[t].action;
      out.loss -= scale * log_prob(policy, state, legal, a);
      add_scaled(out.grad, grad_log_prob(policy, state, legal, a), -scale);
    }
  }
  return out;
}

double dpo_pair_loss(double delta, double beta) {
  const double x = -beta * delta;
  // softplus(x) = log(1 + e^x)
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sequence_log_prob(const Environment& env, const PolicyView& policy, const EnvState& context,
                         std::span<const ActionId> actions, SparseVector* grad) {
  EnvState state = context;
  double total = 0.0;
  for (ActionId a : actions) {
    const auto legal = env.legal_actions(state);
    total += log_prob(policy, state, legal, a);
    if (grad) {
      auto g = grad_log_prob(policy, state, legal, a);
      grad->insert(grad->end(), g.begin(), g.end());
    }
    state = env.transition(state, a).next;
  }
  return total;
}

double dpo_margin(const Environment& env, const PolicyView& policy, const PolicyView& reference,
                  const PreferencePair& pair) {
  const double w = sequence_log_prob(env, policy, pair.context, pair.chosen) -
                   sequence_log_prob(env, reference, pair.context, pair.chosen);
  const double l = sequence_log_prob(env, policy, pair.context, pair.rejected) -
                   sequence_log_prob(env, reference, pair.context, pair.rejected);
  return w - l;
}

LossAndGrad dpo_loss_and_grad(const Environment& env, const PolicyView& policy,
                              const PolicyView& reference, std::span<const PreferencePair> pairs,
                              double beta) {
  if (pairs.empty()) throw InvalidArgumentError("DPO needs at least one preference pair");
  if (!(beta > 0.0)) throw InvalidArgumentError("DPO beta must be positive");
  LossAndGrad out;
  out.grad.assign(policy.theta.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(pairs.size());
  for (const auto& pair : pairs) {
    SparseVector gw;
    SparseVector gl;
    const double w = sequence_log_prob(env, policy, pair.context, pair.chosen, &gw) -
                     sequence_log_prob(env, reference, pair.context, pair.chosen);
    const double l = sequence_log_prob(env, policy, pair.context, pair.rejected, &gl) -
                     sequence_log_prob(env, reference, pair.context, pair.rejected);
    const double delta = w - l;
    out.loss += scale * dpo_pair_loss(delta, beta);
    // d/dθ softplus(−βΔ) = −β σ(−βΔ) ∇Δ
    const double coeff = -beta * sigmoid(-beta * delta) * scale;
    add_scaled(out.grad, difference(canonical(std::move(gw)), canonical(std::move(gl))), coeff);
  }
  return out;
}

PolicyParams gradient_step(const PolicyParams& params, std::span<const double> grad,
                           double learning_rate) {
  if (grad.size() != params.theta.size()) {
    throw InvalidArgumentError("gradient dimension mismatch");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw InvalidArgumentError("non-finite gradient");
  }
  PolicyParams out = params;
  for (std::size_t i = 0; i < grad.size(); ++i) out.theta[i] -= learning_rate * grad[i];
  return out;
}

std::pair<PolicyParams, TrainReport> train_sft(const Environment& env, const FeatureMap& features,
                                               PolicyParams params,
                                               std::span<const Trajectory> dataset,
                                               double learning_rate, std::size_t epochs) {
  TrainReport report;
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto lg = sft_loss_and_grad(env, PolicyView(features, params.theta), dataset);
    report.losses.push_back(lg.loss);
    report.grad_norms.push_back(l2_norm(lg.grad));
    params = gradient_step(params, lg.grad, learning_rate);
  }
  report.final_loss = sft_loss_and_grad(env, PolicyView(features, params.theta), dataset).loss;
  return {std::move(params), std::move(report)};
}

std::pair<PolicyParams, TrainReport> train_dpo(const Environment& env, const FeatureMap& features,
                                               PolicyParams params, const PolicySnapshot& reference,
                                               std::span<const PreferencePair> pairs,
                                               const DpoConfig& config, DpoMode mode) {
  config.validate();
  TrainReport report;
  if (pairs.empty()) return {std::move(params), std::move(report)};
  const PolicyView ref(reference.features(), reference.theta());

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch =
      mode == DpoMode::kOnlinePerStep
          ? 1
          : (config.batch_size == 0 ? pairs.size() : std::min(config.batch_size, pairs.size()));
  const bool shuffle = mode == DpoMode::kOfflineEpoch && batch < pairs.size();
  RngStream rng(StreamKey(config.shuffle_seed).child(0x64706f));

  for (std::size_t e = 0; e < config.epochs; ++e) {
    if (shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    double loss = 0.0;
    double norm = 0.0;
    std::vector<PreferencePair> chunk;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      chunk.clear();
      for (std::size_t k = start; k < std::min(start + batch, order.size()); ++k) {
        chunk.push_back(pairs[order[k]]);
      }
      const auto lg = dpo_loss_and_grad(env, PolicyView(features, params.theta), ref, chunk,
                                        config.beta);
      const double weight = static_cast<double>(chunk.size()) / static_cast<double>(pairs.size());
      loss += weight * lg.loss;
      norm += weight * l2_norm(lg.grad);
      params = gradient_step(params, lg.grad, config.learning_rate);
    }
    report.losses.push_back(loss);
    report.grad_norms.push_back(norm);
  }
  report.final_loss =
      dpo_loss_and_grad(env, PolicyView(features, params.theta), ref, pairs, config.beta).loss;
  return {std::move(params), std::move(report)};
}

namespace {

struct RandomInstance {
  std::unique_ptr<Environment> env;
  std::shared_ptr<const FeatureMap> features;
};

RandomInstance random_instance(RngStream& rng, std::size_t trial) {
  RandomInstance inst;
  if (trial % 4 == 3) {
    // Small shop so the real-valued match features are exercised too.
    std::vector<std::string> attrs = {"red", "blue", "cotton", "wool", "large", "small"};
    std::vector<ShopItem> items;
    for (int i = 0; i < 5; ++i) {
      ShopItem item{"item" + std::to_string(i), {}};
      for (const auto& a : attrs) {
        if (rng.uniform() < 0.4) item.attributes.push_back(a);
      }
      if (item.attributes.empty()) item.attributes.push_back(attrs[rng.below(attrs.size())]);
      items.push_back(std::move(item));
    }
    std::vector<std::vector<std::string>> targets = {{attrs[rng.below(3)], attrs[3 + rng.below(3)]},
                                                     {attrs[rng.below(6)]}};
    inst.env = std::make_unique<ShopSimEnv>(std::move(items), std::move(targets), 4);
  } else {
    const int depth = 2 + static_cast<int>(rng.below(2));
    const int branching = 2 + static_cast<int>(rng.below(2));
    const std::size_t tasks = 1 + rng.below(3);
    std::size_t leaves = 1;
    for (int d = 0; d < depth; ++d) leaves *= static_cast<std::size_t>(branching);
    std::vector<std::vector<double>> tables(tasks, std::vector<double>(leaves));
    for (auto& t : tables) {
      for (auto& r : t) r = rng.uniform();
    }
    inst.env = std::make_unique<EnumTreeEnv>(depth, branching, std::move(tables));
  }
  inst.features = make_feature_map(*inst.env);
  return inst;
}

Trajectory random_walk(const Environment& env, std::size_t task, RngStream& rng,
                       std::size_t max_len = 1000) {
  Trajectory t = env.start(task);
  while (!t.terminal() && t.length() < max_len) {
    const auto legal = env.legal_actions(t.end_state());
    env.extend(t, legal[rng.below(legal.size())]);
  }
  return t;
}

}  // namespace

GradientCheckReport check_gradients(LossKind kind, std::size_t trials, double h, double tolerance,
                                    std::uint64_t seed, double beta) {
  GradientCheckReport report;
  report.trials = trials;
  report.tolerance = tolerance;
  const StreamKey root(seed);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    RngStream rng(root.child(trial));
    auto inst = random_instance(rng, trial);
    const auto& env = *inst.env;
    const std::size_t d = inst.features->dimension();
    report.max_dimension = std::max(report.max_dimension, d);
    std::vector<double> theta(d);
    for (auto& v : theta) v = rng.normal();

    std::function<LossAndGrad(std::span<const double>)> objective;
    std::vector<Trajectory> dataset;
    std::vector<PreferencePair> pairs;
    std::vector<double> ref_theta(d);
    if (kind == LossKind::kSft) {
      for (int i = 0; i < 4; ++i) dataset.push_back(random_walk(env, rng.below(env.tasks().size()), rng));
      objective = [&](std::span<const double> th) {
        return sft_loss_and_grad(env, PolicyView(*inst.features, th), dataset);
      };
    } else {
      for (auto& v : ref_theta) v = rng.normal();
      for (int i = 0; i < 20; ++i) {
        const std::size_t task = rng.below(env.tasks().size());
        PreferencePair p;
        p.task = task;
        if (i % 5 == 4) {
          // trajectory-level pair
          p.context = env.reset(task);
          p.chosen = random_walk(env, task, rng).actions();
          p.rejected = random_walk(env, task, rng).actions();
        } else {
          const std::size_t len = rng.below(3);
          Trajectory prefix = random_walk(env, task, rng, len);
          if (prefix.terminal()) prefix = env.start(task);
          const auto legal = env.legal_actions(prefix.end_state());
          p.context = prefix.end_state();
          p.chosen = {legal[rng.below(legal.size())]};
          p.rejected = {legal[rng.below(legal.size())]};
        }
        pairs.push_back(std::move(p));
      }
      objective = [&](std::span<const double> th) {
        return dpo_loss_and_grad(env, PolicyView(*inst.features, th),
                                 PolicyView(*inst.features, ref_theta), pairs, beta);
      };
    }

    const auto analytic = objective(theta).grad;
    std::vector<double> numeric(d);
    std::vector<double> probe = theta;
    for (std::size_t i = 0; i < d; ++i) {
      probe[i] = theta[i] + h;
      const double up = objective(probe).loss;
      probe[i] = theta[i] - h;
      const double down = objective(probe).loss;
      probe[i] = theta[i];
      numeric[i] = (up - down) / (2.0 * h);
    }
    std::vector<double> diff(d);
    for (std::size_t i = 0; i < d; ++i) diff[i] = analytic[i] - numeric[i];
    const double denom = std::max({l2_norm(analytic), l2_norm(numeric), 1e-12});
    report.max_relative_error = std::max(report.max_relative_error, l2_norm(diff) / denom);
  }
  return report;
}

}  // namespace rro
