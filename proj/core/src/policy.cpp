#include "rro/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "rro/errors.hpp"

namespace rro {

TabularFeatureMap::TabularFeatureMap(const EnumTreeEnv& env)
    : internal_(env.internal_nodes()),
      branching_(static_cast<std::size_t>(env.branching())),
      dim_(env.tasks().size() * env.internal_nodes() * static_cast<std::size_t>(env.branching())) {}

void TabularFeatureMap::features(const EnvState& state, ActionId action, SparseVector& out) const {
  out.clear();
  if (state.state_id >= internal_) throw InvalidArgumentError("no features at a leaf");
  out.push_back({(state.task * internal_ + state.state_id) * branching_ +
                     static_cast<std::size_t>(action),
                 1.0});
}

void ShopFeatureMap::features(const EnvState& state, ActionId action, SparseVector& out) const {
  using Kind = ShopSimEnv::ActionKind;
  out.clear();
  const auto act = env_.decode(action);
  const auto page = ShopSimEnv::page(state);
  const auto kind = static_cast<std::size_t>(act.kind);
  const std::size_t page_state = page.constraints == 0 ? 0 : (page.selected < 0 ? 1 : 2);
  const auto target = env_.target_mask(state.task);

  double match = 0.0;
  switch (act.kind) {
    case Kind::kSearch:
    case Kind::kFilter:
      match = (target >> act.arg) & 1U ? 1.0 : 0.0;
      break;
    case Kind::kSelect:
      match = env_.match_fraction(state.task, act.arg);
      break;
    case Kind::kBuy:
      match = env_.match_fraction(state.task, static_cast<std::size_t>(page.selected));
      break;
  }

  out.push_back({kind, 1.0});
  out.push_back({4 + kind * 3 + page_state, 1.0});
  if (match != 0.0) out.push_back({16 + kind, match});
  if (act.kind == Kind::kSelect) {
    bool best = true;
    for (auto i : env_.results(state)) {
      if (env_.match_fraction(state.task, i) > match) {
        best = false;
        break;
      }
    }
    if (best) out.push_back({20, 1.0});
  }
}

std::shared_ptr<const FeatureMap> make_feature_map(const Environment& env) {
  if (const auto* tree = dynamic_cast<const EnumTreeEnv*>(&env)) {
    return std::make_shared<TabularFeatureMap>(*tree);
  }
  if (const auto* shop = dynamic_cast<const ShopSimEnv*>(&env)) {
    return std::make_shared<ShopFeatureMap>(*shop);
  }
  throw InvalidArgumentError("no feature map for environment kind " + std::string(env.kind()));
}

PolicyView::PolicyView(const FeatureMap& map, std::span<const double> params, double temp)
    : features(&map), theta(params), temperature(temp) {
  if (params.size() != map.dimension()) {
    throw InvalidArgumentError("parameter dimension " + std::to_string(params.size()) +
                               " does not match feature dimension " +
                               std::to_string(map.dimension()));
  }
  if (!(temp > 0.0)) throw InvalidArgumentError("sampling temperature must be positive");
}

PolicySnapshot::PolicySnapshot(std::shared_ptr<const FeatureMap> features,
                               std::vector<double> theta, double temperature)
    : features_(std::move(features)),
      theta_(std::make_shared<const std::vector<double>>(std::move(theta))),
      temperature_(temperature) {
  view();  // validates
}

PolicySnapshot snapshot(std::shared_ptr<const FeatureMap> features, const PolicyParams& params,
                        double temperature) {
  return PolicySnapshot(std::move(features), params.theta, temperature);
}

std::vector<double> action_logits(const PolicyView& policy, const EnvState& state,
                                  std::span<const ActionId> legal) {
  std::vector<double> logits(legal.size());
  SparseVector phi;
  for (std::size_t i = 0; i < legal.size(); ++i) {
    policy.features->features(state, legal[i], phi);
    double z = 0.0;
    for (const auto& f : phi) z += policy.theta[f.index] * f.value;
    logits[i] = z / policy.temperature;
  }
  return logits;
}

std::vector<double> action_distribution(const PolicyView& policy, const EnvState& state,
                                        std::span<const ActionId> legal) {
  if (legal.empty()) throw InvalidArgumentError("action distribution over an empty legal set");
  auto p = action_logits(policy, state, legal);
  const double peak = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (auto& v : p) {
    v = std::exp(v - peak);
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

namespace {

std::size_t position_of(std::span<const ActionId> legal, ActionId action) {
  const auto it = std::find(legal.begin(), legal.end(), action);
  if (it == legal.end()) throw IllegalActionError("action " + std::to_string(action) + " not legal");
  return static_cast<std::size_t>(it - legal.begin());
}

}  // namespace

double log_prob(const PolicyView& policy, const EnvState& state, std::span<const ActionId> legal,
                ActionId action) {
  const std::size_t k = position_of(legal, action);
  const auto z = action_logits(policy, state, legal);
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - peak);
  return (z[k] - peak) - std::log(total);
}

double log_prob(const PolicyView& policy, const Environment& env, const EnvState& state,
                ActionId action) {
  const auto legal = env.legal_actions(state);
  return log_prob(policy, state, legal, action);
}

SparseVector grad_log_prob(const PolicyView& policy, const EnvState& state,
                           std::span<const ActionId> legal, ActionId action) {
  const std::size_t k = position_of(legal, action);
  const auto pi = action_distribution(policy, state, legal);
  SparseVector acc;
  SparseVector phi;
  for (std::size_t i = 0; i < legal.size(); ++i) {
    policy.features->features(state, legal[i], phi);
    const double w = ((i == k ? 1.0 : 0.0) - pi[i]) / policy.temperature;
    for (const auto& f : phi) acc.push_back({f.index, w * f.value});
  }
  std::stable_sort(acc.begin(), acc.end(),
                   [](const Feature& a, const Feature& b) { return a.index < b.index; });
  SparseVector out;
  for (const auto& f : acc) {
    if (!out.empty() && out.back().index == f.index) {
      out.back().value += f.value;
    } else {
      out.push_back(f);
    }
  }
  return out;
}

SparseVector grad_log_prob(const PolicyView& policy, const Environment& env, const EnvState& state,
                           ActionId action) {
  const auto legal = env.legal_actions(state);
  return grad_log_prob(policy, state, legal, action);
}

ActionId sample_action(const PolicyView& policy, const Environment& env, const EnvState& state,
                       RngStream& rng) {
  if (state.terminal) throw InvalidArgumentError("cannot sample an action in a terminal state");
  const auto legal = env.legal_actions(state);
  const auto pi = action_distribution(policy, state, legal);
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < legal.size(); ++i) {
    cumulative += pi[i];
    if (u < cumulative) return legal[i];
  }
  return legal.back();
}

ActionId greedy_action(const PolicyView& policy, const Environment& env, const EnvState& state) {
  if (state.terminal) throw InvalidArgumentError("cannot act in a terminal state");
  const auto legal = env.legal_actions(state);
  const auto z = action_logits(policy, state, legal);
  const auto best = std::max_element(z.begin(), z.end()) - z.begin();
  return legal[static_cast<std::size_t>(best)];
}

Trajectory sample_rollout(const PolicyView& policy, const Environment& env, Trajectory prefix,
                          RngStream& rng) {
  while (!prefix.terminal()) env.extend(prefix, sample_action(policy, env, prefix.end_state(), rng));
  return prefix;
}

Trajectory greedy_rollout(const PolicyView& policy, const Environment& env, std::size_t task) {
  Trajectory t = env.start(task);
  while (!t.terminal()) env.extend(t, greedy_action(policy, env, t.end_state()));
  return t;
}

void write_checkpoint(std::ostream& out, const PolicyParams& params) {
  out << params.theta.size() << '\n';
  char buf[64];
  for (double v : params.theta) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << '\n';
  }
}

PolicyParams read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty checkpoint");
  std::size_t d = 0;
  try {
    d = std::stoull(line);
  } catch (const std::exception&) {
    throw ParseError("checkpoint header must be the dimension");
  }
  PolicyParams p;
  p.theta.reserve(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::getline(in, line)) throw ParseError("checkpoint truncated");
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str() || !std::isfinite(v)) throw ParseError("bad checkpoint value: " + line);
    p.theta.push_back(v);
  }
  return p;
}

void save_checkpoint(const std::string& path, const PolicyParams& params) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path);
  write_checkpoint(out, params);
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot read " + path);
  return read_checkpoint(in);
}

}  // namespace rro
