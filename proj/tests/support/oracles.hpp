#pragma once

// Reference implementations used only by tests. None of these call into the
// library's policy, reward or sampling code; they recompute everything from
// the environment's transition function and raw parameter vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "rro/enum_tree_env.hpp"
#include "rro/env.hpp"
#include "rro/policy.hpp"
#include "rro/shop_env.hpp"

namespace rro::testing {

inline std::vector<long double> softmax_ref(const std::vector<long double>& logits) {
  long double hi = logits.front();
  for (auto l : logits) hi = std::max(hi, l);
  std::vector<long double> p(logits.size());
  long double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += p[i] = std::exp(logits[i] - hi);
  for (auto& x : p) x /= z;
  return p;
}

inline long double dot_ref(const FeatureMap& fm, const std::vector<double>& theta,
                           const EnvState& s, ActionId a) {
  SparseVector f;
  fm.features(s, a, f);
  long double acc = 0;
  for (const auto& x : f) acc += static_cast<long double>(x.value) * theta[x.index];
  return acc;
}

inline std::vector<long double> distribution_ref(const FeatureMap& fm,
                                                 const std::vector<double>& theta,
                                                 const EnvState& s,
                                                 const std::vector<ActionId>& legal,
                                                 double temperature = 1.0) {
  std::vector<long double> logits;
  for (auto a : legal) logits.push_back(dot_ref(fm, theta, s, a) / temperature);
  return softmax_ref(logits);
}

// Expected outcome by enumerating every completion path.
inline long double value_ref(const Environment& env, const FeatureMap& fm,
                             const std::vector<double>& theta, const EnvState& s) {
  if (s.terminal) return env.terminal_reward(s);
  const auto legal = env.legal_actions(s);
  const auto p = distribution_ref(fm, theta, s, legal);
  long double v = 0;
  for (std::size_t i = 0; i < legal.size(); ++i) {
    v += p[i] * value_ref(env, fm, theta, env.transition(s, legal[i]).next);
  }
  return v;
}

// All complete action sequences reachable from `s`.
inline void enumerate_paths(const Environment& env, const EnvState& s,
                            std::vector<ActionId>& prefix,
                            const std::function<void(const std::vector<ActionId>&, const EnvState&)>& fn) {
  if (s.terminal) {
    fn(prefix, s);
    return;
  }
  for (auto a : env.legal_actions(s)) {
    prefix.push_back(a);
    enumerate_paths(env, env.transition(s, a).next, prefix, fn);
    prefix.pop_back();
  }
}

// Scripted exploration outcome computed by scanning every admissible stop
// index, independent of the library's sequential loop.
struct StopRef {
  std::size_t drawn = 0;
  bool rising_found = false;
};

inline StopRef stop_ref(double prev, const std::vector<double>& stream, std::size_t min_c,
                        std::size_t max_c, bool weak) {
  std::vector<std::size_t> admissible;
  for (std::size_t i = min_c; i <= std::min(max_c, stream.size()); ++i) {
    const double r = stream[i - 1];
    if (weak ? r >= prev : r > prev) admissible.push_back(i);
  }
  if (!admissible.empty()) return {*std::min_element(admissible.begin(), admissible.end()), true};
  return {std::min(max_c, stream.size()), false};
}

struct PairRef {
  std::size_t chosen = 0;  // 0-based
  std::size_t rejected = 0;
};

inline std::optional<PairRef> pair_ref(const std::vector<double>& r) {
  if (r.size() < 2) return std::nullopt;
  double hi = r[0], lo = r[0];
  for (double x : r) hi = std::max(hi, x), lo = std::min(lo, x);
  if (hi == lo) return std::nullopt;
  PairRef out;
  for (std::size_t i = r.size(); i-- > 0;) {
    if (r[i] == hi) out.chosen = i;
    if (r[i] == lo) out.rejected = i;
  }
  return out;
}

// Stage of step t among n, as explicit thirds.
inline int stage_ref(std::size_t t, std::size_t n) {
  if (3 * t <= n) return 1;
  if (3 * t <= 2 * n) return 2;
  return 3;
}

// Central finite differences of f at theta.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> theta, double h) {
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    const double up = f(theta);
    theta[i] = keep - h;
    const double down = f(theta);
    theta[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale == 0 ? 0 : std::sqrt(diff) / scale;
}

inline std::vector<double> random_theta(std::size_t d, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> t(d);
  for (auto& x : t) x = n(gen);
  return t;
}

inline EnumTreeEnv random_tree(int depth, int branching, std::size_t tasks, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t leaves = 1;
  for (int i = 0; i < depth; ++i) leaves *= static_cast<std::size_t>(branching);
  std::vector<std::vector<double>> r(tasks, std::vector<double>(leaves));
  for (auto& row : r)
    for (auto& x : row) x = u(gen);
  return EnumTreeEnv(depth, branching, std::move(r));
}

inline ShopSimEnv small_shop(int max_steps = ShopSimEnv::kDefaultMaxSteps) {
  std::vector<ShopItem> items = {{"i0", {"red", "cotton"}},
                                 {"i1", {"red", "wool", "large"}},
                                 {"i2", {"blue", "cotton", "large"}},
                                 {"i3", {"blue", "wool"}}};
  return ShopSimEnv(std::move(items), {{"red", "wool", "large"}, {"blue", "cotton"},
                                       {"blue", "large", "wool"}},
                    max_steps);
}

inline EnumTreeEnv hand_tree() { return EnumTreeEnv(2, 2, {{1.0, 0.0, 0.5, 0.5}}); }

}  // namespace rro::testing
