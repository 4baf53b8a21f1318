#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rro/harness.hpp"
#include "rro/reward.hpp"
#include "rro/sampling.hpp"
#include "rro/training.hpp"

using namespace rro;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = check();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.pass) ++failures;
  std::printf("%s %d %s: %s [%.2fs]\n", out.pass ? "PASS" : "FAIL", id, title, out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// Every tree shape with D <= 4 and B <= 3, ten random policies each.
template <typename Fn>
void tree_sweep(std::uint64_t seed, Fn&& fn) {
  std::mt19937_64 gen(seed);
  for (int d = 1; d <= 4; ++d) {
    for (int b = 1; b <= 3; ++b) {
      const auto env = testing::random_tree(d, b, 2, gen);
      const auto fm = make_feature_map(env);
      for (int k = 0; k < 10; ++k) {
        const auto theta = testing::random_theta(fm->dimension(), gen, 0.5 + k * 0.5);
        fn(env, *fm, theta);
      }
    }
  }
}

Outcome decomposition() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  std::size_t envs = 0, checked = 0;
  bool ok = true;
  tree_sweep(101, [&](const EnumTreeEnv& env, const FeatureMap& fm, const std::vector<double>& theta) {
    const auto r = verify_decomposition(env, PolicyView(fm, theta), 1e-12);
    worst = std::max(worst, r.max_violation);
    ok &= r.passed();
    checked += r.checked_prefixes;
    ++envs;
  });
  const double secs = elapsed_since(t0);
  return {ok && secs < 10.0,
          fmt("%.0f (env, policy) cases, %.0f prefixes, max violation %.3g, %.2fs", envs, checked, worst, secs)};
}

Outcome rising_existence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t violations = 0, checked = 0;
  double slack = 1e9;
  tree_sweep(101, [&](const EnumTreeEnv& env, const FeatureMap& fm, const std::vector<double>& theta) {
    const auto r = verify_rising_existence(env, PolicyView(fm, theta), 1e-12);
    violations += r.violations;
    checked += r.checked_prefixes;
    slack = std::min(slack, r.min_slack);
  });
  const double secs = elapsed_since(t0);
  return {violations == 0 && secs < 10.0,
          fmt("%.0f prefixes, %.0f violations, min slack %.3g, %.2fs", checked, violations, slack, secs)};
}

Outcome estimator_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(202);
  const auto shop = testing::small_shop(5);
  const auto shop_fm = make_feature_map(shop);
  int within = 0;
  double worst = 0;
  for (int c = 0; c < 100; ++c) {
    const auto tree = testing::random_tree(1 + c % 4, 2 + c % 2, 1, gen);
    const auto tree_fm = make_feature_map(tree);
    const bool use_shop = c % 5 == 4;
    const Environment& env = use_shop ? static_cast<const Environment&>(shop) : tree;
    const FeatureMap& fm = use_shop ? *shop_fm : *tree_fm;
    const auto theta = testing::random_theta(fm.dimension(), gen, 1.5);
    const PolicyView pi(fm, theta);
    // Random prefix that stops short of the end.
    const std::size_t task = gen() % env.tasks().size();
    auto prefix = env.start(task);
    RngStream rng(StreamKey(static_cast<std::uint64_t>(c)));
    const std::size_t len = gen() % static_cast<std::size_t>(env.task(task).max_steps);
    while (prefix.length() < len && !prefix.terminal()) {
      env.extend(prefix, sample_action(pi, env, prefix.end_state(), rng));
    }
    const double exact = static_cast<double>(testing::value_ref(env, fm, theta, prefix.end_state()));
    const double est = mc_process_reward(env, prefix, pi, 1024, StreamKey(9000 + c)).value;
    worst = std::max(worst, std::abs(est - exact));
    within += std::abs(est - exact) <= 0.05;
  }
  const double secs = elapsed_since(t0);
  return {within >= 95 && secs < 60.0,
          fmt("%.0f/100 within 0.05 of the exact value, max error %.4f, %.2fs", within, worst, secs)};
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sft = check_gradients(LossKind::kSft, 20, 1e-5, 1e-4, 303);
  const auto dpo = check_gradients(LossKind::kDpo, 20, 1e-5, 1e-4, 303, 0.1);
  const double secs = elapsed_since(t0);
  return {sft.passed() && dpo.passed() && sft.trials == 20 && dpo.trials == 20 &&
              std::max(sft.max_dimension, dpo.max_dimension) <= 200 && secs < 30.0,
          fmt("sft max rel err %.3g, dpo max rel err %.3g, max d %.0f, %.2fs", sft.max_relative_error,
              dpo.max_relative_error, static_cast<double>(std::max(sft.max_dimension, dpo.max_dimension)),
              secs)};
}

Outcome dpo_anchors() {
  double worst_ln2 = 0;
  for (double beta : {0.01, 0.1, 0.5, 1.0, 10.0}) {
    worst_ln2 = std::max(worst_ln2, std::abs(dpo_pair_loss(0.0, beta) - std::log(2.0)));
  }
  // Degenerate pair through the full loss path.
  const auto env = testing::hand_tree();
  const auto fm = make_feature_map(env);
  std::mt19937_64 gen(404);
  const auto theta = testing::random_theta(fm->dimension(), gen);
  const auto ref = testing::random_theta(fm->dimension(), gen);
  PreferencePair p;
  p.context = env.reset(0);
  p.chosen = {1};
  p.rejected = {1};
  const std::vector<PreferencePair> pairs = {p};
  const auto lg = dpo_loss_and_grad(env, PolicyView(*fm, theta), PolicyView(*fm, ref), pairs, 0.7);
  worst_ln2 = std::max(worst_ln2, std::abs(lg.loss - std::log(2.0)));
  double grad_norm = l2_norm(lg.grad);
  const double anchor = std::abs(dpo_pair_loss(2.0, 1.0) - std::log1p(std::exp(-2.0)));
  return {worst_ln2 <= 1e-12 && anchor <= 1e-12 && grad_norm == 0.0,
          fmt("|L(0)-ln2| <= %.3g, |L(2;1)-ln(1+e^-2)| = %.3g, degenerate grad norm %.3g", worst_ln2,
              anchor, grad_norm)};
}

Outcome explore_semantics() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> grid = {0, 0.25, 0.5, 0.75, 1};
  const auto env = testing::hand_tree();
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t len = 1; len <= 5; ++len) {
    std::vector<std::size_t> digits(len + 1, 0);
    for (;;) {
      std::vector<double> stream;
      for (std::size_t i = 1; i <= len; ++i) stream.push_back(grid[digits[i]]);
      const double prev = grid[digits[0]];
      std::vector<ScriptedCandidateSource::Entry> entries;
      for (std::size_t i = 0; i < len; ++i) entries.push_back({static_cast<ActionId>(i), stream[i]});
      for (std::size_t max_c = 1; max_c <= len; ++max_c) {
        for (std::size_t min_c = 1; min_c <= max_c; ++min_c) {
          for (bool weak : {true, false}) {
            ExplorationBudget b;
            b.min_candidates = min_c;
            b.max_candidates = max_c;
            b.comparison = weak ? Comparison::kWeak : Comparison::kStrict;
            ScriptedCandidateSource src(entries);
            const auto got = explore_until_rising(prev, b, src);
            const auto want = testing::stop_ref(prev, stream, min_c, max_c, weak);
            bool ok = got.candidates.size() == want.drawn &&
                      (got.stop_reason == StopReason::kRisingFound) == want.rising_found &&
                      got.candidates.size() <= max_c;
            if (ok && want.rising_found) ok = got.stop_index == want.drawn;
            std::vector<double> drawn(stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(want.drawn));
            const auto pair = build_pair(got, env.start(0));
            const auto pref = testing::pair_ref(drawn);
            ok = ok && pair.has_value() == pref.has_value();
            if (ok && pair) {
              ok = pair->chosen == std::vector<ActionId>{static_cast<ActionId>(pref->chosen)} &&
                   pair->rejected == std::vector<ActionId>{static_cast<ActionId>(pref->rejected)};
            }
            mismatches += !ok;
            ++cases;
          }
        }
      }
      std::size_t k = 0;
      while (k < digits.size() && ++digits[k] == grid.size()) digits[k++] = 0;
      if (k == digits.size()) break;
    }
  }
  const double secs = elapsed_since(t0);
  return {mismatches == 0 && secs < 60.0,
          fmt("%.0f scripted cases, %.0f mismatches against the brute-force reference, %.2fs",
              static_cast<double>(cases), static_cast<double>(mismatches), secs)};
}

ExperimentConfig benchmark_config() {
  ExperimentConfig c;  // defaults: 20-task D=4 B=3 suite
  c.suite_tasks = 20;
  c.suite_depth = 4;
  c.suite_branching = 3;
  c.methods = {Method::kSft, Method::kFixedK, Method::kRro};
  c.seeds = {1, 2, 3, 4, 5};
  c.fixed_k = 5;
  return c;
}

struct Means {
  double sft = 0, fixed = 0, rro = 0, rro_samples = 0;
};

Means means_of(const std::vector<MethodResult>& rows) {
  Means m;
  for (const auto& s : summarize(rows)) {
    if (s.method == Method::kSft) m.sft = s.mean_reward;
    if (s.method == Method::kFixedK) m.fixed = s.mean_reward;
    if (s.method == Method::kRro) {
      m.rro = s.mean_reward;
      m.rro_samples = s.mean_samples;
    }
  }
  return m;
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = means_of(compare_methods(benchmark_config()));
  const double secs = elapsed_since(t0);
  const bool ok = m.rro >= m.sft + 0.02 && m.rro >= m.fixed - 0.02 && m.rro_samples <= 0.8 * 5 &&
                  secs < 300.0;
  return {ok, fmt("reward sft %.4f, fixed_k(5) %.4f, rro %.4f; rro samples/step %.4f", m.sft, m.fixed,
                  m.rro, m.rro_samples)};
}

Outcome rising() {
  StageTally hand;
  tally_rising(0.3, std::vector<double>{0.2, 0.5, 0.4, 0.6, 0.6, 0.9}, Comparison::kStrict, hand);
  const auto h = proportions_of(hand);
  bool ok = h.proportions == std::array<double, 3>{0.5, 0.5, 0.5};
  StageTally down, up;
  tally_rising(0.9, std::vector<double>{0.9, 0.7, 0.7, 0.4, 0.1, 0.0}, Comparison::kStrict, down);
  tally_rising(0.0, std::vector<double>{0.1, 0.2, 0.4, 0.6, 0.8, 1.0}, Comparison::kStrict, up);
  ok = ok && proportions_of(down).proportions == std::array<double, 3>{0, 0, 0};
  ok = ok && proportions_of(up).proportions == std::array<double, 3>{1, 1, 1};

  const auto config = benchmark_config();
  const auto ws = make_workspace(config);
  double sft_final = 0, rro_final = 0;
  for (auto seed : config.seeds) {
    const auto run = run_method_full(ws, config, Method::kRro, seed);
    const auto a_sft = rising_analysis(*ws.env, PolicyView(*ws.features, run.sft_params.theta),
                                       ws.eval_tasks, config.rising_trajectories, RewardSource::kOracle,
                                       config.rising_rollouts, seed);
    const auto a_rro = rising_analysis(*ws.env, PolicyView(*ws.features, run.final_params.theta),
                                       ws.eval_tasks, config.rising_trajectories, RewardSource::kOracle,
                                       config.rising_rollouts, seed);
    sft_final += a_sft.proportions[2] / static_cast<double>(config.seeds.size());
    rro_final += a_rro.proportions[2] / static_cast<double>(config.seeds.size());
  }
  ok = ok && rro_final >= sft_final;
  return {ok, fmt("hand example (%.2f, %.2f, %.2f); final-stage rising sft %.4f", h.proportions[0],
                  h.proportions[1], h.proportions[2], sft_final) +
                  fmt(", rro %.4f", rro_final)};
}

Outcome determinism() {
  auto config = benchmark_config();
  config.methods = {Method::kNone, Method::kSft, Method::kEto, Method::kFixedK, Method::kRro};
  config.workers = 1;
  const auto a = results_csv(compare_methods(config));
  const auto b = results_csv(compare_methods(config));
  config.workers = 4;
  const auto c = results_csv(compare_methods(config));
  config.workers = 7;
  const auto d = results_csv(compare_methods(config));
  const bool ok = a == b && a == c && a == d;
  return {ok, fmt("results.csv (%.0f bytes) identical across reruns and workers 1/4/7", static_cast<double>(a.size()))};
}

}  // namespace

int main() {
  report(1, "oracle decomposition", decomposition);
  report(2, "rising existence", rising_existence);
  report(3, "estimator consistency", estimator_consistency);
  report(4, "gradient correctness", gradients);
  report(5, "dpo anchors", dpo_anchors);
  report(6, "stopping rule and pair semantics", explore_semantics);
  report(7, "end-to-end method comparison", end_to_end);
  report(8, "rising analysis", rising);
  report(9, "determinism", determinism);
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
