#include "rro/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "rro/errors.hpp"

namespace rro {

Method parse_method(std::string_view text) {
  if (text == "none") return Method::kNone;
  if (text == "sft") return Method::kSft;
  if (text == "eto") return Method::kEto;
  if (text == "fixed_k") return Method::kFixedK;
  if (text == "rro") return Method::kRro;
  throw ParseError("unknown method '" + std::string(text) + "'");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kNone: return "none";
    case Method::kSft: return "sft";
    case Method::kEto: return "eto";
    case Method::kFixedK: return "fixed_k";
    case Method::kRro: return "rro";
  }
  return "";
}

RewardSource parse_reward_source(std::string_view text) {
  if (text == "oracle") return RewardSource::kOracle;
  if (text == "mc") return RewardSource::kMonteCarlo;
  throw ParseError("reward source must be 'oracle' or 'mc'");
}

std::string_view to_string(RewardSource source) {
  return source == RewardSource::kOracle ? "oracle" : "mc";
}

ExplorationBudget ExperimentConfig::budget() const {
  return ExplorationBudget{min_candidates, k_max, rollouts, comparison};
}

DpoConfig ExperimentConfig::dpo_config(std::uint64_t seed) const {
  return DpoConfig{dpo_beta, dpo_lr, dpo_epochs, dpo_batch, seed};
}

void ExperimentConfig::validate() const {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const char* key) {
    if (!ok) bad.emplace_back(key);
  };
  need(suite_tasks >= 1, "suite_tasks");
  need(suite_depth >= 1 && suite_depth <= 8, "suite_depth");
  need(suite_branching >= 1 && suite_branching <= 6, "suite_branching");
  need(!seeds.empty(), "seeds");
  need(!methods.empty(), "methods");
  need(expert_noise >= 0.0 && expert_noise < 1.0, "expert_noise");
  need(expert_per_task >= 1, "expert_per_task");
  need(sft_lr > 0.0, "sft_lr");
  need(rollouts >= 1, "rollouts");
  need(fixed_k >= 2, "fixed_k");
  need(min_candidates >= 1, "min_candidates");
  need(k_max >= min_candidates, "k_max");
  need(collect_passes >= 1, "collect_passes");
  need(eto_rollouts >= 2, "eto_rollouts");
  need(dpo_beta > 0.0, "dpo_beta");
  need(dpo_lr > 0.0, "dpo_lr");
  need(dpo_epochs >= 1, "dpo_epochs");
  need(sample_temperature > 0.0, "sample_temperature");
  need(workers >= 1, "workers");
  need(!output_dir.empty(), "output_dir");
  need(rising_trajectories >= 1, "rising_trajectories");
  need(rising_rollouts >= 1, "rising_rollouts");
  need(!sweep_k.empty(), "sweep_k");
  for (auto k : sweep_k) need(k >= 2, "sweep_k");
  if (!bad.empty()) {
    std::string keys;
    for (const auto& k : bad) keys += (keys.empty() ? "" : ",") + k;
    throw ConfigError("invalid values for keys " + keys, bad);
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::size_t used = 0;
  if (v.empty() || v[0] == '-') throw ParseError("expected non-negative integer");
  const auto x = std::stoull(v, &used);
  if (used != v.size()) throw ParseError("expected integer");
  return x;
}

int to_int(const std::string& v) {
  std::size_t used = 0;
  const int x = std::stoi(v, &used);
  if (used != v.size()) throw ParseError("expected integer");
  return x;
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size() || !std::isfinite(x)) throw ParseError("expected finite number");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("expected boolean");
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& f) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::string(f(v[i]));
  return s;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

// Ordered by declaration in ExperimentConfig.
const std::vector<std::pair<std::string, Field>>& fields() {
  using C = ExperimentConfig;
  using S = const std::string&;
  auto num = [](auto v) { return std::to_string(v); };
  static const std::vector<std::pair<std::string, Field>> table = {
      {"env_file", {[](C& c, S v) { c.env_file = v; }, [](const C& c) { return c.env_file; }}},
      {"suite_tasks", {[](C& c, S v) { c.suite_tasks = to_u64(v); }, [=](const C& c) { return num(c.suite_tasks); }}},
      {"suite_depth", {[](C& c, S v) { c.suite_depth = to_int(v); }, [=](const C& c) { return num(c.suite_depth); }}},
      {"suite_branching", {[](C& c, S v) { c.suite_branching = to_int(v); }, [=](const C& c) { return num(c.suite_branching); }}},
      {"suite_seed", {[](C& c, S v) { c.suite_seed = to_u64(v); }, [=](const C& c) { return num(c.suite_seed); }}},
      {"method", {[](C& c, S v) { c.method = parse_method(v); }, [](const C& c) { return std::string(to_string(c.method)); }}},
      {"methods", {[](C& c, S v) {
                     c.methods.clear();
                     for (const auto& m : split_list(v)) c.methods.push_back(parse_method(m));
                   },
                   [](const C& c) { return join(c.methods, [](Method m) { return to_string(m); }); }}},
      {"seeds", {[](C& c, S v) {
                   c.seeds.clear();
                   for (const auto& s : split_list(v)) c.seeds.push_back(to_u64(s));
                 },
                 [](const C& c) { return join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }); }}},
      {"n_train_tasks", {[](C& c, S v) { c.n_train_tasks = to_u64(v); }, [=](const C& c) { return num(c.n_train_tasks); }}},
      {"n_eval_tasks", {[](C& c, S v) { c.n_eval_tasks = to_u64(v); }, [=](const C& c) { return num(c.n_eval_tasks); }}},
      {"heldout_eval", {[](C& c, S v) { c.heldout_eval = to_bool(v); }, [](const C& c) { return std::string(c.heldout_eval ? "true" : "false"); }}},
      {"expert_per_task", {[](C& c, S v) { c.expert_per_task = to_u64(v); }, [=](const C& c) { return num(c.expert_per_task); }}},
      {"expert_noise", {[](C& c, S v) { c.expert_noise = to_double(v); }, [](const C& c) { return fmt_double(c.expert_noise); }}},
      {"sft_lr", {[](C& c, S v) { c.sft_lr = to_double(v); }, [](const C& c) { return fmt_double(c.sft_lr); }}},
      {"sft_epochs", {[](C& c, S v) { c.sft_epochs = to_u64(v); }, [=](const C& c) { return num(c.sft_epochs); }}},
      {"rollouts", {[](C& c, S v) { c.rollouts = to_u64(v); }, [=](const C& c) { return num(c.rollouts); }}},
      {"fixed_k", {[](C& c, S v) { c.fixed_k = to_u64(v); }, [=](const C& c) { return num(c.fixed_k); }}},
      {"k_max", {[](C& c, S v) { c.k_max = to_u64(v); }, [=](const C& c) { return num(c.k_max); }}},
      {"min_candidates", {[](C& c, S v) { c.min_candidates = to_u64(v); }, [=](const C& c) { return num(c.min_candidates); }}},
      {"comparison", {[](C& c, S v) { c.comparison = parse_comparison(v); }, [](const C& c) { return std::string(to_string(c.comparison)); }}},
      {"collect_mode", {[](C& c, S v) { c.collect_mode = parse_collect_mode(v); }, [](const C& c) { return std::string(to_string(c.collect_mode)); }}},
      {"collect_passes", {[](C& c, S v) { c.collect_passes = to_u64(v); }, [=](const C& c) { return num(c.collect_passes); }}},
      {"eto_rollouts", {[](C& c, S v) { c.eto_rollouts = to_u64(v); }, [=](const C& c) { return num(c.eto_rollouts); }}},
      {"dpo_beta", {[](C& c, S v) { c.dpo_beta = to_double(v); }, [](const C& c) { return fmt_double(c.dpo_beta); }}},
      {"dpo_lr", {[](C& c, S v) { c.dpo_lr = to_double(v); }, [](const C& c) { return fmt_double(c.dpo_lr); }}},
      {"dpo_epochs", {[](C& c, S v) { c.dpo_epochs = to_u64(v); }, [=](const C& c) { return num(c.dpo_epochs); }}},
      {"dpo_batch", {[](C& c, S v) { c.dpo_batch = to_u64(v); }, [=](const C& c) { return num(c.dpo_batch); }}},
      {"dpo_mode", {[](C& c, S v) { c.dpo_mode = parse_dpo_mode(v); }, [](const C& c) { return std::string(to_string(c.dpo_mode)); }}},
      {"sample_temperature", {[](C& c, S v) { c.sample_temperature = to_double(v); }, [](const C& c) { return fmt_double(c.sample_temperature); }}},
      {"workers", {[](C& c, S v) { c.workers = to_u64(v); }, [=](const C& c) { return num(c.workers); }}},
      {"output_dir", {[](C& c, S v) { c.output_dir = v; }, [](const C& c) { return c.output_dir; }}},
      {"record_wall_time", {[](C& c, S v) { c.record_wall_time = to_bool(v); }, [](const C& c) { return std::string(c.record_wall_time ? "true" : "false"); }}},
      {"rising_source", {[](C& c, S v) { c.rising_source = parse_reward_source(v); }, [](const C& c) { return std::string(to_string(c.rising_source)); }}},
      {"rising_comparison", {[](C& c, S v) { c.rising_comparison = parse_comparison(v); }, [](const C& c) { return std::string(to_string(c.rising_comparison)); }}},
      {"rising_trajectories", {[](C& c, S v) { c.rising_trajectories = to_u64(v); }, [=](const C& c) { return num(c.rising_trajectories); }}},
      {"rising_rollouts", {[](C& c, S v) { c.rising_rollouts = to_u64(v); }, [=](const C& c) { return num(c.rising_rollouts); }}},
      {"sweep_k", {[](C& c, S v) {
                     c.sweep_k.clear();
                     for (const auto& s : split_list(v)) c.sweep_k.push_back(to_u64(s));
                   },
                   [](const C& c) { return join(c.sweep_k, [](std::size_t k) { return std::to_string(k); }); }}},
  };
  return table;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  std::map<std::string, const Field*> lookup;
  for (const auto& [k, f] : fields()) lookup.emplace(k, &f);

  ExperimentConfig cfg;
  std::vector<std::string> unknown;
  std::vector<std::string> malformed;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      malformed.push_back(trim(line));
      continue;
    }
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    auto it = lookup.find(key);
    if (it == lookup.end()) {
      unknown.push_back(key);
      continue;
    }
    try {
      it->second->set(cfg, value);
    } catch (const std::exception&) {
      malformed.push_back(key);
    }
  }
  if (!unknown.empty() || !malformed.empty()) {
    std::vector<std::string> keys = unknown;
    keys.insert(keys.end(), malformed.begin(), malformed.end());
    std::string detail;
    if (!unknown.empty()) detail += "unknown keys " + join(unknown, [](const std::string& s) { return s; });
    if (!malformed.empty()) {
      detail += std::string(detail.empty() ? "" : "; ") + "malformed values for " +
                join(malformed, [](const std::string& s) { return s; });
    }
    throw ConfigError(detail, keys);
  }
  if (!base_dir.empty()) {
    if (!cfg.env_file.empty() && std::filesystem::path(cfg.env_file).is_relative()) {
      cfg.env_file = (base_dir / cfg.env_file).string();
    }
    if (std::filesystem::path(cfg.output_dir).is_relative()) {
      cfg.output_dir = (base_dir / cfg.output_dir).string();
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string(), {});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace rro
