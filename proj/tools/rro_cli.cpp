#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "rro/config.hpp"
#include "rro/env_io.hpp"
#include "rro/errors.hpp"
#include "rro/harness.hpp"
#include "rro/reward.hpp"
#include "rro/sampling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> policy;
};

struct Context {
  rro::ExperimentConfig config;
  rro::Workspace ws;
  std::uint64_t seed = 0;
  fs::path out;
};

Context open(const Options& opts) {
  Context ctx;
  ctx.config = rro::load_config(opts.config_path);
  if (opts.method) ctx.config.method = rro::parse_method(*opts.method);
  ctx.seed = opts.seed ? *opts.seed : ctx.config.seeds.front();
  ctx.ws = rro::make_workspace(ctx.config);
  ctx.out = ctx.config.output_dir;
  fs::create_directories(ctx.out);
  return ctx;
}

std::ofstream create(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream out(path, std::ios::out | mode);
  if (!out) throw rro::Error("io_error", "cannot write " + path.string());
  return out;
}

std::ifstream require(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw rro::Error("io_error", "missing input " + path.string());
  return in;
}

rro::PolicyParams policy_for(const Context& ctx, const std::optional<std::string>& path) {
  if (path) return rro::load_checkpoint(*path);
  switch (ctx.config.method) {
    case rro::Method::kNone:
      return rro::PolicyParams::zeros(ctx.ws.features->dimension());
    case rro::Method::kSft:
      return rro::load_checkpoint((ctx.out / "sft.ckpt").string());
    default:
      return rro::load_checkpoint((ctx.out / "policy.ckpt").string());
  }
}

void cmd_sft(const Options& opts) {
  const Context ctx = open(opts);
  const auto stage = rro::run_sft_stage(ctx.ws, ctx.config, ctx.seed);
  auto experts = create(ctx.out / "experts.jsonl");
  rro::write_trajectories_jsonl(experts, *ctx.ws.env, stage.dataset);
  rro::save_checkpoint((ctx.out / "sft.ckpt").string(), stage.params);
  create(ctx.out / "sft_train.csv") << rro::train_report_csv(stage.report);
}

void cmd_collect(const Options& opts) {
  const Context ctx = open(opts);
  const auto sft = rro::load_checkpoint((ctx.out / "sft.ckpt").string());
  const auto stage = rro::run_collect_stage(ctx.ws, ctx.config, ctx.seed, sft);
  auto pairs = create(ctx.out / "pairs.jsonl");
  rro::write_pairs_jsonl(pairs, *ctx.ws.env, stage.pairs);
  auto estimates = create(ctx.out / "estimates.jsonl");
  rro::write_estimates_jsonl(estimates, *ctx.ws.env, stage.estimates);
  json stats = {
      {"method", std::string(rro::to_string(ctx.config.method))},
      {"seed", ctx.seed},
      {"pairs_emitted", stage.pairs.size()},
      {"explored_steps", stage.explored_steps},
      {"candidates", stage.candidates},
      {"counted_evaluations", stage.counted_evaluations},
      {"avg_samples_per_step", stage.avg_samples_per_step()},
  };
  create(ctx.out / "collect_stats.json") << stats.dump(2) << "\n";
}

void cmd_train_dpo(const Options& opts) {
  const Context ctx = open(opts);
  const auto sft = rro::load_checkpoint((ctx.out / "sft.ckpt").string());
  auto in = require(ctx.out / "pairs.jsonl");
  const auto pairs = rro::read_pairs_jsonl(in, *ctx.ws.env);
  const auto stage = rro::run_dpo_stage(ctx.ws, ctx.config, ctx.seed, sft, pairs);
  rro::save_checkpoint((ctx.out / "policy.ckpt").string(), stage.params);
  create(ctx.out / "dpo_train.csv") << rro::train_report_csv(stage.report);
}

void cmd_eval(const Options& opts) {
  const Context ctx = open(opts);
  const auto params = policy_for(ctx, opts.policy);
  rro::MethodResult r;
  r.method = ctx.config.method;
  r.env = ctx.ws.env_label;
  r.seed = ctx.seed;
  r.avg_reward = rro::evaluate_greedy(
      *ctx.ws.env, rro::PolicyView(*ctx.ws.features, params.theta), ctx.ws.eval_tasks);
  const bool explores = r.method != rro::Method::kNone && r.method != rro::Method::kSft;
  if (explores) {
    auto in = require(ctx.out / "collect_stats.json");
    const json stats = json::parse(in);
    r.avg_samples_per_step = stats.at("avg_samples_per_step").get<double>();
    r.pairs_emitted = stats.at("pairs_emitted").get<std::size_t>();
  }
  const fs::path path = ctx.out / "results.csv";
  const bool fresh = !fs::exists(path);
  auto out = create(path, std::ios::app);
  if (fresh) out << rro::results_csv_header();
  out << rro::results_csv_row(r);
}

void cmd_compare(const Options& opts) {
  const Context ctx = open(opts);
  const auto rows = rro::compare_methods(ctx.config);
  create(ctx.out / "results.csv") << rro::results_csv(rows);
}

void cmd_sweep(const Options& opts) {
  const Context ctx = open(opts);
  const auto points = rro::efficiency_sweep(ctx.config, ctx.config.sweep_k, ctx.seed);
  create(ctx.out / "curve.csv") << rro::curve_csv(points);
}

void cmd_analyze(const Options& opts) {
  const Context ctx = open(opts);
  const auto params = policy_for(ctx, opts.policy);
  const auto analysis = rro::rising_analysis(
      *ctx.ws.env, rro::PolicyView(*ctx.ws.features, params.theta), ctx.ws.eval_tasks,
      ctx.config.rising_trajectories, ctx.config.rising_source, ctx.config.rising_rollouts,
      ctx.seed, ctx.config.rising_comparison);
  create(ctx.out / "rising.csv") << rro::rising_csv(analysis);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

std::vector<rro::MethodResult> read_results(const fs::path& path) {
  auto in = require(path);
  std::string line;
  std::getline(in, line);
  if (line + "\n" != rro::results_csv_header()) {
    throw rro::ParseError("unexpected results.csv header in " + path.string());
  }
  std::vector<rro::MethodResult> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 7) throw rro::ParseError("malformed results.csv row: " + line);
    rro::MethodResult r;
    r.method = rro::parse_method(cells[0]);
    r.env = cells[1];
    r.seed = std::stoull(cells[2]);
    r.avg_reward = std::stod(cells[3]);
    r.avg_samples_per_step = std::stod(cells[4]);
    r.pairs_emitted = std::stoull(cells[5]);
    r.wall_time_s = std::stod(cells[6]);
    rows.push_back(r);
  }
  return rows;
}

std::string text_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()));
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out += rows[r][c];
      if (c + 1 < rows[r].size()) out += std::string(width[c] - rows[r][c].size() + 2, ' ');
    }
    out += "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out += std::string(total - 2, '-') + "\n";
    }
  }
  return out;
}

void cmd_report(const Options& opts) {
  const Context ctx = open(opts);
  const auto results = read_results(ctx.out / "results.csv");
  const auto summary = rro::summarize(results);
  create(ctx.out / "report.csv") << rro::summary_csv(summary);

  std::vector<std::vector<std::string>> table = {
      {"method", "runs", "avg_reward", "std", "samples/step", "pairs"}};
  for (const auto& s : summary) {
    table.push_back({std::string(rro::to_string(s.method)), std::to_string(s.runs),
                     rro::format_fixed(s.mean_reward), rro::format_fixed(s.std_reward),
                     rro::format_fixed(s.mean_samples), std::to_string(s.total_pairs)});
  }
  auto txt = create(ctx.out / "report.txt");
  txt << "env: " << ctx.ws.env_label << "\n"
      << "rising stages: step t of n belongs to stage min(3, ceil(3t/n))\n\n"
      << text_table(table);
  if (fs::exists(ctx.out / "curve.csv")) {
    txt << "\ncurve.csv\n" << require(ctx.out / "curve.csv").rdbuf();
  }
  if (fs::exists(ctx.out / "rising.csv")) {
    txt << "\nrising.csv\n" << require(ctx.out / "rising.csv").rdbuf();
  }
  txt << "\nconfig\n" << rro::format_config(ctx.config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reward-rising exploration lab"};
  app.name("rro");
  app.require_subcommand(1);

  Options opts;
  struct Entry {
    const char* name;
    const char* help;
    void (*run)(const Options&);
  };
  const Entry entries[] = {
      {"sft", "train the SFT policy from expert demonstrations", cmd_sft},
      {"collect", "collect preference pairs from the SFT policy", cmd_collect},
      {"train-dpo", "train a DPO policy on collected pairs", cmd_train_dpo},
      {"eval", "evaluate a policy and append a results.csv row", cmd_eval},
      {"compare", "run every configured method and seed into results.csv", cmd_compare},
      {"sweep", "fixed_k over sweep_k plus one rro run into curve.csv", cmd_sweep},
      {"analyze", "per-stage rising-reward proportions into rising.csv", cmd_analyze},
      {"report", "summarize results.csv into report.csv and report.txt", cmd_report},
  };
  std::map<CLI::App*, void (*)(const Options&)> handlers;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("-c,--config", opts.config_path, "experiment config file")->required();
    sub->add_option("--seed", opts.seed, "seed (default: first configured seed)");
    if (std::string_view(e.name) != "report" && std::string_view(e.name) != "compare") {
      sub->add_option("--method", opts.method, "override the configured method");
    }
    if (std::string_view(e.name) == "eval" || std::string_view(e.name) == "analyze") {
      sub->add_option("--policy", opts.policy, "checkpoint to use instead of the default");
    }
    handlers[sub] = e.run;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) handlers.at(sub)(opts);
  } catch (const rro::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
