#include "rro/env_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "rro/errors.hpp"

namespace rro {

namespace {

using nlohmann::json;

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(sep, start);
    const auto piece = s.substr(start, end == std::string_view::npos ? s.size() - start : end - start);
    if (!piece.empty()) out.emplace_back(piece);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::vector<std::string> tokens_of(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

int parse_int(const std::string& s, const char* what) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError(std::string("expected integer ") + what + ", got '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ParseError("expected number, got '" + s + "'");
  return v;
}

std::vector<std::string> meaningful_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::unique_ptr<Environment> parse_tree(const std::vector<std::string>& lines) {
  std::vector<std::string> toks;
  for (const auto& l : lines) {
    auto t = tokens_of(l);
    toks.insert(toks.end(), t.begin(), t.end());
  }
  int depth = 0;
  int branching = 0;
  std::vector<std::vector<double>> tables;
  std::size_t i = 0;
  while (i < toks.size()) {
    if (toks[i] != "tree" || i + 2 >= toks.size()) throw ParseError("expected 'tree D B' header");
    const int d = parse_int(toks[i + 1], "depth");
    const int b = parse_int(toks[i + 2], "branching");
    if (tables.empty()) {
      depth = d;
      branching = b;
    } else if (d != depth || b != branching) {
      throw ParseError("all tree blocks must share D and B");
    }
    if (d < 1 || d > EnumTreeEnv::kMaxDepth || b < 1 || b > EnumTreeEnv::kMaxBranching) {
      throw ParseError("tree D must be in [1,8] and B in [1,6]");
    }
    std::size_t n = 1;
    for (int k = 0; k < d; ++k) n *= static_cast<std::size_t>(b);
    i += 3;
    if (i + n > toks.size()) throw ParseError("tree block has fewer than B^D leaf rewards");
    std::vector<double> leaves;
    leaves.reserve(n);
    for (std::size_t k = 0; k < n; ++k) leaves.push_back(parse_double(toks[i + k]));
    i += n;
    tables.push_back(std::move(leaves));
  }
  return std::make_unique<EnumTreeEnv>(depth, branching, std::move(tables));
}

std::unique_ptr<Environment> parse_shop(const std::vector<std::string>& lines) {
  const auto header = tokens_of(lines.front());
  int max_steps = ShopSimEnv::kDefaultMaxSteps;
  if (header.size() == 2) {
    max_steps = parse_int(header[1], "max_steps");
  } else if (header.size() != 1) {
    throw ParseError("shop header is 'shop [max_steps]'");
  }
  std::vector<ShopItem> items;
  std::vector<std::vector<std::string>> targets;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto toks = tokens_of(lines[k]);
    if (toks.size() != 2) throw ParseError("shop line must be '<id> a,b,...': " + lines[k]);
    if (toks[0] == "task") {
      targets.push_back(split(toks[1], ','));
    } else {
      items.push_back(ShopItem{toks[0], split(toks[1], ',')});
    }
  }
  return std::make_unique<ShopSimEnv>(std::move(items), std::move(targets), max_steps);
}

std::string format_reward(double r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", r);
  return buf;
}

}  // namespace

std::unique_ptr<Environment> parse_environment(std::string_view text) {
  const auto lines = meaningful_lines(text);
  if (lines.empty()) throw ParseError("empty environment file");
  const auto head = tokens_of(lines.front());
  if (head.front() == "tree") return parse_tree(lines);
  if (head.front() == "shop") return parse_shop(lines);
  throw ParseError("environment file must start with 'tree' or 'shop'");
}

std::unique_ptr<Environment> load_environment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open environment file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_environment(ss.str());
}

std::string format_environment(const EnumTreeEnv& env) {
  std::string out;
  for (std::size_t t = 0; t < env.tasks().size(); ++t) {
    out += "tree " + std::to_string(env.depth()) + " " + std::to_string(env.branching()) + "\n";
    const auto& leaves = env.leaf_rewards(t);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      out += format_reward(leaves[i]);
      out += (i + 1) % static_cast<std::size_t>(env.branching()) == 0 ? '\n' : ' ';
    }
  }
  return out;
}

std::string format_environment(const ShopSimEnv& env) {
  std::string out = "shop " + std::to_string(env.tasks().front().max_steps) + "\n";
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
  };
  for (const auto& item : env.catalog()) out += item.item_id + " " + join(item.attributes) + "\n";
  for (const auto& task : env.tasks()) out += "task " + join(task.instruction) + "\n";
  return out;
}

void write_trajectories_jsonl(std::ostream& out, const Environment& env,
                              std::span<const Trajectory> trajectories) {
  for (const auto& t : trajectories) {
    json steps = json::array();
    for (const auto& s : t.steps) {
      steps.push_back({{"action", env.action_name(s.action)}, {"observation", s.observation}});
    }
    json line = {{"task_id", env.task(t.task).task_id},
                 {"steps", std::move(steps)},
                 {"outcome_reward", t.terminal() ? env.outcome_reward(t) : 0.0}};
    out << line.dump() << '\n';
  }
}

std::vector<Trajectory> read_trajectories_jsonl(std::istream& in, const Environment& env) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      Trajectory t = env.start(env.task_index(j.at("task_id").get<std::string>()));
      for (const auto& s : j.at("steps")) {
        env.extend(t, env.parse_action(s.at("action").get<std::string>()));
        if (s.contains("observation") &&
            s.at("observation").get<Observation>() != t.steps.back().observation) {
          throw ParseError("observation mismatch on replay");
        }
      }
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace rro
