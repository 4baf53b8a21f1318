#include "rro/shop_env.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <set>

#include "rro/errors.hpp"

namespace rro {

namespace {

std::vector<TaskInstance> shop_tasks(const std::vector<std::vector<std::string>>& targets,
                                     int max_steps) {
  std::vector<TaskInstance> tasks;
  tasks.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    TaskInstance t;
    t.task_id = "shop-" + std::to_string(i);
    t.instruction = targets[i];
    t.max_steps = max_steps;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

}  // namespace

ShopSimEnv::ShopSimEnv(std::vector<ShopItem> catalog,
                       std::vector<std::vector<std::string>> targets, int max_steps)
    : Environment(shop_tasks(targets, max_steps)), catalog_(std::move(catalog)) {
  if (catalog_.empty()) throw InvalidArgumentError("shop catalog is empty");
  if (catalog_.size() > kMaxItems) throw InvalidArgumentError("shop catalog too large");
  if (targets.empty()) throw InvalidArgumentError("shop environment needs at least one task");

  std::set<std::string> vocab;
  for (const auto& item : catalog_) {
    if (item.attributes.empty()) {
      throw InvalidArgumentError("item " + item.item_id + " has no attributes");
    }
    vocab.insert(item.attributes.begin(), item.attributes.end());
  }
  for (const auto& t : targets) {
    if (t.empty()) throw InvalidArgumentError("shop task with empty target");
    vocab.insert(t.begin(), t.end());
  }
  if (vocab.size() > kMaxAttributes) {
    throw InvalidArgumentError("shop vocabulary exceeds 32 attributes");
  }
  vocab_.assign(vocab.begin(), vocab.end());

  auto mask_of = [&](const std::vector<std::string>& attrs) {
    std::uint32_t m = 0;
    for (const auto& a : attrs) {
      const auto idx = std::lower_bound(vocab_.begin(), vocab_.end(), a) - vocab_.begin();
      m |= std::uint32_t{1} << idx;
    }
    return m;
  };
  for (const auto& item : catalog_) item_masks_.push_back(mask_of(item.attributes));
  for (const auto& t : targets) target_masks_.push_back(mask_of(t));
}

ShopSimEnv::Page ShopSimEnv::page(const EnvState& state) {
  Page p;
  p.constraints = static_cast<std::uint32_t>(state.state_id & 0xffffffffULL);
  p.selected = static_cast<int>((state.state_id >> 32) & 0xffffULL) - 1;
  p.bought = ((state.state_id >> 48) & 1ULL) != 0;
  return p;
}

std::uint64_t ShopSimEnv::pack(const Page& p) {
  return std::uint64_t{p.constraints} | (static_cast<std::uint64_t>(p.selected + 1) << 32) |
         (static_cast<std::uint64_t>(p.bought) << 48);
}

std::vector<std::size_t> ShopSimEnv::results(const EnvState& state) const {
  const Page p = page(state);
  std::vector<std::size_t> out;
  if (p.constraints == 0) return out;
  for (std::size_t i = 0; i < catalog_.size(); ++i) {
    if ((item_masks_[i] & p.constraints) == p.constraints) out.push_back(i);
  }
  return out;
}

double ShopSimEnv::match_fraction(std::size_t task, std::size_t item) const {
  const auto target = target_masks_[task];
  return static_cast<double>(std::popcount(item_masks_[item] & target)) /
         static_cast<double>(std::popcount(target));
}

ShopSimEnv::DecodedAction ShopSimEnv::decode(ActionId action) const {
  const auto a = static_cast<std::size_t>(action);
  const auto n_attr = vocab_.size();
  if (action < 0) throw IllegalActionError("negative action id");
  if (a < n_attr) return {ActionKind::kSearch, a};
  if (a < 2 * n_attr) return {ActionKind::kFilter, a - n_attr};
  if (a < 2 * n_attr + catalog_.size()) return {ActionKind::kSelect, a - 2 * n_attr};
  if (a == 2 * n_attr + catalog_.size()) return {ActionKind::kBuy, 0};
  throw IllegalActionError("action id " + std::to_string(action) + " out of range");
}

ActionId ShopSimEnv::encode(ActionKind kind, std::size_t arg) const {
  const auto n_attr = vocab_.size();
  switch (kind) {
    case ActionKind::kSearch: return static_cast<ActionId>(arg);
    case ActionKind::kFilter: return static_cast<ActionId>(n_attr + arg);
    case ActionKind::kSelect: return static_cast<ActionId>(2 * n_attr + arg);
    case ActionKind::kBuy: return static_cast<ActionId>(2 * n_attr + catalog_.size());
  }
  return -1;
}

EnvState ShopSimEnv::initial_state(std::size_t task_index) const {
  return EnvState{task_index, pack(Page{}), 0, false};
}

std::vector<ActionId> ShopSimEnv::legal_actions(const EnvState& state) const {
  std::vector<ActionId> out;
  if (state.terminal) return out;
  const Page p = page(state);
  const auto res = results(state);
  for (std::size_t a = 0; a < vocab_.size(); ++a) out.push_back(encode(ActionKind::kSearch, a));
  if (p.constraints != 0) {
    std::uint32_t present = 0;
    for (auto i : res) present |= item_masks_[i];
    for (std::size_t a = 0; a < vocab_.size(); ++a) {
      const std::uint32_t bit = std::uint32_t{1} << a;
      if ((present & bit) && !(p.constraints & bit)) out.push_back(encode(ActionKind::kFilter, a));
    }
  }
  for (auto i : res) {
    if (static_cast<int>(i) != p.selected) out.push_back(encode(ActionKind::kSelect, i));
  }
  if (p.selected >= 0) out.push_back(encode(ActionKind::kBuy));
  return out;
}

TransitionResult ShopSimEnv::apply(const EnvState& state, ActionId action) const {
  Page p = page(state);
  const auto act = decode(action);
  TransitionResult r;
  switch (act.kind) {
    case ActionKind::kSearch:
      p.constraints = std::uint32_t{1} << act.arg;
      p.selected = -1;
      break;
    case ActionKind::kFilter:
      p.constraints |= std::uint32_t{1} << act.arg;
      p.selected = -1;
      break;
    case ActionKind::kSelect:
      p.selected = static_cast<int>(act.arg);
      break;
    case ActionKind::kBuy:
      p.bought = true;
      break;
  }
  r.next.task = state.task;
  r.next.state_id = pack(p);
  r.next.step_index = state.step_index + 1;
  r.next.terminal = p.bought || r.next.step_index >= task(state.task).max_steps;

  if (act.kind == ActionKind::kSearch || act.kind == ActionKind::kFilter) {
    const auto res = results(r.next);
    r.observation = {"results", std::to_string(res.size())};
    for (auto i : res) r.observation.push_back(catalog_[i].item_id);
  } else if (act.kind == ActionKind::kSelect) {
    const auto& item = catalog_[act.arg];
    r.observation = {"selected", item.item_id};
    r.observation.insert(r.observation.end(), item.attributes.begin(), item.attributes.end());
  } else {
    r.observation = {"bought", catalog_[static_cast<std::size_t>(p.selected)].item_id};
  }
  return r;
}

double ShopSimEnv::terminal_reward(const EnvState& state) const {
  const Page p = page(state);
  if (!p.bought) return 0.0;
  return match_fraction(state.task, static_cast<std::size_t>(p.selected));
}

std::size_t ShopSimEnv::best_item(std::size_t task) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < catalog_.size(); ++i) {
    if (match_fraction(task, i) > match_fraction(task, best)) best = i;
  }
  return best;
}

// Goal-directed script: locate the best-matching item through a search on one
// of its target attributes, select it, buy it. With fewer steps left than the
// script needs, settle for the best item already reachable.
ActionId ShopSimEnv::expert_action(const EnvState& state) const {
  const Page p = page(state);
  const int remaining = task(state.task).max_steps - state.step_index;
  const std::size_t best = best_item(state.task);
  const auto res = results(state);
  const bool best_listed = std::find(res.begin(), res.end(), best) != res.end();

  auto best_in_results = [&]() -> int {
    int arg = -1;
    for (auto i : res) {
      if (arg < 0 || match_fraction(state.task, i) > match_fraction(state.task, arg)) {
        arg = static_cast<int>(i);
      }
    }
    return arg;
  };

  if (p.selected == static_cast<int>(best)) return encode(ActionKind::kBuy);
  if (remaining == 1) {
    if (p.selected >= 0) return encode(ActionKind::kBuy);
    return encode(ActionKind::kSearch, 0);  // nothing can be bought any more
  }
  if (best_listed) return encode(ActionKind::kSelect, best);
  if (remaining == 2) {
    const int local = best_in_results();
    if (p.selected >= 0 &&
        (local < 0 || local == p.selected ||
         match_fraction(state.task, p.selected) >= match_fraction(state.task, local))) {
      return encode(ActionKind::kBuy);
    }
    if (local >= 0) return encode(ActionKind::kSelect, static_cast<std::size_t>(local));
  }
  const std::uint32_t mask = item_masks_[best];
  const std::uint32_t preferred = mask & target_masks_[state.task];
  const std::uint32_t pick = preferred != 0 ? preferred : mask;
  return encode(ActionKind::kSearch, static_cast<std::size_t>(std::countr_zero(pick)));
}

std::string ShopSimEnv::action_name(ActionId action) const {
  const auto act = decode(action);
  switch (act.kind) {
    case ActionKind::kSearch: return "search:" + vocab_[act.arg];
    case ActionKind::kFilter: return "filter:" + vocab_[act.arg];
    case ActionKind::kSelect: return "select:" + catalog_[act.arg].item_id;
    case ActionKind::kBuy: return "buy";
  }
  return {};
}

ActionId ShopSimEnv::parse_action(std::string_view name) const {
  if (name == "buy") return encode(ActionKind::kBuy);
  const auto colon = name.find(':');
  if (colon == std::string_view::npos) throw ParseError("unknown shop action '" + std::string(name) + "'");
  const auto verb = name.substr(0, colon);
  const auto arg = std::string(name.substr(colon + 1));
  if (verb == "search" || verb == "filter") {
    auto it = std::lower_bound(vocab_.begin(), vocab_.end(), arg);
    if (it == vocab_.end() || *it != arg) throw ParseError("unknown attribute '" + arg + "'");
    const auto idx = static_cast<std::size_t>(it - vocab_.begin());
    return encode(verb == "search" ? ActionKind::kSearch : ActionKind::kFilter, idx);
  }
  if (verb == "select") {
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
      if (catalog_[i].item_id == arg) return encode(ActionKind::kSelect, i);
    }
    throw ParseError("unknown item '" + arg + "'");
  }
  throw ParseError("unknown shop action '" + std::string(name) + "'");
}

}  // namespace rro
