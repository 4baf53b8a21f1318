#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rro/env.hpp"

namespace rro {

struct ShopItem {
  std::string item_id;
  std::vector<std::string> attributes;
};

// Small online-shopping simulator. The agent searches by keyword, narrows the
// result page with attribute filters, selects an item and buys it. Buying
// ends the episode with reward |attrs(item) ∩ target| / |target|; running out
// of steps without buying scores 0.
//
// Action ids, in legal_actions order:
//   [0, A)          search(attribute a)
//   [A, 2A)         filter(attribute a)
//   [2A, 2A + I)    select(item i)
//   2A + I          buy
// where A is the attribute vocabulary size and I the catalog size.
class ShopSimEnv final : public Environment {
 public:
  static constexpr int kDefaultMaxSteps = 6;
  static constexpr std::size_t kMaxAttributes = 32;
  static constexpr std::size_t kMaxItems = 4096;

  enum class ActionKind { kSearch, kFilter, kSelect, kBuy };
  struct DecodedAction {
    ActionKind kind;
    std::size_t arg;  // attribute index or item index; 0 for buy
  };

  // Each target list becomes one task with the target attributes as its
  // instruction tokens.
  ShopSimEnv(std::vector<ShopItem> catalog, std::vector<std::vector<std::string>> targets,
             int max_steps = kDefaultMaxSteps);

  std::string_view kind() const override { return "shop"; }

  std::vector<ActionId> legal_actions(const EnvState& state) const override;
  double terminal_reward(const EnvState& state) const override;
  ActionId expert_action(const EnvState& state) const override;
  std::string action_name(ActionId action) const override;
  ActionId parse_action(std::string_view name) const override;
  bool enumerable() const override { return true; }

  const std::vector<ShopItem>& catalog() const { return catalog_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  std::size_t attribute_count() const { return vocab_.size(); }
  std::size_t item_count() const { return catalog_.size(); }

  DecodedAction decode(ActionId action) const;
  ActionId encode(ActionKind kind, std::size_t arg = 0) const;

  // Decoded view of a state id.
  struct Page {
    std::uint32_t constraints = 0;  // attribute bitmask; 0 = landing page
    int selected = -1;              // item index or -1
    bool bought = false;
  };
  static Page page(const EnvState& state);
  // Items on the current result page, ascending.
  std::vector<std::size_t> results(const EnvState& state) const;

  std::uint32_t item_mask(std::size_t item) const { return item_masks_[item]; }
  std::uint32_t target_mask(std::size_t task) const { return target_masks_[task]; }
  // |attrs(item) ∩ target(task)| / |target(task)|.
  double match_fraction(std::size_t task, std::size_t item) const;

 protected:
  EnvState initial_state(std::size_t task_index) const override;
  TransitionResult apply(const EnvState& state, ActionId action) const override;

 private:
  static std::uint64_t pack(const Page& p);
  std::size_t best_item(std::size_t task) const;

  std::vector<ShopItem> catalog_;
  std::vector<std::string> vocab_;
  std::vector<std::uint32_t> item_masks_;
  std::vector<std::uint32_t> target_masks_;
};

}  // namespace rro
