#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rro/enum_tree_env.hpp"
#include "rro/env.hpp"
#include "rro/shop_env.hpp"

namespace rro {

// Environment definition files.
//
//   tree D B
//   <B^D whitespace-separated leaf rewards>
//
// Additional `tree D B` blocks with the same D and B append further tasks.
//
//   shop [max_steps]
//   <item_id> attr1,attr2,...
//   task target1,target2,...
//
// Blank lines and `#` comments are ignored.
std::unique_ptr<Environment> parse_environment(std::string_view text);
std::unique_ptr<Environment> load_environment(const std::filesystem::path& path);

std::string format_environment(const EnumTreeEnv& env);
std::string format_environment(const ShopSimEnv& env);

// Expert dataset JSONL: one
//   {"task_id": ..., "steps": [{"action": ..., "observation": [...]}], "outcome_reward": ...}
// object per line.
void write_trajectories_jsonl(std::ostream& out, const Environment& env,
                              std::span<const Trajectory> trajectories);
// Replays every line through the environment and rejects lines whose stored
// observations disagree with the replay.
std::vector<Trajectory> read_trajectories_jsonl(std::istream& in, const Environment& env);

}  // namespace rro
