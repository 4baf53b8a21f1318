#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rro/rng.hpp"

namespace rro {

using ActionId = std::int32_t;
using Observation = std::vector<std::string>;

// One task u. The goal structure (leaf rewards, target attributes) is held by
// the owning environment and only read by its outcome reward.
struct TaskInstance {
  std::string task_id;
  std::vector<std::string> instruction;
  int max_steps = 1;
};

struct EnvState {
  std::size_t task = 0;        // index into Environment::tasks()
  std::uint64_t state_id = 0;  // environment-internal, opaque to callers
  int step_index = 0;
  bool terminal = false;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct Step {
  ActionId action = 0;
  Observation observation;

  friend bool operator==(const Step&, const Step&) = default;
};

// e = [u, a1, o1, ..., an]. states[i] is the state before steps[i];
// states.back() is the state reached after the last step.
struct Trajectory {
  std::size_t task = 0;
  std::vector<Step> steps;
  std::vector<EnvState> states;

  std::size_t length() const { return steps.size(); }
  const EnvState& end_state() const { return states.back(); }
  bool terminal() const { return !states.empty() && states.back().terminal; }
  std::vector<ActionId> actions() const;
};

struct TransitionResult {
  Observation observation;
  EnvState next;
};

// POMDP environment with deterministic transitions. Implementations are
// immutable after construction, so every method is safe to call concurrently.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view kind() const = 0;

  const std::vector<TaskInstance>& tasks() const { return tasks_; }
  const TaskInstance& task(std::size_t index) const;
  std::size_t task_index(std::string_view task_id) const;

  EnvState reset(const TaskInstance& task) const;
  EnvState reset(std::size_t task_index) const;

  // Deterministic ascending order; empty iff the state is terminal.
  virtual std::vector<ActionId> legal_actions(const EnvState& state) const = 0;

  // Throws IllegalActionError if `action` is not legal in `state`.
  TransitionResult transition(const EnvState& state, ActionId action) const;

  // Outcome reward of a terminal state, in [0, 1].
  virtual double terminal_reward(const EnvState& state) const = 0;

  // Requires a terminal trajectory belonging to `task`.
  double outcome_reward(const TaskInstance& task, const Trajectory& trajectory) const;
  double outcome_reward(const Trajectory& trajectory) const;

  // Action an expert would take; used to produce SFT demonstrations.
  virtual ActionId expert_action(const EnvState& state) const = 0;

  virtual std::string action_name(ActionId action) const = 0;
  virtual ActionId parse_action(std::string_view name) const = 0;

  // True when the reachable state space can be walked by the exact oracle.
  virtual bool enumerable() const = 0;

  std::string state_key(const EnvState& state) const;
  EnvState parse_state_key(std::string_view key) const;

  Trajectory start(std::size_t task_index) const;
  // Appends one step to a non-terminal trajectory.
  void extend(Trajectory& trajectory, ActionId action) const;
  // Replays an action sequence from the task's initial state.
  Trajectory replay(std::size_t task_index, std::span<const ActionId> actions) const;

 protected:
  explicit Environment(std::vector<TaskInstance> tasks);

  virtual EnvState initial_state(std::size_t task_index) const = 0;
  // `action` has already been checked for legality.
  virtual TransitionResult apply(const EnvState& state, ActionId action) const = 0;

 private:
  std::vector<TaskInstance> tasks_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Expert demonstrations: each step follows the expert action with
// probability 1 - noise_rate and a uniformly random legal action otherwise.
std::vector<Trajectory> generate_expert_dataset(const Environment& env,
                                                std::span<const std::size_t> task_indices,
                                                double noise_rate, std::uint64_t seed,
                                                std::size_t per_task = 1);

}  // namespace rro
