#include "rro/env.hpp"

#include <algorithm>
#include <charconv>

#include "rro/errors.hpp"

namespace rro {

std::vector<ActionId> Trajectory::actions() const {
  std::vector<ActionId> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.action);
  return out;
}

Environment::Environment(std::vector<TaskInstance> tasks) : tasks_(std::move(tasks)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i].max_steps < 1) {
      throw InvalidArgumentError("task " + tasks_[i].task_id + " has max_steps < 1");
    }
    if (!index_.emplace(tasks_[i].task_id, i).second) {
      throw InvalidArgumentError("duplicate task id " + tasks_[i].task_id);
    }
  }
}

const TaskInstance& Environment::task(std::size_t index) const {
  if (index >= tasks_.size()) {
    throw UnknownTaskError("task index " + std::to_string(index) + " out of range");
  }
  return tasks_[index];
}

std::size_t Environment::task_index(std::string_view task_id) const {
  auto it = index_.find(std::string(task_id));
  if (it == index_.end()) throw UnknownTaskError(std::string(task_id));
  return it->second;
}

EnvState Environment::reset(const TaskInstance& task) const {
  return initial_state(task_index(task.task_id));
}

EnvState Environment::reset(std::size_t index) const {
  task(index);
  return initial_state(index);
}

TransitionResult Environment::transition(const EnvState& state, ActionId action) const {
  const auto legal = legal_actions(state);
  if (!std::binary_search(legal.begin(), legal.end(), action)) {
    throw IllegalActionError("action " + std::to_string(action) + " in state " +
                             state_key(state));
  }
  return apply(state, action);
}

double Environment::outcome_reward(const TaskInstance& task, const Trajectory& trajectory) const {
  if (task_index(task.task_id) != trajectory.task) {
    throw InvalidArgumentError("trajectory belongs to task " +
                               this->task(trajectory.task).task_id + ", not " + task.task_id);
  }
  return outcome_reward(trajectory);
}

double Environment::outcome_reward(const Trajectory& trajectory) const {
  if (!trajectory.terminal()) {
    throw InvalidArgumentError("outcome reward requires a terminal trajectory");
  }
  return terminal_reward(trajectory.end_state());
}

std::string Environment::state_key(const EnvState& state) const {
  std::string key = task(state.task).task_id;
  key += '/';
  key += std::to_string(state.state_id);
  key += '/';
  key += std::to_string(state.step_index);
  if (state.terminal) key += "/T";
  return key;
}

EnvState Environment::parse_state_key(std::string_view key) const {
  auto bad = [&] { return ParseError("bad state key '" + std::string(key) + "'"); };
  const auto p1 = key.find('/');
  if (p1 == std::string_view::npos) throw bad();
  const auto p2 = key.find('/', p1 + 1);
  if (p2 == std::string_view::npos) throw bad();
  auto p3 = key.find('/', p2 + 1);
  EnvState s;
  s.task = task_index(key.substr(0, p1));
  const auto id = key.substr(p1 + 1, p2 - p1 - 1);
  const auto step = key.substr(p2 + 1, p3 == std::string_view::npos ? p3 : p3 - p2 - 1);
  if (std::from_chars(id.data(), id.data() + id.size(), s.state_id).ec != std::errc{} ||
      std::from_chars(step.data(), step.data() + step.size(), s.step_index).ec != std::errc{}) {
    throw bad();
  }
  if (p3 != std::string_view::npos) {
    if (key.substr(p3 + 1) != "T") throw bad();
    s.terminal = true;
  }
  return s;
}

Trajectory Environment::start(std::size_t index) const {
  Trajectory t;
  t.task = index;
  t.states.push_back(reset(index));
  return t;
}

void Environment::extend(Trajectory& trajectory, ActionId action) const {
  auto result = transition(trajectory.end_state(), action);
  trajectory.steps.push_back(Step{action, std::move(result.observation)});
  trajectory.states.push_back(result.next);
}

Trajectory Environment::replay(std::size_t index, std::span<const ActionId> actions) const {
  Trajectory t = start(index);
  for (ActionId a : actions) extend(t, a);
  return t;
}

std::vector<Trajectory> generate_expert_dataset(const Environment& env,
                                                std::span<const std::size_t> task_indices,
                                                double noise_rate, std::uint64_t seed,
                                                std::size_t per_task) {
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
    throw InvalidArgumentError("expert noise rate must lie in [0, 1)");
  }
  const StreamKey root(seed);
  std::vector<Trajectory> out;
  out.reserve(task_indices.size() * per_task);
  for (std::size_t task : task_indices) {
    for (std::size_t k = 0; k < per_task; ++k) {
      RngStream rng(root.child({stream_tag::kTask, task, k}));
      Trajectory t = env.start(task);
      while (!t.terminal()) {
        const auto legal = env.legal_actions(t.end_state());
        const double u = rng.uniform();
        ActionId a;
        if (u < noise_rate) {
          a = legal[rng.below(legal.size())];
        } else {
          a = env.expert_action(t.end_state());
        }
        env.extend(t, a);
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace rro
