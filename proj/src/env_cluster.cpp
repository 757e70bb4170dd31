#include "dart/env_cluster.hpp"

#include <algorithm>
#include <stdexcept>

namespace dart {

std::string to_string(EnvStatus status) {
  switch (status) {
    case EnvStatus::idle: return "idle";
    case EnvStatus::resetting: return "resetting";
    case EnvStatus::stepping: return "stepping";
    case EnvStatus::evaluating: return "evaluating";
  }
  return "idle";
}

EnvInstance::EnvInstance(int env_id, EnvConfig config) : env_id_(env_id), config_(config) {
  if (config_.action_len < 1 || config_.vocab < 2 || config_.cue_repeat < 1 || config_.decoys < 0 ||
      config_.global_max_steps < 1) {
    throw std::invalid_argument("invalid env config");
  }
  if (config_.decoys > config_.vocab - config_.action_len) {
    throw std::invalid_argument("too many decoys for the vocabulary");
  }
}

EnvObservation EnvInstance::reset(const Task& task, std::uint64_t seed) {
  if (status_ != EnvStatus::idle) {
    throw std::logic_error("env " + std::to_string(env_id_) + " is busy (" + to_string(status_) + ")");
  }
  if (task.target_sequence.empty() ||
      task.target_sequence.size() % static_cast<std::size_t>(config_.action_len) != 0) {
    throw std::invalid_argument("task " + task.task_id + " target is not a whole number of segments");
  }
  status_ = EnvStatus::resetting;
  task_id_ = task.task_id;
  target_ = task.target_sequence;
  segments_ = static_cast<int>(target_.size()) / config_.action_len;
  step_latency_ = task.step_latency;
  step_cap_ = std::clamp(task.max_steps_cap, 1, config_.global_max_steps);
  progress_ = 0;
  steps_taken_ = 0;
  done_ = false;
  terminal_reason_ = TerminalReason::finished;
  last_latency_ = 0.0;
  rng_ = Rng(Rng::mix(seed, stable_hash(task.task_id)));
  auto state = render_state();
  status_ = EnvStatus::stepping;
  return EnvObservation{std::move(state), 0, false};
}

EnvObservation EnvInstance::step(std::span<const int> action) {
  if (status_ != EnvStatus::stepping || done_) {
    throw std::logic_error("env " + std::to_string(env_id_) + " has no active episode");
  }
  last_latency_ = step_latency_;
  if (config_.latency_jitter > 0.0) {
    last_latency_ *= 1.0 + config_.latency_jitter * (2.0 * rng_.uniform() - 1.0);
  }
  busy_time_ += last_latency_;
  ++steps_taken_;

  if (config_.failure_prob > 0.0 && rng_.uniform() < config_.failure_prob) {
    done_ = true;
    terminal_reason_ = TerminalReason::env_failure;
    status_ = EnvStatus::evaluating;
    return EnvObservation{render_state(), steps_taken_, true};
  }

  const auto expected = expected_action();
  const bool match = action.size() == expected.size() && std::equal(action.begin(), action.end(), expected.begin());
  if (match) {
    ++progress_;
  } else if (config_.reset_on_mistake) {
    progress_ = 0;
  }

  if (progress_ == segments_) {
    done_ = true;
    terminal_reason_ = TerminalReason::finished;
  } else if (steps_taken_ >= step_cap_) {
    done_ = true;
    terminal_reason_ = TerminalReason::step_cap;
  }
  if (done_) status_ = EnvStatus::evaluating;
  return EnvObservation{render_state(), steps_taken_, done_};
}

double EnvInstance::evaluate() const {
  if (!done_ || status_ != EnvStatus::evaluating) {
    throw std::logic_error("env " + std::to_string(env_id_) + ": evaluate before episode end");
  }
  return (terminal_reason_ == TerminalReason::finished && progress_ == segments_) ? 1.0 : 0.0;
}

void EnvInstance::release() {
  status_ = EnvStatus::idle;
  task_id_.reset();
}

std::vector<int> EnvInstance::expected_action() const {
  if (progress_ >= segments_) return {};
  const auto begin = target_.begin() + static_cast<std::ptrdiff_t>(progress_ * config_.action_len);
  return std::vector<int>(begin, begin + config_.action_len);
}

std::vector<int> EnvInstance::render_state() {
  std::vector<int> state;
  const auto cue = expected_action();
  for (int t : cue) {
    for (int r = 0; r < config_.cue_repeat; ++r) state.push_back(t);
  }
  std::vector<int> pool;
  for (int v = 0; v < config_.vocab; ++v) {
    if (std::find(cue.begin(), cue.end(), v) == cue.end()) pool.push_back(v);
  }
  for (int d = 0; d < config_.decoys; ++d) {
    const int pick = rng_.below(static_cast<int>(pool.size()));
    state.push_back(pool[static_cast<std::size_t>(pick)]);
    pool.erase(pool.begin() + pick);
  }
  // Fisher-Yates so cue position carries no information.
  for (std::size_t i = state.size(); i > 1; --i) {
    std::swap(state[i - 1], state[static_cast<std::size_t>(rng_.below(static_cast<int>(i)))]);
  }
  return state;
}

EnvCluster::EnvCluster(int size, EnvConfig config) {
  if (size <= 0) throw std::invalid_argument("env cluster needs at least one env");
  envs_.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) envs_.emplace_back(i, config);
  taken_.assign(static_cast<std::size_t>(size), false);
}

EnvInstance& EnvCluster::at(int env_id) {
  if (env_id < 0 || env_id >= size()) throw std::out_of_range("unknown env " + std::to_string(env_id));
  return envs_[static_cast<std::size_t>(env_id)];
}

const EnvInstance& EnvCluster::at(int env_id) const {
  if (env_id < 0 || env_id >= size()) throw std::out_of_range("unknown env " + std::to_string(env_id));
  return envs_[static_cast<std::size_t>(env_id)];
}

std::optional<int> EnvCluster::acquire() {
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < taken_.size(); ++i) {
    if (!taken_[i]) {
      taken_[i] = true;
      return static_cast<int>(i);
    }
  }
  return std::nullopt;
}

void EnvCluster::release(int env_id) {
  at(env_id).release();
  std::lock_guard lock(mutex_);
  taken_[static_cast<std::size_t>(env_id)] = false;
}

Json EnvCluster::handle(const Json& message) {
  Json reply{{"type", "result"}};
  try {
    const auto type = message.at("type").get<std::string>();
    const int env_id = message.at("env_id").get<int>();
    reply["env_id"] = env_id;
    reply["request"] = type;
    auto& env = at(env_id);
    if (type == "reset") {
      reply["observation"] = to_json(env.reset(task_from_json(message.at("task")),
                                               message.at("seed").get<std::uint64_t>()));
    } else if (type == "step") {
      reply["observation"] = to_json(env.step(message.at("action").get<std::vector<int>>()));
      reply["latency"] = env.last_step_latency();
      if (env.done()) reply["terminal_reason"] = to_string(env.terminal_reason());
    } else if (type == "evaluate") {
      reply["reward"] = env.evaluate();
    } else if (type == "release") {
      env.release();
    } else {
      throw std::invalid_argument("unknown message type '" + type + "'");
    }
    reply["ok"] = true;
  } catch (const std::exception& e) {
    reply["ok"] = false;
    reply["error"] = e.what();
  }
  return reply;
}

Task make_puzzle_task(const std::string& task_id, int difficulty, int action_len, int vocab,
                      double step_latency, Rng& rng) {
  if (difficulty < 1) throw std::invalid_argument("difficulty must be positive");
  Task t;
  t.task_id = task_id;
  t.difficulty = difficulty;
  t.step_latency = step_latency;
  for (int i = 0; i < difficulty * action_len; ++i) t.target_sequence.push_back(rng.below(vocab));
  return t;
}

Json to_json(const EnvObservation& obs) {
  return Json{{"state", obs.state}, {"step_index", obs.step_index}, {"done", obs.done}};
}

}  // namespace dart
