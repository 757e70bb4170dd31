#include "dart/core.hpp"

#include <cmath>
#include <stdexcept>

namespace dart {

std::vector<int> StepRecord::generated_tokens() const {
  std::vector<int> tokens = thought;
  tokens.insert(tokens.end(), action.begin(), action.end());
  return tokens;
}

StepGroup make_step_group(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) {
    throw std::invalid_argument("make_step_group: no trajectories");
  }
  StepGroup group;
  group.task_id = trajectories.front().task_id;
  for (const auto& traj : trajectories) {
    if (traj.task_id != group.task_id) {
      throw std::invalid_argument("make_step_group: mixed task ids '" + group.task_id + "' and '" +
                                  traj.task_id + "'");
    }
    for (const auto& step : traj.steps) {
      group.step_records.push_back(step);
      group.rewards.push_back(traj.reward);
      group.entropy_values.push_back(step_entropy(step.token_entropies));
    }
  }
  return group;
}

double step_entropy(std::span<const double> token_entropies) {
  if (token_entropies.empty()) {
    throw std::invalid_argument("step_entropy: empty token list");
  }
  double sum = 0.0;
  for (double h : token_entropies) sum += h;
  return sum / static_cast<double>(token_entropies.size());
}

void validate(const Trajectory& trajectory) {
  if (trajectory.trajectory_id.empty()) throw std::invalid_argument("trajectory without id");
  if (trajectory.steps.empty()) {
    throw std::invalid_argument("trajectory " + trajectory.trajectory_id + " has no steps");
  }
  if (!(trajectory.reward >= 0.0 && trajectory.reward <= 1.0)) {
    throw std::invalid_argument("trajectory " + trajectory.trajectory_id + " reward outside [0,1]");
  }
  for (const auto& step : trajectory.steps) {
    if (step.task_id != trajectory.task_id || step.trajectory_id != trajectory.trajectory_id) {
      throw std::invalid_argument("step does not belong to trajectory " + trajectory.trajectory_id);
    }
    if (!(step.rollout_logprob <= 0.0)) {
      throw std::invalid_argument("positive rollout log-prob in " + trajectory.trajectory_id);
    }
  }
}

std::string to_string(TerminalReason reason) {
  switch (reason) {
    case TerminalReason::finished: return "finished";
    case TerminalReason::step_cap: return "step_cap";
    case TerminalReason::env_failure: return "env_failure";
  }
  return "finished";
}

std::string to_string(TrajectorySource source) {
  return source == TrajectorySource::online ? "online" : "experience_pool";
}

TerminalReason terminal_reason_from_string(const std::string& s) {
  if (s == "finished") return TerminalReason::finished;
  if (s == "step_cap") return TerminalReason::step_cap;
  if (s == "env_failure") return TerminalReason::env_failure;
  throw std::invalid_argument("unknown terminal_reason '" + s + "'");
}

TrajectorySource trajectory_source_from_string(const std::string& s) {
  if (s == "online") return TrajectorySource::online;
  if (s == "experience_pool") return TrajectorySource::experience_pool;
  throw std::invalid_argument("unknown source '" + s + "'");
}

Json to_json(const HistoryEntry& entry) {
  return Json{{"state", entry.state}, {"thought", entry.thought}, {"action", entry.action}};
}

Json to_json(const StepRecord& step) {
  Json history = Json::array();
  for (const auto& h : step.history) history.push_back(to_json(h));
  Json entropies = Json::array();
  for (double h : step.token_entropies) entropies.push_back(h);
  return Json{{"task_id", step.task_id},
              {"trajectory_id", step.trajectory_id},
              {"step_index", step.step_index},
              {"history", std::move(history)},
              {"state", step.state},
              {"thought", step.thought},
              {"action", step.action},
              {"rollout_logprob", step.rollout_logprob},
              {"token_entropies", std::move(entropies)},
              {"model_version", step.model_version}};
}

Json to_json(const Trajectory& trajectory) {
  Json steps = Json::array();
  for (const auto& s : trajectory.steps) steps.push_back(to_json(s));
  return Json{{"trajectory_id", trajectory.trajectory_id},
              {"task_id", trajectory.task_id},
              {"steps", std::move(steps)},
              {"reward", trajectory.reward},
              {"terminal_reason", to_string(trajectory.terminal_reason)},
              {"model_version", trajectory.model_version},
              {"source", to_string(trajectory.source)},
              {"wall_time", trajectory.wall_time}};
}

Json to_json(const Task& task) {
  Json j{{"task_id", task.task_id},
         {"target_sequence", task.target_sequence},
         {"difficulty", task.difficulty},
         {"step_latency", task.step_latency},
         {"max_steps_cap", task.max_steps_cap},
         {"rollout_count", task.rollout_count},
         {"success_rate_ema", task.success_rate_ema}};
  j["best_success_length"] = task.best_success_length ? Json(*task.best_success_length) : Json(nullptr);
  return j;
}

HistoryEntry history_entry_from_json(const Json& j) {
  return HistoryEntry{j.at("state").get<std::vector<int>>(), j.at("thought").get<std::vector<int>>(),
                      j.at("action").get<std::vector<int>>()};
}

StepRecord step_record_from_json(const Json& j) {
  StepRecord s;
  s.task_id = j.at("task_id").get<std::string>();
  s.trajectory_id = j.at("trajectory_id").get<std::string>();
  s.step_index = j.at("step_index").get<int>();
  for (const auto& h : j.at("history")) s.history.push_back(history_entry_from_json(h));
  s.state = j.at("state").get<std::vector<int>>();
  s.thought = j.at("thought").get<std::vector<int>>();
  s.action = j.at("action").get<std::vector<int>>();
  s.rollout_logprob = j.at("rollout_logprob").get<double>();
  s.token_entropies = j.at("token_entropies").get<std::vector<double>>();
  s.model_version = j.at("model_version").get<ModelVersion>();
  return s;
}

Trajectory trajectory_from_json(const Json& j) {
  Trajectory t;
  t.trajectory_id = j.at("trajectory_id").get<std::string>();
  t.task_id = j.at("task_id").get<std::string>();
  for (const auto& s : j.at("steps")) t.steps.push_back(step_record_from_json(s));
  t.reward = j.at("reward").get<double>();
  t.terminal_reason = terminal_reason_from_string(j.at("terminal_reason").get<std::string>());
  t.model_version = j.at("model_version").get<ModelVersion>();
  t.source = trajectory_source_from_string(j.at("source").get<std::string>());
  t.wall_time = j.at("wall_time").get<double>();
  return t;
}

Task task_from_json(const Json& j) {
  Task t;
  t.task_id = j.at("task_id").get<std::string>();
  t.target_sequence = j.at("target_sequence").get<std::vector<int>>();
  t.difficulty = j.at("difficulty").get<int>();
  t.step_latency = j.at("step_latency").get<double>();
  t.max_steps_cap = j.at("max_steps_cap").get<int>();
  t.rollout_count = j.at("rollout_count").get<int>();
  t.success_rate_ema = j.at("success_rate_ema").get<double>();
  if (j.contains("best_success_length") && !j.at("best_success_length").is_null()) {
    t.best_success_length = j.at("best_success_length").get<int>();
  }
  return t;
}

std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dart
