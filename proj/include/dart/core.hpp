#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace dart {

using Json = nlohmann::json;
using ModelVersion = std::uint64_t;

inline constexpr int kDefaultGlobalMaxSteps = 30;
inline constexpr int kDefaultHistoryWindow = 4;

/// A synthetic multi-step goal plus the live curation state attached to it.
struct Task {
  std::string task_id;
  std::vector<int> target_sequence;
  int difficulty = 1;
  double step_latency = 1.0;
  int max_steps_cap = kDefaultGlobalMaxSteps;
  int rollout_count = 8;
  double success_rate_ema = 0.0;
  std::optional<int> best_success_length;
};

/// One (state, thought, action) triple as seen by later steps.
struct HistoryEntry {
  std::vector<int> state;
  std::vector<int> thought;
  std::vector<int> action;

  bool operator==(const HistoryEntry&) const = default;
};

struct StepRecord {
  std::string task_id;
  std::string trajectory_id;
  int step_index = 0;
  std::vector<HistoryEntry> history;
  std::vector<int> state;
  std::vector<int> thought;
  std::vector<int> action;
  double rollout_logprob = 0.0;
  std::vector<double> token_entropies;
  ModelVersion model_version = 0;

  /// Thought tokens followed by action tokens, the sequence the policy emitted.
  std::vector<int> generated_tokens() const;

  bool operator==(const StepRecord&) const = default;
};

enum class TerminalReason { finished, step_cap, env_failure };
enum class TrajectorySource { online, experience_pool };

struct Trajectory {
  std::string trajectory_id;
  std::string task_id;
  std::vector<StepRecord> steps;
  double reward = 0.0;
  TerminalReason terminal_reason = TerminalReason::finished;
  ModelVersion model_version = 0;
  TrajectorySource source = TrajectorySource::online;
  double wall_time = 0.0;

  bool operator==(const Trajectory&) const = default;
};

/// All steps pooled from one task's rollouts; the unit of advantage normalization.
struct StepGroup {
  std::string task_id;
  std::vector<StepRecord> step_records;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<double> entropy_values;
};

/// Flattens trajectories into a step group in (trajectory, step) order. Each
/// step carries its own trajectory's reward. Throws std::invalid_argument on
/// empty input or mixed task ids.
StepGroup make_step_group(std::span<const Trajectory> trajectories);

/// Mean token entropy over a step's concatenated thought and action tokens.
double step_entropy(std::span<const double> token_entropies);

/// Throws std::invalid_argument when a trajectory violates its invariants.
void validate(const Trajectory& trajectory);

std::string to_string(TerminalReason reason);
std::string to_string(TrajectorySource source);
TerminalReason terminal_reason_from_string(const std::string& s);
TrajectorySource trajectory_source_from_string(const std::string& s);

Json to_json(const HistoryEntry& entry);
Json to_json(const StepRecord& step);
Json to_json(const Trajectory& trajectory);
Json to_json(const Task& task);
HistoryEntry history_entry_from_json(const Json& j);
StepRecord step_record_from_json(const Json& j);
Trajectory trajectory_from_json(const Json& j);
Task task_from_json(const Json& j);

/// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t stable_hash(std::string_view s);

}  // namespace dart
