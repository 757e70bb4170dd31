#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dart/core.hpp"
#include "dart/jsonl.hpp"
#include "dart/rng.hpp"

namespace dart {

/// Rollout count used once a task's success EMA reaches `min_ema`.
struct RolloutTier {
  double min_ema = 0.0;
  int rollouts = 8;
};

struct CurationConfig {
  double ema_decay = 0.3;
  int max_rollouts = 8;
  int min_rollouts = 2;
  std::vector<RolloutTier> rollout_table{{0.6, 6}, {0.7, 5}, {0.8, 4}, {0.9, 2}};
  int length_margin = 2;
  int global_max_steps = kDefaultGlobalMaxSteps;
  double success_threshold = 1.0;
  bool dynamic_rollouts = true;
  bool dynamic_length = true;
  bool use_pool = true;
};

struct TaskStats {
  std::string task_id;
  double success_rate_ema = 0.0;
  std::int64_t attempts = 0;
  std::optional<int> best_success_length;
  int rollout_count = 8;
  int max_steps_cap = kDefaultGlobalMaxSteps;
};

Json to_json(const TaskStats& stats);
TaskStats task_stats_from_json(const Json& j);

/// N for the next group: max_rollouts below the first tier, then the tier
/// table, never below min_rollouts.
int next_rollout_count(const TaskStats& stats, const CurationConfig& config);

/// global_cap until the first success, then min(global_cap, best + margin).
/// Throws std::invalid_argument when the recorded best exceeds the cap.
int next_max_length(const TaskStats& stats, int global_cap, int margin);

/// Folds one finished group into the task's statistics.
TaskStats update_task_stats(TaskStats stats, std::span<const Trajectory> outcomes, const CurationConfig& config);

/// Successful trajectories collected ahead of training, per task.
class ExperiencePool {
 public:
  explicit ExperiencePool(double success_threshold = 1.0) : threshold_(success_threshold) {}

  /// Throws std::invalid_argument when the reward is below the threshold.
  void add(Trajectory trajectory);
  std::span<const Trajectory> for_task(const std::string& task_id) const;
  std::size_t size(const std::string& task_id) const { return for_task(task_id).size(); }
  std::size_t total() const;
  /// Uniformly random entry for the task, or nullptr when it has none.
  const Trajectory* sample(const std::string& task_id, Rng& rng) const;

 private:
  double threshold_;
  std::map<std::string, std::vector<Trajectory>> entries_;
};

enum class Table {
  checkpoint,
  current_model,
  model_registry,
  datasets,
  dataset_usage_events,
  rollout_run,
  rollout_chunk,
  trainable_group,
  update_model_task,
  inference_node,
  inference_tasks,
};

inline constexpr std::array<Table, 11> kAllTables{
    Table::checkpoint,      Table::current_model,        Table::model_registry, Table::datasets,
    Table::dataset_usage_events, Table::rollout_run,     Table::rollout_chunk,  Table::trainable_group,
    Table::update_model_task, Table::inference_node,     Table::inference_tasks};

std::string_view table_name(Table table);

struct UsageEvent {
  std::uint64_t event_id = 0;
  std::string trajectory_id;
  std::string event_type;
  ModelVersion model_version = 0;
  double timestamp = 0.0;
};

using UsageCounters = std::map<std::string, std::map<std::string, std::int64_t>>;

/// Recomputes per-trajectory usage counters from dataset_usage_events rows.
UsageCounters replay_usage(std::span<const Json> rows);

/// One JSONL file per table plus `rollout_chunk.idx`, mapping trajectory ids
/// to byte offsets in rollout_chunk.jsonl. Rows are flushed as they are
/// appended; reopening a directory recovers every complete row.
class TrajectoryStore {
 public:
  explicit TrajectoryStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path table_path(Table table) const;

  /// Throws std::invalid_argument on a duplicate trajectory id.
  void put_trajectory(const Trajectory& trajectory, bool trainable);
  Trajectory get_trajectory(const std::string& trajectory_id) const;
  bool contains(const std::string& trajectory_id) const { return offsets_.contains(trajectory_id); }
  std::size_t trajectory_count() const { return offsets_.size(); }
  bool trainable(const std::string& trajectory_id) const;

  void append(Table table, const Json& row);
  std::vector<Json> rows(Table table) const;

 private:
  JsonlAppender& appender(Table table);

  std::filesystem::path dir_;
  std::map<Table, JsonlAppender> appenders_;
  JsonlAppender index_;
  std::unordered_map<std::string, std::uint64_t> offsets_;
  std::unordered_map<std::string, bool> trainable_;
};

enum class GroupStatus { not_ready, trainable, skipped_all_success, no_positive };

std::string to_string(GroupStatus status);

struct AssembledGroup {
  GroupStatus status = GroupStatus::not_ready;
  std::string group_id;
  std::string task_id;
  std::vector<Trajectory> trajectories;  // online ones first, then any pool injection
  std::optional<std::string> injected;
  StepGroup steps;
  TaskStats stats;
};

/// Store plus curation state. Every mutation runs under one lock, which is
/// the system's single serialization point.
class DataManager {
 public:
  DataManager(std::filesystem::path dir, CurationConfig config, std::uint64_t seed);

  const CurationConfig& config() const { return config_; }
  TrajectoryStore& store() { return store_; }
  const TrajectoryStore& store() const { return store_; }
  ExperiencePool& pool() { return pool_; }
  const ExperiencePool& pool() const { return pool_; }

  /// Adds a task to the suite (persisted once) and initialises its stats.
  void register_task(const Task& task);
  std::vector<Task> tasks() const;
  const Task& task(const std::string& task_id) const;
  TaskStats stats(const std::string& task_id) const;

  /// Declares a group of `rollouts` online trajectories of a task.
  void open_group(const std::string& group_id, const std::string& task_id, int rollouts);

  /// Persists a trajectory and files online ones under their group.
  std::string store_trajectory(const Trajectory& trajectory, const std::string& group_id = {});

  /// Builds the trainable group once all of its rollouts have been stored.
  AssembledGroup assemble_group(const std::string& group_id);

  TaskStats update_task_stats(const std::string& task_id, std::span<const Trajectory> outcomes);

  /// Persists the trajectory and adds it to the experience pool.
  void add_to_pool(Trajectory trajectory);

  UsageEvent record_usage_event(const std::string& trajectory_id, const std::string& event_type,
                                ModelVersion model_version);
  UsageCounters usage_counters() const;

  void record_model(ModelVersion version, ModelVersion parent, const std::string& checkpoint_path,
                    std::int64_t iteration);
  void record_update(const Json& row);
  void record_worker_event(int worker_id, ModelVersion version, const std::string& event);
  void record_request(const std::string& trajectory_id, int env_id, int worker_id);

  /// Latest committed model version in current_model, if any.
  std::optional<ModelVersion> current_model() const;
  std::int64_t committed_iterations() const;

  void set_clock(double now);
  double clock() const;

 private:
  struct OpenGroup {
    std::string task_id;
    int expected = 0;
    std::vector<Trajectory> online;
  };

  TaskStats update_stats_locked(const std::string& task_id, std::span<const Trajectory> outcomes);
  UsageEvent usage_locked(const std::string& trajectory_id, const std::string& event_type, ModelVersion version);
  void restore();

  CurationConfig config_;
  TrajectoryStore store_;
  ExperiencePool pool_;
  Rng rng_;
  std::map<std::string, Task> tasks_;
  std::vector<std::string> task_order_;
  std::map<std::string, TaskStats> stats_;
  std::map<std::string, OpenGroup> groups_;
  UsageCounters usage_;
  std::uint64_t next_event_id_ = 0;
  std::int64_t committed_iterations_ = 0;
  std::optional<ModelVersion> current_model_;
  double clock_ = 0.0;
  mutable std::mutex mutex_;
};

}  // namespace dart
