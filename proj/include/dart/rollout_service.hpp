#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dart/core.hpp"
#include "dart/env_cluster.hpp"
#include "dart/policy.hpp"

namespace dart {

using Snapshot = std::shared_ptr<const PolicyParams>;

enum class WorkerStatus { serving, syncing };

struct Worker {
  int worker_id = 0;
  Snapshot snapshot;
  WorkerStatus status = WorkerStatus::serving;
  int in_flight = 0;
  double busy_time = 0.0;
  Snapshot incoming;  // set while a sync is draining or swapping

  ModelVersion version() const { return snapshot ? snapshot->version : 0; }
};

/// One trajectory's worth of work.
struct RolloutRequest {
  std::string task_id;
  std::string group_id;
  int ordinal = 0;
  int env_id = -1;
  int max_steps = kDefaultGlobalMaxSteps;
  double issued_at = 0.0;

  std::string trajectory_id() const { return group_id + "/" + std::to_string(ordinal); }
};

/// Serving worker with the fewest in-flight requests, lowest id on ties;
/// nullopt when no worker is serving.
std::optional<int> dispatch(std::span<const Worker> workers);

struct SyncAck {
  bool accepted = false;
  ModelVersion from = 0;
  ModelVersion to = 0;
};

/// Worker-pool bookkeeping shared by the simulator and the threaded runner.
/// Requests are opaque tickets; a ticket submitted while every worker is
/// syncing waits in a FIFO and is handed back by finish_sync().
class RolloutService {
 public:
  RolloutService(int workers, Snapshot initial);

  std::optional<int> submit(std::uint64_t ticket);
  /// Marks a request on `worker_id` finished. Returns true when the worker is
  /// syncing and has just drained, i.e. may swap now.
  bool complete(int worker_id);

  /// Starts a sync: the worker stops accepting requests and drains. A version
  /// not newer than the worker's current one is ignored.
  SyncAck sync_worker(int worker_id, Snapshot params);
  bool drained(int worker_id) const;
  /// Swaps in the incoming snapshot and resumes serving. Returns queued
  /// tickets now assigned to workers, as (ticket, worker) pairs.
  std::vector<std::pair<std::uint64_t, int>> finish_sync(int worker_id);

  int serving_count() const;
  int syncing_count() const;
  std::size_t pending() const { return pending_.size(); }
  std::size_t ignored_syncs() const { return ignored_syncs_; }
  const Worker& worker(int id) const { return workers_.at(static_cast<std::size_t>(id)); }
  Worker& worker(int id) { return workers_.at(static_cast<std::size_t>(id)); }
  std::span<const Worker> workers() const { return workers_; }
  int size() const { return static_cast<int>(workers_.size()); }

 private:
  std::vector<Worker> workers_;
  std::deque<std::uint64_t> pending_;
  std::size_t ignored_syncs_ = 0;
};

enum class SyncMode { all_worker, per_worker };
enum class SamplingMode { batch, task, rollout };

std::string to_string(SyncMode mode);
std::string to_string(SamplingMode mode);
SyncMode sync_mode_from_string(const std::string& s);
SamplingMode sampling_mode_from_string(const std::string& s);

/// Picks which workers start syncing toward `latest` right now. Per-worker
/// mode staggers strictly one worker at a time in id order; all-worker mode
/// starts every outdated worker at once.
std::vector<int> plan_sync(const RolloutService& service, ModelVersion latest, SyncMode mode);

/// A task's group of rollouts waiting to be issued.
struct GroupSpec {
  std::string task_id;
  std::string group_id;
  int rollouts = 1;
  int max_steps = kDefaultGlobalMaxSteps;
};

/// Decides which unit an env runs next under batch-, task- or rollout-wise
/// sampling. Envs are partitioned into `slots` contiguous groups for the
/// batch and task modes; each slot works on one task at a time.
class RolloutScheduler {
 public:
  using GroupSource = std::function<std::optional<GroupSpec>()>;

  RolloutScheduler(SamplingMode mode, int envs, int slots, GroupSource source);

  /// Next request for a freed env, or nullopt when the env must idle.
  std::optional<RolloutRequest> next_unit(int env_id, double now = 0.0);
  void on_rollout_done(const std::string& group_id);

  /// Batch mode only: when closed, no new batch starts (coupled training).
  void set_gate(bool open) { gate_open_ = open; }
  bool batch_in_progress() const;
  /// True once the source is exhausted and everything issued has finished.
  bool finished() const;
  std::size_t batches_started() const { return batches_started_; }
  SamplingMode mode() const { return mode_; }

 private:
  struct ActiveGroup {
    GroupSpec spec;
    int issued = 0;
    int completed = 0;
    bool active = false;
  };

  int slot_of(int env_id) const;
  bool pull(GroupSpec& out);
  std::optional<RolloutRequest> issue(ActiveGroup& g, int env_id, double now);

  SamplingMode mode_;
  int envs_;
  int slots_;
  GroupSource source_;
  bool source_done_ = false;
  bool gate_open_ = true;
  std::size_t batches_started_ = 0;
  std::deque<ActiveGroup> queue_;            // rollout mode: groups with unissued units
  std::vector<ActiveGroup> slot_groups_;     // batch/task modes
  std::vector<ActiveGroup> running_;         // rollout mode: fully issued, unfinished
};

struct RolloutOptions {
  int thought_len = 1;
  int action_len = 1;
  int history_window = kDefaultHistoryWindow;
  // Actions come from the env's goal predicate instead of the policy
  // (scripted oracle); thoughts are still sampled and every token is scored.
  bool oracle_actions = false;
};

/// One rollout in progress. Each advance() generates a step with whatever
/// snapshot served it and executes the step in the env.
class RolloutCursor {
 public:
  RolloutCursor(const Task& task, RolloutRequest request, EnvInstance& env, const Featurizer& featurizer,
                RolloutOptions options, std::uint64_t seed);

  /// Returns the env latency of the executed step.
  double advance(const PolicyParams& snapshot);
  bool done() const { return env_->done(); }
  int steps() const { return static_cast<int>(steps_.size()); }
  const RolloutRequest& request() const { return request_; }

  /// Evaluates the episode and releases the env.
  Trajectory finish(double wall_time = 0.0);

 private:
  RolloutRequest request_;
  EnvInstance* env_;
  const Featurizer* featurizer_;
  RolloutOptions options_;
  Rng rng_;
  std::vector<int> task_tokens_;
  std::vector<int> state_;
  std::vector<HistoryEntry> history_;
  std::vector<StepRecord> steps_;
};

/// Runs a whole rollout against one worker's snapshot.
Trajectory run_rollout(const Task& task, const RolloutRequest& request, EnvInstance& env, const Worker& worker,
                       const Featurizer& featurizer, const RolloutOptions& options, std::uint64_t seed);

}  // namespace dart
