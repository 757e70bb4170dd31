#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "dart/config.hpp"
#include "dart/core.hpp"
#include "dart/rollout_service.hpp"

namespace dart {

enum class EntityClass { env, worker, trainer, data_manager };

std::string to_string(EntityClass cls);

enum class EventKind {
  reset,
  step_start,
  step_end,
  rollout_done,
  sync_start,
  sync_end,
  train_start,
  train_end,
  dispatch,
  idle_mark,
};

std::string to_string(EventKind kind);

/// Processed in (time, entity, sequence) order.
struct Event {
  double time = 0.0;
  EntityClass entity = EntityClass::env;
  int entity_id = 0;
  EventKind kind = EventKind::reset;
  std::uint64_t sequence = 0;
  Json payload;
};

struct EventOrder {
  bool operator()(const Event& a, const Event& b) const;  // "a after b", for std::priority_queue
};

class EventQueue {
 public:
  void push(double time, EntityClass entity, int entity_id, EventKind kind, Json payload = {});
  Event pop();
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  std::priority_queue<Event, std::vector<Event>, EventOrder> heap_;
  std::uint64_t next_sequence_ = 0;
};

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

struct EntityTimeline {
  EntityClass cls = EntityClass::env;
  int id = 0;
  std::vector<Interval> busy;  // sorted, non-overlapping
  double busy_time() const;
};

struct UnitRecord {
  std::string group_id;
  int ordinal = 0;
  int env_id = 0;
  double issued_at = 0.0;
  double finished_at = 0.0;
  int steps = 0;
};

struct TimelineReport {
  double duration = 0.0;
  std::vector<EntityTimeline> entities;
  std::int64_t actions_produced = 0;
  std::int64_t actions_consumed = 0;
  std::int64_t rollouts_completed = 0;
  std::int64_t train_iterations = 0;
  double env_blocked_time = 0.0;
  std::vector<std::pair<double, int>> serving_timeline;  // (time, serving workers) at each change
  int min_serving = 0;
  int zero_serving_intervals = 0;
  double zero_serving_time = 0.0;
  int sync_updates = 0;  // versions published to the rollout service
  std::vector<UnitRecord> units;
  std::vector<Event> trace;
};

/// Mean over entities of the class of busy time / duration. Throws
/// std::invalid_argument on a zero-duration report or an absent class.
double utilization(const TimelineReport& report, EntityClass cls);

/// Trained-on actions per virtual minute (60 time units).
double throughput(const TimelineReport& report);

/// Total idle time of a class, for the conservation law.
double idle_time(const TimelineReport& report, EntityClass cls);

/// One group that became trainable.
struct TrainJob {
  std::string group_id;
  std::int64_t actions = 0;
};

struct StepOutcome {
  double latency = 0.0;
  bool done = false;
};

/// What the engine drives. Isolated studies plug in duration stubs; the
/// full system plugs in the real env, policy, data manager and trainer.
class SimBackend {
 public:
  virtual ~SimBackend() = default;
  virtual std::optional<GroupSpec> next_group(double now) = 0;
  virtual void begin_rollout(const RolloutRequest& request, double now) = 0;
  /// Generates (with `worker_id`'s snapshot) and executes one step of the rollout on `env_id`.
  virtual StepOutcome step(int env_id, int worker_id, const PolicyParams& snapshot, double now) = 0;
  /// Closes the rollout; returns a job when its group became trainable.
  virtual std::optional<TrainJob> finish_rollout(int env_id, double now) = 0;
  virtual double train_duration(const TrainJob& job) = 0;
  /// Runs the update. Returns the new snapshot, or nullptr when nothing was applied.
  virtual Snapshot train(const TrainJob& job, double now) = 0;
  /// Snapshot pushed to workers once `latest` is published (normally latest itself).
  virtual Snapshot sync_target(ModelVersion latest) = 0;
  virtual Snapshot initial_snapshot() = 0;
  virtual void on_worker_synced(int /*worker_id*/, ModelVersion /*version*/, double /*now*/) {}
  /// Checked after every event; true ends the run (e.g. after divergence).
  virtual bool should_stop() const { return false; }
};

struct EngineConfig {
  SamplingMode sampling = SamplingMode::rollout;
  SyncMode sync = SyncMode::per_worker;
  // Synchronous training: the next batch waits for training and sync.
  bool coupled = false;
  int envs = 8;
  int workers = 4;
  int slots = 2;
  int worker_capacity = 16;
  double inference_latency = 1.0;
  double sync_latency = 5.0;
  bool training = true;
  std::int64_t max_train_iterations = -1;  // < 0: unbounded
  double max_time = -1.0;                  // < 0: unbounded
  bool record_trace = true;

  void validate() const;
};

/// Single-threaded discrete-event loop on a virtual clock.
class Simulator {
 public:
  Simulator(EngineConfig config, SimBackend& backend);
  TimelineReport run();

 private:
  enum class EnvState { idle, waiting, inferring, stepping };

  struct EnvSlot {
    EnvState state = EnvState::idle;
    std::optional<RolloutRequest> request;
    double rollout_start = 0.0;
    double blocked_since = -1.0;
    int steps = 0;
    int worker = -1;
  };

  struct WorkerSlot {
    int active = 0;
    std::deque<int> queue;  // envs waiting for capacity on this worker
    double busy_since = -1.0;
    bool sync_scheduled = false;
  };

  void log(double t, EntityClass cls, int id, EventKind kind, Json payload = {});
  void fill_idle_envs(double now);
  void start_rollout(int env, RolloutRequest request, double now);
  void request_inference(int env, double now);
  void assign(int env, int worker, double now);
  void begin_inference(int env, int worker, double now);
  void handle(const Event& e);
  void on_inference_done(int env, int worker, double now);
  void on_step_end(int env, bool rollout_done, double now);
  void maybe_train(double now);
  void plan_syncs(double now);
  void worker_drained(int worker, double now);
  void note_serving(double now);
  void mark_busy(EntityClass cls, int id, double start, double end);
  bool gate_open() const;
  bool done() const;

  EngineConfig config_;
  SimBackend* backend_;
  EventQueue queue_;
  std::unique_ptr<RolloutService> service_;
  std::unique_ptr<RolloutScheduler> scheduler_;
  std::vector<EnvSlot> envs_;
  std::vector<WorkerSlot> workers_;
  std::deque<TrainJob> train_queue_;
  bool trainer_busy_ = false;
  std::optional<TrainJob> training_;
  Snapshot pending_publish_;
  ModelVersion latest_ = 0;
  std::map<std::string, int> group_outstanding_;
  std::map<std::pair<std::string, int>, std::size_t> unit_index_;
  TimelineReport report_;
  std::map<std::pair<int, int>, std::vector<Interval>> busy_;
  double now_ = 0.0;
  bool stop_ = false;
};

/// Rollout durations for an isolated scheduling study.
struct StubTask {
  std::string task_id;
  double step_latency = 1.0;
  std::vector<int> rollout_steps;  // one entry per rollout
};

struct ScenarioConfig {
  EngineConfig engine;
  std::uint64_t seed = 1;
  // Seeded duration model, used when `tasks` is empty.
  int task_count = 4;
  int rollouts = 4;
  int rounds = 1;  // groups issued per task
  int steps_min = 3;
  int steps_max = 30;
  double step_latency_min = 1.0;
  double step_latency_max = 5.0;
  double train_latency_base = 0.0;
  double train_latency_per_action = 0.05;
  std::vector<StubTask> tasks;

  void validate() const;
};

/// Task table of one round: the explicit table, or a draw from the seeded model.
std::vector<StubTask> scenario_tasks(const ScenarioConfig& config, int round = 0);

/// Runs an isolated scheduling study with duration stubs in place of rollouts.
TimelineReport simulate(const ScenarioConfig& config);

/// Table-2-shaped study: 180 envs, 4 workers, mixed task durations, measured
/// over a fixed 3000-unit horizon with an endless task supply.
ScenarioConfig reference_scenario(std::uint64_t seed = 1);
/// Batch-wise sampling, all-worker sync, trainer waits for each batch.
ScenarioConfig coupled_variant(ScenarioConfig config);
/// Rollout-wise sampling, per-worker sync, no gate.
ScenarioConfig decoupled_variant(ScenarioConfig config);
/// Sync study: 4 workers, 80 envs, one model update every 40 units.
ScenarioConfig sync_scenario(std::uint64_t seed = 1);
/// Randomized heterogeneous-duration scheduling study, measured over a fixed
/// 1500-unit horizon with an endless task supply.
ScenarioConfig ordering_scenario(std::uint64_t seed, int index);

/// Keys: sampling, sync, coupled, envs, workers, slots, worker_capacity,
/// inference_latency, sync_latency, training, max_train_iterations, max_time,
/// record_trace, seed, tasks, rollouts, rounds, steps_min, steps_max,
/// step_latency_min, step_latency_max, train_latency_base,
/// train_latency_per_action, task_table ("A:1:2,2;B:1:6,6" = id:latency:steps...).
/// Throws std::invalid_argument on unknown keys or bad values.
/// Fields absent from `kv` keep their value in `base`.
ScenarioConfig scenario_from_key_values(const std::map<std::string, std::string>& kv, ScenarioConfig base = {});
std::set<std::string> scenario_keys();

/// Event trace as JSONL rows {timestamp, entity, event, ...payload}.
std::string trace_jsonl(const TimelineReport& report);
/// Per-entity utilization CSV.
std::string utilization_csv(const TimelineReport& report);
/// Text Gantt chart, one row per entity, `width` columns.
std::string ascii_gantt(const TimelineReport& report, int width = 80, int max_rows = 40);
std::string svg_gantt(const TimelineReport& report, int max_rows = 200);

}  // namespace dart
