#include "dart/sim_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "dart/rng.hpp"

namespace dart {

std::string to_string(EntityClass cls) {
  switch (cls) {
    case EntityClass::env: return "env";
    case EntityClass::worker: return "worker";
    case EntityClass::trainer: return "trainer";
    case EntityClass::data_manager: return "data_manager";
  }
  return "env";
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::reset: return "reset";
    case EventKind::step_start: return "step_start";
    case EventKind::step_end: return "step_end";
    case EventKind::rollout_done: return "rollout_done";
    case EventKind::sync_start: return "sync_start";
    case EventKind::sync_end: return "sync_end";
    case EventKind::train_start: return "train_start";
    case EventKind::train_end: return "train_end";
    case EventKind::dispatch: return "dispatch";
    case EventKind::idle_mark: return "idle_mark";
  }
  return "reset";
}

bool EventOrder::operator()(const Event& a, const Event& b) const {
  return std::make_tuple(a.time, static_cast<int>(a.entity), a.entity_id, a.sequence) >
         std::make_tuple(b.time, static_cast<int>(b.entity), b.entity_id, b.sequence);
}

void EventQueue::push(double time, EntityClass entity, int entity_id, EventKind kind, Json payload) {
  if (!std::isfinite(time)) throw std::invalid_argument("event time must be finite");
  heap_.push(Event{time, entity, entity_id, kind, next_sequence_++, std::move(payload)});
}

Event EventQueue::pop() {
  if (heap_.empty()) throw std::logic_error("pop from empty event queue");
  Event e = heap_.top();
  heap_.pop();
  return e;
}

double EntityTimeline::busy_time() const {
  double total = 0.0;
  for (const auto& iv : busy) total += iv.end - iv.start;
  return total;
}

namespace {

std::vector<const EntityTimeline*> of_class(const TimelineReport& report, EntityClass cls) {
  std::vector<const EntityTimeline*> out;
  for (const auto& e : report.entities) {
    if (e.cls == cls) out.push_back(&e);
  }
  return out;
}

}  // namespace

double utilization(const TimelineReport& report, EntityClass cls) {
  if (!(report.duration > 0.0)) throw std::invalid_argument("utilization of a zero-duration report");
  const auto entities = of_class(report, cls);
  if (entities.empty()) throw std::invalid_argument("report has no " + to_string(cls) + " entities");
  double sum = 0.0;
  for (const auto* e : entities) sum += e->busy_time() / report.duration;
  return sum / static_cast<double>(entities.size());
}

double throughput(const TimelineReport& report) {
  if (!(report.duration > 0.0)) return 0.0;
  return static_cast<double>(report.actions_consumed) / (report.duration / 60.0);
}

double idle_time(const TimelineReport& report, EntityClass cls) {
  double idle = 0.0;
  for (const auto* e : of_class(report, cls)) idle += report.duration - e->busy_time();
  return idle;
}

void EngineConfig::validate() const {
  if (envs <= 0) throw std::invalid_argument("scenario needs at least one env");
  if (workers <= 0) throw std::invalid_argument("scenario needs at least one worker");
  if (worker_capacity <= 0) throw std::invalid_argument("worker_capacity must be positive");
  if (slots <= 0) throw std::invalid_argument("slots must be positive");
  if (sampling != SamplingMode::rollout && slots > envs) throw std::invalid_argument("slots cannot exceed envs");
  if (!(inference_latency >= 0.0) || !(sync_latency >= 0.0)) throw std::invalid_argument("latencies must be >= 0");
  if (coupled && sampling != SamplingMode::batch) throw std::invalid_argument("coupled mode requires batch sampling");
}

Simulator::Simulator(EngineConfig config, SimBackend& backend) : config_(config), backend_(&backend) {
  config_.validate();
  service_ = std::make_unique<RolloutService>(config_.workers, backend_->initial_snapshot());
  latest_ = service_->worker(0).version();
  scheduler_ = std::make_unique<RolloutScheduler>(config_.sampling, config_.envs, config_.slots,
                                                  [this]() { return backend_->next_group(now_); });
  envs_.resize(static_cast<std::size_t>(config_.envs));
  workers_.resize(static_cast<std::size_t>(config_.workers));
}

void Simulator::log(double t, EntityClass cls, int id, EventKind kind, Json payload) {
  if (!config_.record_trace) return;
  Event e{t, cls, id, kind, report_.trace.size(), std::move(payload)};
  report_.trace.push_back(std::move(e));
}

void Simulator::mark_busy(EntityClass cls, int id, double start, double end) {
  if (end <= start) return;
  auto& v = busy_[{static_cast<int>(cls), id}];
  if (!v.empty() && start <= v.back().end) {
    v.back().end = std::max(v.back().end, end);
  } else {
    v.push_back(Interval{start, end});
  }
}

void Simulator::note_serving(double now) {
  const int serving = service_->serving_count();
  if (report_.serving_timeline.empty() || report_.serving_timeline.back().second != serving) {
    if (!report_.serving_timeline.empty() && report_.serving_timeline.back().first == now) {
      report_.serving_timeline.back().second = serving;
    } else {
      report_.serving_timeline.emplace_back(now, serving);
    }
  }
}

bool Simulator::gate_open() const {
  if (!config_.coupled) return true;
  if (!train_queue_.empty() || trainer_busy_) return false;
  for (const auto& w : service_->workers()) {
    if (w.status != WorkerStatus::serving) return false;
  }
  const auto target = backend_->sync_target(latest_);
  for (const auto& w : service_->workers()) {
    if (target && w.version() < target->version) return false;
  }
  return true;
}

void Simulator::fill_idle_envs(double now) {
  if (stop_) return;
  scheduler_->set_gate(gate_open());
  for (int env = 0; env < config_.envs; ++env) {
    auto& slot = envs_[static_cast<std::size_t>(env)];
    if (slot.state != EnvState::idle) continue;
    auto req = scheduler_->next_unit(env, now);
    if (req) {
      start_rollout(env, std::move(*req), now);
    } else if (slot.request) {
      // First idle moment after a rollout.
      slot.request.reset();
      log(now, EntityClass::env, env, EventKind::idle_mark);
    }
  }
}

void Simulator::start_rollout(int env, RolloutRequest request, double now) {
  auto& slot = envs_[static_cast<std::size_t>(env)];
  request.env_id = env;
  backend_->begin_rollout(request, now);
  log(now, EntityClass::env, env, EventKind::reset,
      Json{{"group_id", request.group_id}, {"ordinal", request.ordinal}, {"task_id", request.task_id}});
  unit_index_[{request.group_id, request.ordinal}] = report_.units.size();
  report_.units.push_back(UnitRecord{request.group_id, request.ordinal, env, now, now, 0});
  slot.request = std::move(request);
  slot.rollout_start = now;
  slot.steps = 0;
  slot.state = EnvState::waiting;
  request_inference(env, now);
}

void Simulator::request_inference(int env, double now) {
  auto& slot = envs_[static_cast<std::size_t>(env)];
  slot.state = EnvState::waiting;
  const auto w = service_->submit(static_cast<std::uint64_t>(env));
  if (!w) {
    slot.blocked_since = now;
    log(now, EntityClass::env, env, EventKind::dispatch, Json{{"queued", true}});
    return;
  }
  log(now, EntityClass::env, env, EventKind::dispatch, Json{{"worker", *w}});
  assign(env, *w, now);
}

void Simulator::assign(int env, int worker, double now) {
  auto& w = workers_[static_cast<std::size_t>(worker)];
  envs_[static_cast<std::size_t>(env)].worker = worker;
  if (w.active < config_.worker_capacity) {
    begin_inference(env, worker, now);
  } else {
    w.queue.push_back(env);
  }
}

void Simulator::begin_inference(int env, int worker, double now) {
  auto& w = workers_[static_cast<std::size_t>(worker)];
  if (w.active++ == 0) w.busy_since = now;
  envs_[static_cast<std::size_t>(env)].state = EnvState::inferring;
  queue_.push(now + config_.inference_latency, EntityClass::env, env, EventKind::step_start, Json{{"worker", worker}});
}

void Simulator::on_inference_done(int env, int worker, double now) {
  auto& slot = envs_[static_cast<std::size_t>(env)];
  const Snapshot snapshot = service_->worker(worker).snapshot;
  const auto outcome = backend_->step(env, worker, *snapshot, now);
  if (!(outcome.latency >= 0.0)) throw std::logic_error("negative step latency");

  auto& w = workers_[static_cast<std::size_t>(worker)];
  if (--w.active == 0) mark_busy(EntityClass::worker, worker, w.busy_since, now);
  if (!w.queue.empty() && w.active < config_.worker_capacity) {
    const int next = w.queue.front();
    w.queue.pop_front();
    begin_inference(next, worker, now);
  }
  const bool drained = service_->complete(worker);

  ++report_.actions_produced;
  ++slot.steps;
  slot.state = EnvState::stepping;
  log(now, EntityClass::env, env, EventKind::step_start,
      Json{{"worker", worker}, {"version", snapshot->version}, {"latency", outcome.latency}});
  mark_busy(EntityClass::env, env, now, now + outcome.latency);
  queue_.push(now + outcome.latency, EntityClass::env, env, EventKind::step_end, Json{{"done", outcome.done}});

  if (drained) worker_drained(worker, now);
}

void Simulator::on_step_end(int env, bool rollout_done, double now) {
  auto& slot = envs_[static_cast<std::size_t>(env)];
  log(now, EntityClass::env, env, EventKind::step_end);
  if (!rollout_done) {
    request_inference(env, now);
    return;
  }
  auto job = backend_->finish_rollout(env, now);
  const auto& req = *slot.request;
  log(now, EntityClass::env, env, EventKind::rollout_done,
      Json{{"group_id", req.group_id}, {"ordinal", req.ordinal}, {"steps", slot.steps}});
  auto& unit = report_.units[unit_index_.at({req.group_id, req.ordinal})];
  unit.finished_at = now;
  unit.steps = slot.steps;
  ++report_.rollouts_completed;
  scheduler_->on_rollout_done(req.group_id);
  slot.state = EnvState::idle;
  if (job) train_queue_.push_back(std::move(*job));
  maybe_train(now);
}

void Simulator::maybe_train(double now) {
  if (!config_.training || trainer_busy_ || train_queue_.empty() || stop_) return;
  if (config_.coupled && scheduler_->batch_in_progress()) return;
  TrainJob job = std::move(train_queue_.front());
  train_queue_.pop_front();
  const double duration = backend_->train_duration(job);
  if (!(duration >= 0.0)) throw std::logic_error("negative train duration");
  pending_publish_ = backend_->train(job, now);
  trainer_busy_ = true;
  log(now, EntityClass::trainer, 0, EventKind::train_start, Json{{"group_id", job.group_id}, {"actions", job.actions}});
  mark_busy(EntityClass::trainer, 0, now, now + duration);
  training_ = std::move(job);
  queue_.push(now + duration, EntityClass::trainer, 0, EventKind::train_end);
}

void Simulator::plan_syncs(double now) {
  const auto target = backend_->sync_target(latest_);
  if (!target) return;
  const auto planned = plan_sync(*service_, target->version, config_.sync);
  bool started = false;
  for (int w : planned) {
    const auto ack = service_->sync_worker(w, target);
    if (!ack.accepted) continue;
    started = true;
    log(now, EntityClass::worker, w, EventKind::sync_start, Json{{"from", ack.from}, {"to", ack.to}});
  }
  if (!started) return;
  note_serving(now);
  for (int w : planned) {
    if (service_->drained(w)) worker_drained(w, now);
  }
}

void Simulator::worker_drained(int worker, double now) {
  auto schedule = [&](int w) {
    auto& slot = workers_[static_cast<std::size_t>(w)];
    if (slot.sync_scheduled) return;
    slot.sync_scheduled = true;
    queue_.push(now + config_.sync_latency, EntityClass::worker, w, EventKind::sync_end);
  };
  if (config_.sync == SyncMode::per_worker) {
    schedule(worker);
    return;
  }
  for (const auto& w : service_->workers()) {
    if (w.status == WorkerStatus::syncing && !service_->drained(w.worker_id)) return;
  }
  for (const auto& w : service_->workers()) {
    if (w.status == WorkerStatus::syncing) schedule(w.worker_id);
  }
}

void Simulator::handle(const Event& e) {
  const double now = e.time;
  switch (e.kind) {
    case EventKind::step_start:
      on_inference_done(e.entity_id, e.payload.at("worker").get<int>(), now);
      break;
    case EventKind::step_end:
      on_step_end(e.entity_id, e.payload.at("done").get<bool>(), now);
      break;
    case EventKind::train_end: {
      trainer_busy_ = false;
      log(now, EntityClass::trainer, 0, EventKind::train_end,
          Json{{"group_id", training_->group_id},
               {"applied", pending_publish_ != nullptr},
               {"version", pending_publish_ ? pending_publish_->version : latest_}});
      if (pending_publish_) {
        report_.actions_consumed += training_->actions;
        ++report_.train_iterations;
        latest_ = pending_publish_->version;
        ++report_.sync_updates;
        pending_publish_.reset();
        plan_syncs(now);
      }
      training_.reset();
      if (config_.max_train_iterations >= 0 && report_.train_iterations >= config_.max_train_iterations) {
        stop_ = true;
        break;
      }
      maybe_train(now);
      break;
    }
    case EventKind::sync_end: {
      const int w = e.entity_id;
      workers_[static_cast<std::size_t>(w)].sync_scheduled = false;
      const auto assigned = service_->finish_sync(w);
      const auto version = service_->worker(w).version();
      log(now, EntityClass::worker, w, EventKind::sync_end, Json{{"version", version}});
      backend_->on_worker_synced(w, version, now);
      note_serving(now);
      for (const auto& [ticket, worker] : assigned) {
        const int env = static_cast<int>(ticket);
        auto& slot = envs_[static_cast<std::size_t>(env)];
        report_.env_blocked_time += now - slot.blocked_since;
        slot.blocked_since = -1.0;
        log(now, EntityClass::env, env, EventKind::dispatch, Json{{"worker", worker}});
        assign(env, worker, now);
      }
      plan_syncs(now);
      break;
    }
    default:
      throw std::logic_error("unexpected queued event " + to_string(e.kind));
  }
}

bool Simulator::done() const { return stop_ || queue_.empty() || backend_->should_stop(); }

TimelineReport Simulator::run() {
  now_ = 0.0;
  note_serving(0.0);
  if (config_.max_train_iterations == 0) stop_ = true;
  fill_idle_envs(0.0);
  while (!done()) {
    if (config_.max_time >= 0.0) {
      Event peek = queue_.pop();
      if (peek.time > config_.max_time) {
        now_ = config_.max_time;
        break;
      }
      now_ = peek.time;
      handle(peek);
    } else {
      const Event e = queue_.pop();
      if (e.time < now_) throw std::logic_error("event time went backwards");
      now_ = e.time;
      handle(e);
    }
    fill_idle_envs(now_);
  }

  report_.duration = now_;
  for (auto& w : workers_) {
    if (w.active > 0) mark_busy(EntityClass::worker, static_cast<int>(&w - workers_.data()), w.busy_since, now_);
  }
  auto add = [&](EntityClass cls, int id) {
    EntityTimeline t;
    t.cls = cls;
    t.id = id;
    if (auto it = busy_.find({static_cast<int>(cls), id}); it != busy_.end()) {
      for (auto iv : it->second) {
        iv.end = std::min(iv.end, report_.duration);
        if (iv.end > iv.start) t.busy.push_back(iv);
      }
    }
    report_.entities.push_back(std::move(t));
  };
  for (int i = 0; i < config_.envs; ++i) add(EntityClass::env, i);
  for (int i = 0; i < config_.workers; ++i) add(EntityClass::worker, i);
  if (config_.training) add(EntityClass::trainer, 0);

  const auto& tl = report_.serving_timeline;
  report_.min_serving = config_.workers;
  for (std::size_t i = 0; i < tl.size(); ++i) {
    const double end = i + 1 < tl.size() ? tl[i + 1].first : report_.duration;
    if (end <= tl[i].first && i + 1 < tl.size()) continue;  // zero-length state
    report_.min_serving = std::min(report_.min_serving, tl[i].second);
    if (tl[i].second == 0) {
      ++report_.zero_serving_intervals;
      report_.zero_serving_time += end - tl[i].first;
    }
  }
  for (const auto& slot : envs_) {
    if (slot.blocked_since >= 0.0) report_.env_blocked_time += report_.duration - slot.blocked_since;
  }
  return std::move(report_);
}

// Isolated studies: rollouts replaced by step-count stubs.

void ScenarioConfig::validate() const {
  engine.validate();
  if (tasks.empty()) {
    if (task_count <= 0) throw std::invalid_argument("tasks must be positive");
    if (rollouts <= 0) throw std::invalid_argument("rollouts must be positive");
    if (steps_min <= 0 || steps_max < steps_min) throw std::invalid_argument("need 0 < steps_min <= steps_max");
    if (!(step_latency_min >= 0.0) || step_latency_max < step_latency_min) {
      throw std::invalid_argument("need 0 <= step_latency_min <= step_latency_max");
    }
  }
  for (const auto& t : tasks) {
    if (t.rollout_steps.empty()) throw std::invalid_argument("task " + t.task_id + " has no rollouts");
    for (int s : t.rollout_steps) {
      if (s <= 0) throw std::invalid_argument("task " + t.task_id + " has a rollout without steps");
    }
    if (!(t.step_latency >= 0.0)) throw std::invalid_argument("task " + t.task_id + " has negative latency");
  }
  if (rounds <= 0) throw std::invalid_argument("rounds must be positive");
  if (!(train_latency_base >= 0.0) || !(train_latency_per_action >= 0.0)) {
    throw std::invalid_argument("train latencies must be >= 0");
  }
}

std::vector<StubTask> scenario_tasks(const ScenarioConfig& config, int round) {
  if (!config.tasks.empty()) return config.tasks;
  std::vector<StubTask> out;
  for (int i = 0; i < config.task_count; ++i) {
    Rng task_rng(Rng::mix(config.seed, static_cast<std::uint64_t>(i)));
    StubTask t;
    t.task_id = "t" + std::to_string(i);
    t.step_latency = config.step_latency_min + task_rng.uniform() * (config.step_latency_max - config.step_latency_min);
    Rng round_rng(Rng::mix(Rng::mix(config.seed, static_cast<std::uint64_t>(i)), static_cast<std::uint64_t>(round) + 1));
    const int span = config.steps_max - config.steps_min + 1;
    for (int r = 0; r < config.rollouts; ++r) {
      t.rollout_steps.push_back(config.steps_min + static_cast<int>(round_rng.below(span)));
    }
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

class StubBackend : public SimBackend {
 public:
  explicit StubBackend(const ScenarioConfig& config) : config_(config) {
    auto p = std::make_shared<PolicyParams>();
    snapshots_.push_back(p);
  }

  std::optional<GroupSpec> next_group(double) override {
    if (round_ >= config_.rounds) return std::nullopt;
    if (table_.empty()) table_ = scenario_tasks(config_, round_);
    const auto& t = table_[static_cast<std::size_t>(index_)];
    GroupSpec g;
    g.task_id = t.task_id;
    g.group_id = t.task_id + "#" + std::to_string(round_);
    g.rollouts = static_cast<int>(t.rollout_steps.size());
    groups_[g.group_id] = Pending{t, 0};
    if (++index_ == static_cast<int>(table_.size())) {
      index_ = 0;
      ++round_;
      table_.clear();
    }
    return g;
  }

  void begin_rollout(const RolloutRequest& request, double) override {
    const auto& p = groups_.at(request.group_id);
    Running r;
    r.group_id = request.group_id;
    r.remaining = p.task.rollout_steps.at(static_cast<std::size_t>(request.ordinal));
    r.latency = p.task.step_latency;
    running_[request.env_id] = r;
  }

  StepOutcome step(int env_id, int, const PolicyParams&, double) override {
    auto& r = running_.at(env_id);
    if (r.remaining <= 0) throw std::logic_error("stub rollout stepped past its end");
    --r.remaining;
    return StepOutcome{r.latency, r.remaining == 0};
  }

  std::optional<TrainJob> finish_rollout(int env_id, double) override {
    const auto r = running_.at(env_id);
    running_.erase(env_id);
    auto& p = groups_.at(r.group_id);
    ++p.done;
    if (p.done < static_cast<int>(p.task.rollout_steps.size())) return std::nullopt;
    std::int64_t actions = 0;
    for (int s : p.task.rollout_steps) actions += s;
    groups_.erase(r.group_id);
    return TrainJob{r.group_id, actions};
  }

  double train_duration(const TrainJob& job) override {
    return config_.train_latency_base + config_.train_latency_per_action * static_cast<double>(job.actions);
  }

  Snapshot train(const TrainJob&, double) override {
    auto p = std::make_shared<PolicyParams>();
    p->version = snapshots_.size();
    snapshots_.push_back(p);
    return p;
  }

  Snapshot sync_target(ModelVersion latest) override { return snapshots_.at(latest); }
  Snapshot initial_snapshot() override { return snapshots_.front(); }

 private:
  struct Pending {
    StubTask task;
    int done = 0;
  };
  struct Running {
    std::string group_id;
    int remaining = 0;
    double latency = 0.0;
  };

  const ScenarioConfig& config_;
  std::vector<StubTask> table_;
  int round_ = 0;
  int index_ = 0;
  std::map<std::string, Pending> groups_;
  std::map<int, Running> running_;
  std::vector<Snapshot> snapshots_;
};

std::vector<StubTask> parse_task_table(const std::string& text) {
  std::vector<StubTask> out;
  std::stringstream entries(text);
  std::string entry;
  while (std::getline(entries, entry, ';')) {
    if (entry.find_first_not_of(" \t") == std::string::npos) continue;
    std::stringstream fields(entry);
    std::string id, latency, steps;
    if (!std::getline(fields, id, ':') || !std::getline(fields, latency, ':') || !std::getline(fields, steps)) {
      throw std::invalid_argument("task_table entry '" + entry + "' is not id:latency:steps");
    }
    StubTask t;
    t.task_id = id.substr(id.find_first_not_of(" \t"));
    try {
      t.step_latency = std::stod(latency);
      std::stringstream ss(steps);
      std::string n;
      while (std::getline(ss, n, ',')) t.rollout_steps.push_back(std::stoi(n));
    } catch (const std::exception&) {
      throw std::invalid_argument("task_table entry '" + entry + "' has a bad number");
    }
    out.push_back(std::move(t));
  }
  if (out.empty()) throw std::invalid_argument("task_table is empty");
  return out;
}

}  // namespace

TimelineReport simulate(const ScenarioConfig& config) {
  config.validate();
  StubBackend backend(config);
  Simulator sim(config.engine, backend);
  return sim.run();
}

std::set<std::string> scenario_keys() {
  return {"sampling",       "sync",          "coupled",          "envs",      "workers",
          "slots",          "worker_capacity", "inference_latency", "sync_latency", "training",
          "max_train_iterations", "max_time", "record_trace",     "seed",      "tasks",
          "rollouts",       "rounds",        "steps_min",        "steps_max", "step_latency_min",
          "step_latency_max", "train_latency_base", "train_latency_per_action", "task_table"};
}

ScenarioConfig scenario_from_key_values(const KeyValues& kv, ScenarioConfig base) {
  ConfigReader r(kv);
  ScenarioConfig c = std::move(base);
  auto& e = c.engine;
  e.sampling = sampling_mode_from_string(r.get_string("sampling", to_string(e.sampling)));
  e.sync = sync_mode_from_string(r.get_string("sync", to_string(e.sync)));
  e.coupled = r.get_bool("coupled", e.coupled);
  e.envs = static_cast<int>(r.get_int("envs", e.envs));
  e.workers = static_cast<int>(r.get_int("workers", e.workers));
  e.slots = static_cast<int>(r.get_int("slots", e.slots));
  e.worker_capacity = static_cast<int>(r.get_int("worker_capacity", e.worker_capacity));
  e.inference_latency = r.get_double("inference_latency", e.inference_latency);
  e.sync_latency = r.get_double("sync_latency", e.sync_latency);
  e.training = r.get_bool("training", e.training);
  e.max_train_iterations = r.get_int("max_train_iterations", e.max_train_iterations);
  e.max_time = r.get_double("max_time", e.max_time);
  e.record_trace = r.get_bool("record_trace", e.record_trace);
  c.seed = r.get_uint("seed", c.seed);
  c.task_count = static_cast<int>(r.get_int("tasks", c.task_count));
  c.rollouts = static_cast<int>(r.get_int("rollouts", c.rollouts));
  c.rounds = static_cast<int>(r.get_int("rounds", c.rounds));
  c.steps_min = static_cast<int>(r.get_int("steps_min", c.steps_min));
  c.steps_max = static_cast<int>(r.get_int("steps_max", c.steps_max));
  c.step_latency_min = r.get_double("step_latency_min", c.step_latency_min);
  c.step_latency_max = r.get_double("step_latency_max", c.step_latency_max);
  c.train_latency_base = r.get_double("train_latency_base", c.train_latency_base);
  c.train_latency_per_action = r.get_double("train_latency_per_action", c.train_latency_per_action);
  if (r.has("task_table")) c.tasks = parse_task_table(r.get_string("task_table", ""));
  r.reject_unknown();
  c.validate();
  return c;
}

ScenarioConfig reference_scenario(std::uint64_t seed) {
  ScenarioConfig c;
  c.seed = seed;
  c.engine.envs = 180;
  c.engine.workers = 4;
  c.engine.worker_capacity = 64;
  c.engine.slots = 22;  // 22 tasks x 8 rollouts fill 176 of the 180 envs per batch
  c.engine.inference_latency = 1.0;
  c.engine.sync_latency = 2.0;
  c.engine.max_time = 3000.0;
  c.engine.record_trace = false;
  c.task_count = 44;
  c.rollouts = 8;
  c.rounds = 1000;  // never exhausted within max_time
  c.train_latency_base = 0.0;
  c.train_latency_per_action = 0.05;
  return c;
}

ScenarioConfig coupled_variant(ScenarioConfig c) {
  c.engine.sampling = SamplingMode::batch;
  c.engine.sync = SyncMode::all_worker;
  c.engine.coupled = true;
  return c;
}

ScenarioConfig decoupled_variant(ScenarioConfig c) {
  c.engine.sampling = SamplingMode::rollout;
  c.engine.sync = SyncMode::per_worker;
  c.engine.coupled = false;
  return c;
}

ScenarioConfig sync_scenario(std::uint64_t seed) {
  ScenarioConfig c;
  c.seed = seed;
  c.engine.envs = 80;
  c.engine.workers = 4;
  c.engine.worker_capacity = 32;
  c.engine.sampling = SamplingMode::rollout;
  c.engine.sync_latency = 5.0;
  c.engine.max_time = 2000.0;
  c.task_count = 10;
  c.rollouts = 8;
  c.rounds = 100;
  // A fixed 40-unit update period outlasts a full per-worker sync round (4 x 5 plus drain).
  c.train_latency_base = 40.0;
  c.train_latency_per_action = 0.0;
  return c;
}

ScenarioConfig ordering_scenario(std::uint64_t seed, int index) {
  Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(index)));
  const int slots = 2 + rng.below(3);
  const int rollouts = 2 + rng.below(5);
  const int groups_per_slot = 4 + rng.below(3);
  ScenarioConfig c;
  c.seed = Rng::mix(seed ^ 0x0dde5u, static_cast<std::uint64_t>(index));
  c.engine.envs = slots * rollouts;
  c.engine.slots = slots;
  c.engine.workers = 2;
  c.engine.worker_capacity = 64;
  c.engine.training = false;
  c.engine.record_trace = false;
  c.task_count = slots * groups_per_slot;
  c.rollouts = rollouts;
  // Fixed horizon with an endless supply, so the end-of-run drain cannot mask the difference.
  c.rounds = 1000;
  c.engine.max_time = 1500.0;
  return c;
}

}  // namespace dart
