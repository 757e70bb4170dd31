#include "dart/rollout_service.hpp"

#include <algorithm>
#include <iostream>
#include <stdexcept>

namespace dart {

std::optional<int> dispatch(std::span<const Worker> workers) {
  std::optional<int> best;
  for (const auto& w : workers) {
    if (w.status != WorkerStatus::serving) continue;
    if (!best || w.in_flight < workers[static_cast<std::size_t>(*best)].in_flight) best = w.worker_id;
  }
  return best;
}

RolloutService::RolloutService(int workers, Snapshot initial) {
  if (workers <= 0) throw std::invalid_argument("rollout service needs at least one worker");
  if (!initial) throw std::invalid_argument("rollout service needs an initial snapshot");
  for (int i = 0; i < workers; ++i) {
    Worker w;
    w.worker_id = i;
    w.snapshot = initial;
    workers_.push_back(std::move(w));
  }
}

std::optional<int> RolloutService::submit(std::uint64_t ticket) {
  const auto chosen = dispatch(workers_);
  if (!chosen) {
    pending_.push_back(ticket);
    return std::nullopt;
  }
  ++workers_[static_cast<std::size_t>(*chosen)].in_flight;
  return chosen;
}

bool RolloutService::complete(int worker_id) {
  auto& w = worker(worker_id);
  if (w.in_flight <= 0) throw std::logic_error("worker " + std::to_string(worker_id) + " has nothing in flight");
  --w.in_flight;
  return w.status == WorkerStatus::syncing && w.in_flight == 0;
}

SyncAck RolloutService::sync_worker(int worker_id, Snapshot params) {
  auto& w = worker(worker_id);
  const ModelVersion current = w.incoming ? w.incoming->version : w.version();
  if (!params || params->version <= current) {
    ++ignored_syncs_;
    std::clog << "[rollout] worker " << worker_id << ": ignoring sync to version "
              << (params ? params->version : 0) << " (at " << current << ")\n";
    return SyncAck{false, current, current};
  }
  w.status = WorkerStatus::syncing;
  w.incoming = std::move(params);
  return SyncAck{true, w.version(), w.incoming->version};
}

bool RolloutService::drained(int worker_id) const {
  const auto& w = worker(worker_id);
  return w.status == WorkerStatus::syncing && w.in_flight == 0;
}

std::vector<std::pair<std::uint64_t, int>> RolloutService::finish_sync(int worker_id) {
  auto& w = worker(worker_id);
  if (!drained(worker_id)) throw std::logic_error("worker " + std::to_string(worker_id) + " is not drained");
  w.snapshot = std::move(w.incoming);
  w.incoming.reset();
  w.status = WorkerStatus::serving;
  std::vector<std::pair<std::uint64_t, int>> assigned;
  while (!pending_.empty()) {
    const auto chosen = dispatch(workers_);
    if (!chosen) break;
    ++workers_[static_cast<std::size_t>(*chosen)].in_flight;
    assigned.emplace_back(pending_.front(), *chosen);
    pending_.pop_front();
  }
  return assigned;
}

int RolloutService::serving_count() const {
  return static_cast<int>(std::count_if(workers_.begin(), workers_.end(),
                                        [](const Worker& w) { return w.status == WorkerStatus::serving; }));
}

int RolloutService::syncing_count() const { return size() - serving_count(); }

std::string to_string(SyncMode mode) { return mode == SyncMode::all_worker ? "all" : "per-worker"; }

std::string to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::batch: return "batch";
    case SamplingMode::task: return "task";
    case SamplingMode::rollout: return "rollout";
  }
  return "rollout";
}

SyncMode sync_mode_from_string(const std::string& s) {
  if (s == "all" || s == "all_worker" || s == "all-worker") return SyncMode::all_worker;
  if (s == "per-worker" || s == "per_worker") return SyncMode::per_worker;
  throw std::invalid_argument("unknown sync mode '" + s + "'");
}

SamplingMode sampling_mode_from_string(const std::string& s) {
  if (s == "batch") return SamplingMode::batch;
  if (s == "task") return SamplingMode::task;
  if (s == "rollout") return SamplingMode::rollout;
  throw std::invalid_argument("unknown sampling mode '" + s + "'");
}

std::vector<int> plan_sync(const RolloutService& service, ModelVersion latest, SyncMode mode) {
  if (service.syncing_count() > 0) return {};
  std::vector<int> out;
  for (const auto& w : service.workers()) {
    if (w.version() < latest) {
      out.push_back(w.worker_id);
      if (mode == SyncMode::per_worker) break;
    }
  }
  return out;
}

RolloutScheduler::RolloutScheduler(SamplingMode mode, int envs, int slots, GroupSource source)
    : mode_(mode), envs_(envs), slots_(mode == SamplingMode::rollout ? 1 : slots), source_(std::move(source)) {
  if (envs_ <= 0) throw std::invalid_argument("scheduler needs at least one env");
  if (slots_ <= 0 || slots_ > envs_) throw std::invalid_argument("slots must be in [1, envs]");
  slot_groups_.resize(static_cast<std::size_t>(slots_));
}

int RolloutScheduler::slot_of(int env_id) const {
  return static_cast<int>(static_cast<long long>(env_id) * slots_ / envs_);
}

bool RolloutScheduler::pull(GroupSpec& out) {
  if (source_done_) return false;
  auto next = source_();
  if (!next) {
    source_done_ = true;
    return false;
  }
  if (next->rollouts < 1) throw std::invalid_argument("group " + next->group_id + " has no rollouts");
  out = std::move(*next);
  return true;
}

std::optional<RolloutRequest> RolloutScheduler::issue(ActiveGroup& g, int env_id, double now) {
  RolloutRequest r;
  r.task_id = g.spec.task_id;
  r.group_id = g.spec.group_id;
  r.ordinal = g.issued++;
  r.env_id = env_id;
  r.max_steps = g.spec.max_steps;
  r.issued_at = now;
  return r;
}

std::optional<RolloutRequest> RolloutScheduler::next_unit(int env_id, double now) {
  if (env_id < 0 || env_id >= envs_) throw std::out_of_range("unknown env");
  if (mode_ == SamplingMode::rollout) {
    if (queue_.empty()) {
      GroupSpec spec;
      if (!pull(spec)) return std::nullopt;
      queue_.push_back(ActiveGroup{std::move(spec), 0, 0, true});
    }
    auto& front = queue_.front();
    auto req = issue(front, env_id, now);
    if (front.issued == front.spec.rollouts) {
      running_.push_back(std::move(front));
      queue_.pop_front();
    }
    return req;
  }

  auto& slot = slot_groups_[static_cast<std::size_t>(slot_of(env_id))];
  if (slot.active && slot.issued < slot.spec.rollouts) return issue(slot, env_id, now);

  if (mode_ == SamplingMode::task) {
    if (slot.active) return std::nullopt;  // waiting for the rest of this task
    GroupSpec spec;
    if (!pull(spec)) return std::nullopt;
    slot = ActiveGroup{std::move(spec), 0, 0, true};
    return issue(slot, env_id, now);
  }

  // Batch mode: a new batch starts only when every slot has finished.
  if (batch_in_progress() || !gate_open_) return std::nullopt;
  bool any = false;
  for (auto& g : slot_groups_) {
    GroupSpec spec;
    if (!pull(spec)) break;
    g = ActiveGroup{std::move(spec), 0, 0, true};
    any = true;
  }
  if (!any) return std::nullopt;
  ++batches_started_;
  if (slot.active && slot.issued < slot.spec.rollouts) return issue(slot, env_id, now);
  return std::nullopt;
}

void RolloutScheduler::on_rollout_done(const std::string& group_id) {
  auto finish = [&](ActiveGroup& g) {
    ++g.completed;
    if (g.completed > g.spec.rollouts) throw std::logic_error("group " + group_id + " over-completed");
    return g.completed == g.spec.rollouts && g.issued == g.spec.rollouts;
  };
  if (mode_ == SamplingMode::rollout) {
    for (auto it = running_.begin(); it != running_.end(); ++it) {
      if (it->spec.group_id == group_id) {
        if (finish(*it)) running_.erase(it);
        return;
      }
    }
    for (auto& g : queue_) {
      if (g.spec.group_id == group_id) {
        finish(g);
        return;
      }
    }
  } else {
    for (auto& g : slot_groups_) {
      if (g.active && g.spec.group_id == group_id) {
        if (finish(g)) g.active = false;
        return;
      }
    }
  }
  throw std::logic_error("completion for unknown group " + group_id);
}

bool RolloutScheduler::batch_in_progress() const {
  return std::any_of(slot_groups_.begin(), slot_groups_.end(), [](const ActiveGroup& g) { return g.active; });
}

bool RolloutScheduler::finished() const {
  return source_done_ && queue_.empty() && running_.empty() && !batch_in_progress();
}

RolloutCursor::RolloutCursor(const Task& task, RolloutRequest request, EnvInstance& env,
                             const Featurizer& featurizer, RolloutOptions options, std::uint64_t seed)
    : request_(std::move(request)),
      env_(&env),
      featurizer_(&featurizer),
      options_(options),
      rng_(Rng::mix(seed, 0x5a3b1e)),
      task_tokens_(featurizer.task_tokens(task.task_id)) {
  Task bound = task;
  bound.max_steps_cap = std::min(task.max_steps_cap, request_.max_steps);
  state_ = env.reset(bound, seed).state;
}

double RolloutCursor::advance(const PolicyParams& snapshot) {
  if (env_->done()) throw std::logic_error("rollout already done");
  Context ctx{task_tokens_, history_, state_};
  std::vector<int> forced;
  if (options_.oracle_actions) forced = env_->expected_action();
  const auto sampled = sample_step(snapshot, *featurizer_, ctx, rng_, options_.thought_len, options_.action_len, forced);

  StepRecord rec;
  rec.task_id = request_.task_id;
  rec.trajectory_id = request_.trajectory_id();
  rec.step_index = static_cast<int>(steps_.size());
  rec.history = history_;
  rec.state = state_;
  const auto split = sampled.tokens.begin() + options_.thought_len;
  rec.thought.assign(sampled.tokens.begin(), split);
  rec.action.assign(split, sampled.tokens.end());
  rec.rollout_logprob = sampled.total_logprob();
  rec.token_entropies = sampled.entropies;
  rec.model_version = snapshot.version;

  const auto obs = env_->step(rec.action);
  history_.push_back(HistoryEntry{state_, rec.thought, rec.action});
  if (history_.size() > static_cast<std::size_t>(options_.history_window)) history_.erase(history_.begin());
  state_ = obs.state;
  steps_.push_back(std::move(rec));
  return env_->last_step_latency();
}

Trajectory RolloutCursor::finish(double wall_time) {
  Trajectory t;
  t.trajectory_id = request_.trajectory_id();
  t.task_id = request_.task_id;
  t.reward = env_->evaluate();
  t.terminal_reason = env_->terminal_reason();
  t.source = TrajectorySource::online;
  t.wall_time = wall_time;
  t.model_version = steps_.empty() ? 0 : steps_.front().model_version;
  for (const auto& s : steps_) t.model_version = std::min(t.model_version, s.model_version);
  t.steps = std::move(steps_);
  steps_.clear();
  env_->release();
  return t;
}

Trajectory run_rollout(const Task& task, const RolloutRequest& request, EnvInstance& env, const Worker& worker,
                       const Featurizer& featurizer, const RolloutOptions& options, std::uint64_t seed) {
  if (worker.status != WorkerStatus::serving) throw std::logic_error("worker is not serving");
  if (env.status() != EnvStatus::idle) throw std::logic_error("env is busy");
  RolloutCursor cursor(task, request, env, featurizer, options, seed);
  double elapsed = 0.0;
  while (!cursor.done()) elapsed += cursor.advance(*worker.snapshot);
  return cursor.finish(elapsed);
}

}  // namespace dart
