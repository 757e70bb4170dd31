#include "dart/live.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "dart/jsonl.hpp"

namespace dart {

namespace {

using Clock = std::chrono::steady_clock;

class LiveRunner {
 public:
  LiveRunner(const RunConfig& config, const std::filesystem::path& out, const LiveOptions& options,
             DataManager& dm, const Featurizer& featurizer, Trainer& trainer, std::vector<Task> suite,
             LiveResult& result)
      : config_(config),
        out_(out),
        options_(options),
        dm_(dm),
        featurizer_(featurizer),
        trainer_(trainer),
        suite_(std::move(suite)),
        result_(result),
        service_(config.workers, std::make_shared<const PolicyParams>(trainer.params())),
        scheduler_(SamplingMode::rollout, config.envs, 1, [this] { return next_group(); }),
        latest_(std::make_shared<const PolicyParams>(trainer.params())),
        metrics_(out / "metrics.jsonl"),
        start_(Clock::now()) {}

  void run() {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(config_.envs) + 2);
    threads.emplace_back([this] { trainer_loop(); });
    threads.emplace_back([this] { sync_loop(); });
    for (int e = 0; e < config_.envs; ++e) threads.emplace_back([this, e] { env_loop(e); });
    for (auto& t : threads) t.join();
    result_.wall_seconds = elapsed();
  }

 private:
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }
  double now_units() const { return elapsed() / options_.seconds_per_unit; }

  void sleep_units(double units) const {
    if (units > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(units * options_.seconds_per_unit));
  }

  bool timed_out() {
    if (options_.max_wall_seconds > 0.0 && elapsed() > options_.max_wall_seconds) {
      result_.timed_out = true;
      return true;
    }
    return false;
  }

  // Called with mu_ held, from the scheduler.
  std::optional<GroupSpec> next_group() {
    if (stop_) return std::nullopt;
    if (config_.rollouts_per_iteration_cap > 0 &&
        issued_rollouts_ >= config_.rollouts_per_iteration_cap * config_.budget) {
      return std::nullopt;
    }
    const auto& task = suite_[next_task_ % suite_.size()];
    ++next_task_;
    const auto stats = dm_.stats(task.task_id);
    GroupSpec g;
    g.task_id = task.task_id;
    g.group_id = "live/" + task.task_id + "#" + std::to_string(rounds_[task.task_id]++);
    g.rollouts = stats.rollout_count;
    g.max_steps = stats.max_steps_cap;
    dm_.open_group(g.group_id, g.task_id, g.rollouts);
    issued_rollouts_ += g.rollouts;
    return g;
  }

  void env_loop(int env_id) {
    EnvInstance env(env_id, config_.env);
    const std::uint64_t ticket_base = static_cast<std::uint64_t>(env_id) << 32;
    std::uint64_t local = 0;
    for (;;) {
      std::optional<RolloutRequest> req;
      {
        std::unique_lock lock(mu_);
        for (;;) {
          if (stop_ || timed_out()) {
            stop_ = true;
            cv_.notify_all();
            return;
          }
          req = scheduler_.next_unit(env_id, now_units());
          if (req) break;
          if (scheduler_.finished()) {
            stop_ = true;
            cv_.notify_all();
            return;
          }
          cv_.wait_for(lock, std::chrono::milliseconds(5));
        }
      }
      const Task task = dm_.task(req->task_id);
      const double started = now_units();
      RolloutCursor cursor(task, *req, env, featurizer_, config_.rollout,
                           Rng::mix(config_.seed, stable_hash(req->trajectory_id())));
      while (!cursor.done()) {
        const std::uint64_t ticket = ticket_base | local++;
        int worker_id = -1;
        Snapshot snap;
        {
          std::unique_lock lock(mu_);
          if (auto w = service_.submit(ticket)) {
            worker_id = *w;
          } else {
            cv_.wait(lock, [&] { return stop_ || assigned_.contains(ticket); });
            if (!assigned_.contains(ticket)) return;  // stopped while every worker was syncing
            worker_id = assigned_.at(ticket);
            assigned_.erase(ticket);
          }
          snap = service_.worker(worker_id).snapshot;
          const ModelVersion lag = latest_->version - snap->version;
          if (lag > result_.max_staleness) result_.max_staleness = lag;
        }
        if (cursor.steps() == 0) dm_.record_request(req->trajectory_id(), env_id, worker_id);
        sleep_units(config_.inference_latency);
        const double latency = cursor.advance(*snap);
        {
          std::lock_guard lock(mu_);
          service_.complete(worker_id);
        }
        cv_.notify_all();
        sleep_units(latency);
      }
      deliver(cursor.finish(now_units() - started), req->group_id);
    }
  }

  // Serialized ingress: store and assembly run as one unit so exactly one
  // delivery sees its group complete.
  void deliver(const Trajectory& trajectory, const std::string& group_id) {
    AssembledGroup assembled;
    {
      std::lock_guard ingress(ingress_mu_);
      dm_.set_clock(now_units());
      dm_.store_trajectory(trajectory, group_id);
      assembled = dm_.assemble_group(group_id);
    }
    std::lock_guard lock(mu_);
    ++result_.trajectories;
    scheduler_.on_rollout_done(group_id);
    if (assembled.status == GroupStatus::not_ready) return;
    if (assembled.injected) ++result_.pool_injections;
    if (assembled.status == GroupStatus::trainable) train_queue_.push_back(std::move(assembled));
    cv_.notify_all();
  }

  void trainer_loop() {
    for (;;) {
      AssembledGroup group;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stop_ || !train_queue_.empty(); });
        if (stop_) return;
        group = std::move(train_queue_.front());
        train_queue_.pop_front();
      }
      TrainResult res;
      try {
        res = trainer_.train_iteration(group.steps);
      } catch (const std::exception&) {
        res.applied = false;
        result_.diverged = true;
      }
      if (!res.applied) {
        if (result_.diverged) halt();
        continue;
      }
      if (!res.params.theta.allFinite()) {
        result_.diverged = true;
        halt();
        return;
      }
      std::int64_t actions = 0;
      for (const auto& s : group.steps.step_records) actions += static_cast<std::int64_t>(!s.action.empty());
      sleep_units(config_.train_latency_base + config_.train_latency_per_action * static_cast<double>(actions));
      commit(group, res);
    }
  }

  void commit(const AssembledGroup& group, TrainResult& res) {
    const auto& params = trainer_.params();
    const ModelVersion version = params.version;
    dm_.set_clock(now_units());
    for (const auto& t : group.trajectories) dm_.record_usage_event(t.trajectory_id, "training_consumption", version);
    save_checkpoint(out_ / "latest", params, featurizer_.seed());
    std::string ckpt;
    if (trainer_.iteration() % config_.checkpoint_every == 0) {
      const auto stem = out_ / "checkpoints" / ("v" + std::to_string(version));
      save_checkpoint(stem, params, featurizer_.seed());
      ckpt = stem.string();
    }
    dm_.record_model(version, version - 1, ckpt, trainer_.iteration());
    res.metrics.time = now_units();
    Json row = to_json(res.metrics);
    row["group_id"] = group.group_id;
    row["task_id"] = group.task_id;
    row["injected"] = group.injected.has_value();
    dm_.record_update(row);
    metrics_.append(row);

    std::lock_guard lock(mu_);
    latest_ = std::make_shared<const PolicyParams>(params);  // immutable snapshot publish
    result_.iterations = trainer_.iteration();
    if (trainer_.iteration() >= config_.budget) stop_ = true;
    cv_.notify_all();
  }

  void halt() {
    std::lock_guard lock(mu_);
    stop_ = true;
    cv_.notify_all();
  }

  void sync_loop() {
    std::unique_lock lock(mu_);
    for (;;) {
      std::vector<int> plan;
      cv_.wait(lock, [&] {
        if (stop_) return true;
        plan = plan_sync(service_, latest_->version, config_.sync);
        return !plan.empty();
      });
      if (stop_) return;
      const Snapshot target = latest_;
      for (int w : plan) service_.sync_worker(w, target);
      // Requests in flight finish on the old snapshot; the sync waits for the drain.
      cv_.wait(lock, [&] {
        if (stop_) return true;
        for (int w : plan) {
          if (!service_.drained(w)) return false;
        }
        return true;
      });
      lock.unlock();
      sleep_units(config_.sync_latency);
      lock.lock();
      for (int w : plan) {
        for (const auto& [ticket, worker] : service_.finish_sync(w)) assigned_[ticket] = worker;
        ++result_.syncs;
        dm_.record_worker_event(w, service_.worker(w).version(), "synced");
      }
      cv_.notify_all();
      if (stop_) return;
    }
  }

  const RunConfig& config_;
  std::filesystem::path out_;
  LiveOptions options_;
  DataManager& dm_;
  const Featurizer& featurizer_;
  Trainer& trainer_;
  std::vector<Task> suite_;
  LiveResult& result_;

  std::mutex mu_;
  std::mutex ingress_mu_;
  std::condition_variable cv_;
  RolloutService service_;
  RolloutScheduler scheduler_;
  Snapshot latest_;
  std::deque<AssembledGroup> train_queue_;
  std::map<std::uint64_t, int> assigned_;
  std::map<std::string, int> rounds_;
  std::size_t next_task_ = 0;
  std::int64_t issued_rollouts_ = 0;
  bool stop_ = false;
  JsonlAppender metrics_;
  Clock::time_point start_;
};

}  // namespace

LiveResult run_live(const RunConfig& config, const std::filesystem::path& out, const LiveOptions& options) {
  config.validate();
  if (!(options.seconds_per_unit >= 0.0)) throw std::invalid_argument("seconds_per_unit must be >= 0");
  namespace fs = std::filesystem;
  for (const char* sub : {"store", "checkpoints", "metrics.jsonl", "latest.bin", "latest.json"}) fs::remove_all(out / sub);
  fs::create_directories(out / "checkpoints");

  LiveResult result;
  const Featurizer featurizer(config.features, config.env.vocab, config.rollout.history_window,
                              Rng::mix(config.seed, 0xfea));
  const PolicyParams initial = PolicyParams::zeros(config.features, config.env.vocab, config.temperature);
  DataManager dm(out / "store", config.curation, config.seed);
  const auto suite = make_suite(config);
  for (const auto& t : suite) dm.register_task(t);
  prepopulate_pool(config, dm, featurizer, initial, suite);
  Trainer trainer(config.trainer, featurizer, initial);

  const std::uint64_t eval_seed = Rng::mix(config.seed, 0xe7a1);
  result.initial_success =
      evaluate_policy(initial, featurizer, suite, config.env, config.rollout, config.eval_episodes, eval_seed);
  if (config.budget > 0) {
    LiveRunner runner(config, out, options, dm, featurizer, trainer, suite, result);
    runner.run();
  }
  const auto& params = trainer.params();
  result.iterations = trainer.iteration();
  result.final_success = params.theta.allFinite()
                             ? evaluate_policy(params, featurizer, suite, config.env, config.rollout,
                                               config.eval_episodes, eval_seed)
                             : 0.0;
  return result;
}

}  // namespace dart
