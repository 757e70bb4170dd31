#include "dart/system.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "dart/jsonl.hpp"

namespace dart {

void RunConfig::validate() const {
  if (envs <= 0) throw std::invalid_argument("envs must be positive");
  if (workers <= 0) throw std::invalid_argument("workers must be positive");
  if (worker_capacity <= 0) throw std::invalid_argument("worker_capacity must be positive");
  if (suite.tasks <= 0) throw std::invalid_argument("suite_tasks must be positive");
  if (suite.difficulty_min < 1 || suite.difficulty_max < suite.difficulty_min) {
    throw std::invalid_argument("need 1 <= difficulty_min <= difficulty_max");
  }
  if (!(suite.latency_min >= 0.0) || suite.latency_max < suite.latency_min) {
    throw std::invalid_argument("need 0 <= latency_min <= latency_max");
  }
  if (env.vocab < 2 || env.action_len < 1 || env.cue_repeat < 1 || env.decoys < 0) {
    throw std::invalid_argument("invalid env shape");
  }
  if (env.decoys + env.action_len > env.vocab) throw std::invalid_argument("decoys do not fit the vocabulary");
  if (!(env.failure_prob >= 0.0 && env.failure_prob < 1.0)) throw std::invalid_argument("failure_prob must be in [0,1)");
  if (rollout.action_len != env.action_len) throw std::invalid_argument("rollout and env action_len differ");
  if (rollout.thought_len < 0) throw std::invalid_argument("thought_len must be >= 0");
  if (features < 1) throw std::invalid_argument("features must be positive");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (pool_per_task < 0 || pool_attempts < 0) throw std::invalid_argument("pool_per_task and pool_attempts must be >= 0");
  if (budget < 0) throw std::invalid_argument("budget must be >= 0");
  if (rollouts_per_iteration_cap < 0) throw std::invalid_argument("rollouts_per_iteration_cap must be >= 0");
  if (forced_staleness < 0) throw std::invalid_argument("forced_staleness must be >= 0");
  if (checkpoint_every < 1 || eval_every < 1 || eval_episodes < 1) {
    throw std::invalid_argument("checkpoint_every, eval_every and eval_episodes must be positive");
  }
  if (curation.global_max_steps != env.global_max_steps) {
    throw std::invalid_argument("curation and env global_max_steps differ");
  }
  trainer.validate();
  EngineConfig e;
  e.sampling = sampling;
  e.sync = sync;
  e.coupled = coupled;
  e.envs = envs;
  e.workers = workers;
  e.slots = slots;
  e.worker_capacity = worker_capacity;
  e.inference_latency = inference_latency;
  e.sync_latency = sync_latency;
  e.validate();
}

std::set<std::string> run_config_keys() {
  return {"seed",           "envs",           "workers",         "worker_capacity",
          "suite_tasks",    "difficulty_min", "difficulty_max",  "latency_min",
          "latency_max",    "vocab",          "action_len",      "thought_len",
          "history_window", "cue_repeat",     "decoys",          "global_max_steps",
          "failure_prob",   "latency_jitter", "features",        "temperature",
          "learning_rate",  "beta_kl",        "eps_low",         "eps_high",
          "is_cap",         "entropy_keep_quantile", "use_is_weight", "use_entropy_gate",
          "ema_decay",      "max_rollouts",   "min_rollouts",    "rollout_table",
          "length_margin",  "dynamic_rollouts", "dynamic_length", "use_pool",
          "pool_per_task",  "pool_attempts",  "pool_tasks",     "budget",          "sampling",
          "sync",           "coupled",        "slots",           "inference_latency",
          "sync_latency",   "train_latency_base", "train_latency_per_action", "forced_staleness",
          "checkpoint_every", "eval_every",   "eval_episodes",   "record_trace",
          "rollouts_per_iteration_cap"};
}

namespace {

std::vector<RolloutTier> parse_rollout_table(const std::string& text) {
  // "0.6:6,0.7:5,0.8:4,0.9:2"
  std::vector<RolloutTier> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("rollout_table entry '" + item + "' is not ema:n");
    try {
      out.push_back(RolloutTier{std::stod(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw std::invalid_argument("rollout_table entry '" + item + "' has a bad number");
    }
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].min_ema <= out[i - 1].min_ema) throw std::invalid_argument("rollout_table thresholds must increase");
  }
  return out;
}

}  // namespace

RunConfig run_config_from_key_values(const KeyValues& kv) {
  ConfigReader r(kv);
  RunConfig c;
  c.seed = r.get_uint("seed", c.seed);
  c.envs = static_cast<int>(r.get_int("envs", c.envs));
  c.workers = static_cast<int>(r.get_int("workers", c.workers));
  c.worker_capacity = static_cast<int>(r.get_int("worker_capacity", c.worker_capacity));
  c.suite.tasks = static_cast<int>(r.get_int("suite_tasks", c.suite.tasks));
  c.suite.difficulty_min = static_cast<int>(r.get_int("difficulty_min", c.suite.difficulty_min));
  c.suite.difficulty_max = static_cast<int>(r.get_int("difficulty_max", c.suite.difficulty_max));
  c.suite.latency_min = r.get_double("latency_min", c.suite.latency_min);
  c.suite.latency_max = r.get_double("latency_max", c.suite.latency_max);
  c.env.vocab = static_cast<int>(r.get_int("vocab", c.env.vocab));
  c.env.action_len = static_cast<int>(r.get_int("action_len", c.env.action_len));
  c.rollout.action_len = c.env.action_len;
  c.rollout.thought_len = static_cast<int>(r.get_int("thought_len", c.rollout.thought_len));
  c.rollout.history_window = static_cast<int>(r.get_int("history_window", c.rollout.history_window));
  c.env.cue_repeat = static_cast<int>(r.get_int("cue_repeat", c.env.cue_repeat));
  c.env.decoys = static_cast<int>(r.get_int("decoys", c.env.decoys));
  c.env.global_max_steps = static_cast<int>(r.get_int("global_max_steps", c.env.global_max_steps));
  c.curation.global_max_steps = c.env.global_max_steps;
  c.env.failure_prob = r.get_double("failure_prob", c.env.failure_prob);
  c.env.latency_jitter = r.get_double("latency_jitter", c.env.latency_jitter);
  c.features = static_cast<int>(r.get_int("features", c.features));
  c.temperature = r.get_double("temperature", c.temperature);
  c.trainer.learning_rate = r.get_double("learning_rate", c.trainer.learning_rate);
  c.trainer.beta_kl = r.get_double("beta_kl", c.trainer.beta_kl);
  c.trainer.eps_low = r.get_double("eps_low", c.trainer.eps_low);
  c.trainer.eps_high = r.get_double("eps_high", c.trainer.eps_high);
  c.trainer.is_cap = r.get_double("is_cap", c.trainer.is_cap);
  c.trainer.entropy_keep_quantile = r.get_double("entropy_keep_quantile", c.trainer.entropy_keep_quantile);
  c.trainer.use_is_weight = r.get_bool("use_is_weight", c.trainer.use_is_weight);
  c.trainer.use_entropy_gate = r.get_bool("use_entropy_gate", c.trainer.use_entropy_gate);
  c.curation.ema_decay = r.get_double("ema_decay", c.curation.ema_decay);
  c.curation.max_rollouts = static_cast<int>(r.get_int("max_rollouts", c.curation.max_rollouts));
  c.curation.min_rollouts = static_cast<int>(r.get_int("min_rollouts", c.curation.min_rollouts));
  if (r.has("rollout_table")) c.curation.rollout_table = parse_rollout_table(r.get_string("rollout_table", ""));
  c.curation.length_margin = static_cast<int>(r.get_int("length_margin", c.curation.length_margin));
  c.curation.dynamic_rollouts = r.get_bool("dynamic_rollouts", c.curation.dynamic_rollouts);
  c.curation.dynamic_length = r.get_bool("dynamic_length", c.curation.dynamic_length);
  c.curation.use_pool = r.get_bool("use_pool", c.curation.use_pool);
  c.pool_per_task = static_cast<int>(r.get_int("pool_per_task", c.pool_per_task));
  c.pool_attempts = static_cast<int>(r.get_int("pool_attempts", c.pool_attempts));
  if (r.has("pool_tasks")) {
    std::stringstream ss(r.get_string("pool_tasks", ""));
    std::string id;
    while (std::getline(ss, id, ',')) {
      if (!id.empty()) c.pool_tasks.insert(id);
    }
  }
  c.budget = r.get_int("budget", c.budget);
  c.sampling = sampling_mode_from_string(r.get_string("sampling", to_string(c.sampling)));
  c.sync = sync_mode_from_string(r.get_string("sync", to_string(c.sync)));
  c.coupled = r.get_bool("coupled", c.coupled);
  c.slots = static_cast<int>(r.get_int("slots", c.slots));
  c.inference_latency = r.get_double("inference_latency", c.inference_latency);
  c.sync_latency = r.get_double("sync_latency", c.sync_latency);
  c.train_latency_base = r.get_double("train_latency_base", c.train_latency_base);
  c.train_latency_per_action = r.get_double("train_latency_per_action", c.train_latency_per_action);
  c.forced_staleness = static_cast<int>(r.get_int("forced_staleness", c.forced_staleness));
  c.checkpoint_every = static_cast<int>(r.get_int("checkpoint_every", c.checkpoint_every));
  c.eval_every = static_cast<int>(r.get_int("eval_every", c.eval_every));
  c.eval_episodes = static_cast<int>(r.get_int("eval_episodes", c.eval_episodes));
  c.record_trace = r.get_bool("record_trace", c.record_trace);
  c.rollouts_per_iteration_cap =
      static_cast<int>(r.get_int("rollouts_per_iteration_cap", c.rollouts_per_iteration_cap));
  r.reject_unknown();
  c.validate();
  return c;
}

std::vector<Task> make_suite(const RunConfig& config) {
  Rng rng(Rng::mix(config.seed, 0x5017e));
  std::vector<Task> out;
  const int span = config.suite.difficulty_max - config.suite.difficulty_min + 1;
  for (int i = 0; i < config.suite.tasks; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "task_%02d", i);
    const int difficulty = config.suite.difficulty_min + rng.below(span);
    const double latency =
        config.suite.latency_min + rng.uniform() * (config.suite.latency_max - config.suite.latency_min);
    out.push_back(make_puzzle_task(id, difficulty, config.env.action_len, config.env.vocab, latency, rng));
  }
  return out;
}

double evaluate_policy(const PolicyParams& params, const Featurizer& featurizer, const std::vector<Task>& tasks,
                       const EnvConfig& env_config, const RolloutOptions& options, int episodes, std::uint64_t seed) {
  if (tasks.empty() || episodes <= 0) return 0.0;
  EnvConfig cfg = env_config;
  cfg.failure_prob = 0.0;
  EnvInstance env(-1, cfg);
  RolloutOptions opts = options;
  opts.oracle_actions = false;
  int successes = 0;
  for (const auto& task : tasks) {
    Task t = task;
    t.max_steps_cap = cfg.global_max_steps;
    for (int e = 0; e < episodes; ++e) {
      RolloutRequest req;
      req.task_id = t.task_id;
      req.group_id = "eval/" + t.task_id;
      req.ordinal = e;
      req.max_steps = cfg.global_max_steps;
      RolloutCursor cursor(t, req, env, featurizer, opts,
                           Rng::mix(seed, stable_hash(req.trajectory_id())));
      while (!cursor.done()) cursor.advance(params);
      successes += cursor.finish().reward >= 1.0 ? 1 : 0;
    }
  }
  return static_cast<double>(successes) / static_cast<double>(tasks.size() * static_cast<std::size_t>(episodes));
}

namespace {

class SystemBackend : public SimBackend {
 public:
  SystemBackend(const RunConfig& config, const std::filesystem::path& out, DataManager& dm,
                const Featurizer& featurizer, Trainer& trainer, std::vector<Task> suite, int epoch,
                RunResult& result)
      : config_(config),
        out_(out),
        dm_(dm),
        featurizer_(featurizer),
        trainer_(trainer),
        cluster_(config.envs, config.env),
        suite_(std::move(suite)),
        epoch_(epoch),
        result_(result),
        metrics_(out / "metrics.jsonl") {
    const auto& p = trainer_.params();
    history_[p.version] = std::make_shared<const PolicyParams>(p);
  }

  std::optional<GroupSpec> next_group(double now) override {
    if (stop_) return std::nullopt;
    if (config_.rollouts_per_iteration_cap > 0 &&
        issued_rollouts_ >= config_.rollouts_per_iteration_cap * config_.budget) {
      result_.stalled = true;
      return std::nullopt;
    }
    const auto& task = suite_[next_task_ % suite_.size()];
    ++next_task_;
    const auto stats = dm_.stats(task.task_id);
    GroupSpec g;
    g.task_id = task.task_id;
    g.group_id = "e" + std::to_string(epoch_) + "/" + task.task_id + "#" + std::to_string(rounds_[task.task_id]++);
    g.rollouts = stats.rollout_count;
    g.max_steps = stats.max_steps_cap;
    dm_.set_clock(now);
    dm_.open_group(g.group_id, g.task_id, g.rollouts);
    issued_rollouts_ += g.rollouts;
    return g;
  }

  void begin_rollout(const RolloutRequest& request, double now) override {
    const Task task = dm_.task(request.task_id);
    Running r;
    r.cursor = std::make_unique<RolloutCursor>(task, request, cluster_.at(request.env_id), featurizer_,
                                               config_.rollout,
                                               Rng::mix(config_.seed, stable_hash(request.trajectory_id())));
    r.start = now;
    running_[request.env_id] = std::move(r);
  }

  StepOutcome step(int env_id, int worker_id, const PolicyParams& snapshot, double now) override {
    auto& r = running_.at(env_id);
    if (r.cursor->steps() == 0) {
      dm_.set_clock(now);
      dm_.record_request(r.cursor->request().trajectory_id(), env_id, worker_id);
    }
    const double latency = r.cursor->advance(snapshot);
    return StepOutcome{latency, r.cursor->done()};
  }

  std::optional<TrainJob> finish_rollout(int env_id, double now) override {
    auto node = running_.extract(env_id);
    auto& r = node.mapped();
    const std::string group_id = r.cursor->request().group_id;
    const auto trajectory = r.cursor->finish(now - r.start);
    dm_.set_clock(now);
    dm_.store_trajectory(trajectory, group_id);
    auto assembled = dm_.assemble_group(group_id);
    if (assembled.status == GroupStatus::not_ready) return std::nullopt;

    GroupPoint point;
    point.iteration = trainer_.iteration();
    point.task_id = assembled.task_id;
    point.status = to_string(assembled.status);
    std::size_t online = 0;
    std::size_t steps = 0;
    double success = 0.0;
    for (const auto& t : assembled.trajectories) {
      if (t.source != TrajectorySource::online) continue;
      ++online;
      steps += t.steps.size();
      success += t.reward >= config_.curation.success_threshold ? 1.0 : 0.0;
    }
    point.rollouts = static_cast<int>(online);
    point.online_success = online ? success / static_cast<double>(online) : 0.0;
    point.mean_length = online ? static_cast<double>(steps) / static_cast<double>(online) : 0.0;
    point.next_rollouts = assembled.stats.rollout_count;
    point.next_cap = assembled.stats.max_steps_cap;
    point.injected = assembled.injected.has_value();
    result_.groups.push_back(point);
    if (assembled.injected) ++result_.pool_injections;

    if (assembled.status != GroupStatus::trainable) return std::nullopt;
    std::int64_t actions = 0;
    for (const auto& s : assembled.steps.step_records) actions += static_cast<std::int64_t>(!s.action.empty());
    TrainJob job{group_id, actions};
    ready_[group_id] = std::move(assembled);
    return job;
  }

  double train_duration(const TrainJob& job) override {
    return config_.train_latency_base + config_.train_latency_per_action * static_cast<double>(job.actions);
  }

  Snapshot train(const TrainJob& job, double now) override {
    auto node = ready_.extract(job.group_id);
    const auto& group = node.mapped();
    dm_.set_clock(now);
    TrainResult res;
    try {
      res = trainer_.train_iteration(group.steps);
    } catch (const std::exception& e) {
      diverge(e.what());
      return nullptr;
    }
    if (!res.applied) return nullptr;
    if (!res.params.theta.allFinite()) {
      diverge("non-finite parameters after update");
      return nullptr;
    }
    const auto& params = trainer_.params();
    const ModelVersion version = params.version;
    for (const auto& t : group.trajectories) dm_.record_usage_event(t.trajectory_id, "training_consumption", version);

    save_checkpoint(out_ / "latest", params, featurizer_.seed());
    std::string ckpt;
    if (trainer_.iteration() % config_.checkpoint_every == 0) {
      const auto stem = out_ / "checkpoints" / ("v" + std::to_string(version));
      save_checkpoint(stem, params, featurizer_.seed());
      ckpt = stem.string();
      last_checkpoint_ = version;
    }
    dm_.record_model(version, version - 1, ckpt, trainer_.iteration());

    res.metrics.time = now;
    Json row = to_json(res.metrics);
    row["group_id"] = job.group_id;
    row["task_id"] = group.task_id;
    row["injected"] = group.injected.has_value();
    dm_.record_update(row);
    if (trainer_.iteration() % config_.eval_every == 0) {
      const auto point = evaluate(now);
      row["eval_success"] = point.success;
      row["mean_rollouts"] = point.mean_rollouts;
      row["mean_length_cap"] = point.mean_length_cap;
    }
    metrics_.append(row);

    auto snap = std::make_shared<const PolicyParams>(params);
    history_[version] = snap;
    const auto keep_from = version > static_cast<ModelVersion>(config_.forced_staleness) + 1
                               ? version - static_cast<ModelVersion>(config_.forced_staleness) - 1
                               : 0;
    while (history_.size() > 1 && history_.begin()->first < keep_from) history_.erase(history_.begin());
    if (trainer_.iteration() >= config_.budget) stop_ = true;
    return snap;
  }

  Snapshot sync_target(ModelVersion latest) override {
    const auto k = static_cast<ModelVersion>(config_.forced_staleness);
    const ModelVersion want = latest > k ? latest - k : 0;
    auto it = history_.upper_bound(want);
    if (it == history_.begin()) return history_.begin()->second;
    return std::prev(it)->second;
  }

  Snapshot initial_snapshot() override { return history_.rbegin()->second; }

  void on_worker_synced(int worker_id, ModelVersion version, double now) override {
    dm_.set_clock(now);
    dm_.record_worker_event(worker_id, version, "synced");
  }

  bool should_stop() const override { return stop_ || result_.diverged; }

  EvalPoint evaluate(double now) {
    EvalPoint p;
    p.iteration = trainer_.iteration();
    p.time = now;
    p.success = evaluate_policy(trainer_.params(), featurizer_, suite_, config_.env, config_.rollout,
                                config_.eval_episodes, Rng::mix(config_.seed, 0xe7a1));
    const auto tasks = dm_.tasks();
    for (const auto& t : tasks) {
      p.mean_rollouts += t.rollout_count;
      p.mean_length_cap += t.max_steps_cap;
    }
    p.mean_rollouts /= static_cast<double>(tasks.size());
    p.mean_length_cap /= static_cast<double>(tasks.size());
    result_.evals.push_back(p);
    return p;
  }

  std::optional<ModelVersion> last_checkpoint() const { return last_checkpoint_; }

 private:
  struct Running {
    std::unique_ptr<RolloutCursor> cursor;
    double start = 0.0;
  };

  void diverge(const std::string& why) {
    result_.diverged = true;
    result_.divergence = why;
    std::clog << "[trainer] diverged at iteration " << trainer_.iteration() << ": " << why << "\n";
  }

  const RunConfig& config_;
  std::filesystem::path out_;
  DataManager& dm_;
  const Featurizer& featurizer_;
  Trainer& trainer_;
  EnvCluster cluster_;
  std::vector<Task> suite_;
  int epoch_;
  RunResult& result_;
  JsonlAppender metrics_;
  std::size_t next_task_ = 0;
  std::int64_t issued_rollouts_ = 0;
  std::map<std::string, int> rounds_;
  std::map<int, Running> running_;
  std::map<std::string, AssembledGroup> ready_;
  std::map<ModelVersion, Snapshot> history_;
  std::optional<ModelVersion> last_checkpoint_;
  bool stop_ = false;
};

}  // namespace

void prepopulate_pool(const RunConfig& config, DataManager& dm, const Featurizer& featurizer,
                      const PolicyParams& initial, const std::vector<Task>& suite) {
  if (config.pool_per_task <= 0) return;
  EnvConfig cfg = config.env;
  cfg.failure_prob = 0.0;
  EnvInstance env(-1, cfg);
  Worker worker;
  worker.snapshot = std::make_shared<const PolicyParams>(initial);
  for (const auto& task : suite) {
    if (!config.pool_tasks.empty() && !config.pool_tasks.contains(task.task_id)) continue;
    if (dm.pool().size(task.task_id) > 0) continue;  // restored on resume
    int found = 0;
    int ordinal = 0;
    auto attempt = [&](bool oracle) {
      RolloutOptions opts = config.rollout;
      opts.oracle_actions = oracle;
      RolloutRequest req;
      req.task_id = task.task_id;
      req.group_id = "pool/" + task.task_id;
      req.ordinal = ordinal++;
      req.max_steps = cfg.global_max_steps;
      auto t = run_rollout(task, req, env, worker, featurizer, opts,
                           Rng::mix(config.seed, stable_hash(req.trajectory_id())));
      if (t.reward >= config.curation.success_threshold) {
        dm.add_to_pool(std::move(t));
        ++found;
      }
    };
    for (int i = 0; i < config.pool_attempts && found < config.pool_per_task; ++i) attempt(false);
    // Tasks the initial policy cannot solve fall back to the scripted oracle.
    while (found < config.pool_per_task) attempt(true);
  }
}

RunResult run_training(const RunConfig& config, const std::filesystem::path& out, bool resume) {
  config.validate();
  namespace fs = std::filesystem;
  if (!resume) {
    for (const char* sub : {"store", "checkpoints", "metrics.jsonl", "latest.bin", "latest.json"}) fs::remove_all(out / sub);
  }
  fs::create_directories(out / "checkpoints");

  RunResult result;
  const Featurizer featurizer(config.features, config.env.vocab, config.rollout.history_window,
                              Rng::mix(config.seed, 0xfea));
  const PolicyParams initial = PolicyParams::zeros(config.features, config.env.vocab, config.temperature);
  DataManager dm(out / "store", config.curation, config.seed);
  const auto suite = make_suite(config);
  for (const auto& t : suite) dm.register_task(t);

  Trainer trainer(config.trainer, featurizer, initial);
  if (resume && fs::exists(out / "latest.json")) {
    auto ckpt = load_checkpoint(out / "latest");
    if (ckpt.seed != featurizer.seed() || ckpt.params.features() != config.features) {
      throw std::runtime_error("checkpoint in " + out.string() + " does not match the config");
    }
    trainer.set_iteration(static_cast<std::int64_t>(ckpt.params.version));
    trainer.set_params(std::move(ckpt.params));
  }
  int epoch = 0;
  for (const auto& row : dm.store().rows(Table::datasets)) {
    if (row.at("dataset") == "run") ++epoch;
  }
  dm.store().append(Table::datasets,
                    Json{{"dataset", "run"}, {"epoch", epoch}, {"start_iteration", trainer.iteration()}});

  prepopulate_pool(config, dm, featurizer, initial, suite);

  SystemBackend backend(config, out, dm, featurizer, trainer, suite, epoch, result);
  result.initial_success = backend.evaluate(0.0).success;

  const std::int64_t remaining = config.budget - trainer.iteration();
  if (remaining > 0) {
    EngineConfig e;
    e.sampling = config.sampling;
    e.sync = config.sync;
    e.coupled = config.coupled;
    e.envs = config.envs;
    e.workers = config.workers;
    e.slots = config.slots;
    e.worker_capacity = config.worker_capacity;
    e.inference_latency = config.inference_latency;
    e.sync_latency = config.sync_latency;
    e.max_train_iterations = remaining;
    e.record_trace = config.record_trace;
    Simulator sim(e, backend);
    result.timeline = sim.run();
  }

  const auto& params = trainer.params();
  if (remaining > 0 && !result.diverged && backend.last_checkpoint() != params.version) {
    const auto stem = out / "checkpoints" / ("v" + std::to_string(params.version));
    save_checkpoint(stem, params, featurizer.seed());
    dm.store().append(Table::checkpoint,
                      Json{{"version", params.version}, {"path", stem.string()}, {"iteration", trainer.iteration()}});
  }
  result.final_params = params;
  result.iterations = trainer.iteration();
  result.final_success = params.theta.allFinite() ? backend.evaluate(result.timeline.duration).success : 0.0;
  return result;
}

}  // namespace dart
