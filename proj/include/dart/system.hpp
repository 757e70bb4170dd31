#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "dart/config.hpp"
#include "dart/data_manager.hpp"
#include "dart/env_cluster.hpp"
#include "dart/policy.hpp"
#include "dart/rollout_service.hpp"
#include "dart/sim_kernel.hpp"
#include "dart/trainer.hpp"

namespace dart {

struct SuiteConfig {
  int tasks = 20;
  int difficulty_min = 2;
  int difficulty_max = 3;
  double latency_min = 1.0;
  double latency_max = 3.0;
};

/// Everything a training run needs.
struct RunConfig {
  std::uint64_t seed = 7;
  int envs = 16;
  int workers = 4;
  int worker_capacity = 16;
  SuiteConfig suite;
  EnvConfig env;
  TrainerConfig trainer{.learning_rate = 20.0};
  CurationConfig curation;
  // Thoughts are unobserved by the toy env; see README for the thought_len tradeoff.
  RolloutOptions rollout{.thought_len = 0};
  int features = kDefaultFeatures;
  double temperature = 1.0;
  // Successes pre-collected per task; 0 disables pre-population. The
  // initial policy gets pool_attempts tries, then a scripted oracle tops up.
  int pool_per_task = 3;
  int pool_attempts = 32;
  // Restricts pre-population to these task ids (empty: every task).
  std::set<std::string> pool_tasks;
  std::int64_t budget = 1000;  // training iterations
  // Stops a run whose groups keep failing: at most this many rollouts per
  // budgeted iteration (0: unlimited).
  int rollouts_per_iteration_cap = 64;
  SamplingMode sampling = SamplingMode::rollout;
  SyncMode sync = SyncMode::per_worker;
  bool coupled = false;
  int slots = 2;
  double inference_latency = 1.0;
  double sync_latency = 5.0;
  double train_latency_base = 2.0;
  double train_latency_per_action = 0.02;
  // Workers are pushed the version this many behind the latest.
  int forced_staleness = 0;
  int checkpoint_every = 100;
  int eval_every = 50;
  int eval_episodes = 4;
  bool record_trace = false;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Keys accepted by run_config_from_key_values (for env-variable overrides).
std::set<std::string> run_config_keys();
RunConfig run_config_from_key_values(const KeyValues& kv);

/// The seeded task suite of a run.
std::vector<Task> make_suite(const RunConfig& config);

/// Fraction of sampled episodes (global step cap) that succeed.
double evaluate_policy(const PolicyParams& params, const Featurizer& featurizer, const std::vector<Task>& tasks,
                       const EnvConfig& env, const RolloutOptions& options, int episodes, std::uint64_t seed);

struct EvalPoint {
  std::int64_t iteration = 0;
  double time = 0.0;
  double success = 0.0;
  double mean_rollouts = 0.0;   // mean over tasks of the next group's N
  double mean_length_cap = 0.0;  // mean over tasks of the next group's cap
};

struct GroupPoint {
  std::int64_t iteration = 0;  // committed iterations when the group closed
  std::string task_id;
  std::string status;
  double online_success = 0.0;
  double mean_length = 0.0;
  int rollouts = 0;
  int next_rollouts = 0;
  int next_cap = 0;
  bool injected = false;
};

struct RunResult {
  TimelineReport timeline;
  PolicyParams final_params;
  std::vector<EvalPoint> evals;
  std::vector<GroupPoint> groups;
  double initial_success = 0.0;
  double final_success = 0.0;
  std::int64_t iterations = 0;  // total committed, including before a resume
  bool diverged = false;
  bool stalled = false;  // hit the rollout cap before the budget
  std::string divergence;
  std::size_t pool_injections = 0;
};

/// Fills the experience pool: the initial policy gets pool_attempts tries per
/// task, then a scripted oracle tops up to pool_per_task successes. Tasks that
/// already have pool entries (a resumed store) are skipped.
void prepopulate_pool(const RunConfig& config, DataManager& dm, const Featurizer& featurizer,
                      const PolicyParams& initial, const std::vector<Task>& suite);

/// Pool pre-population, then asynchronous training on the virtual clock up to
/// the iteration budget. Artifacts under `out`: store/, checkpoints/,
/// latest.{bin,json}, metrics.jsonl. With `resume`, continues from the last
/// committed iteration in `out`.
RunResult run_training(const RunConfig& config, const std::filesystem::path& out, bool resume = false);

}  // namespace dart
