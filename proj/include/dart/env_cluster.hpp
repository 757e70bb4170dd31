#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dart/core.hpp"
#include "dart/rng.hpp"

namespace dart {

struct EnvConfig {
  int vocab = 32;
  int action_len = 1;
  // Each cue token appears this many times in the state; decoys appear once.
  int cue_repeat = 2;
  int decoys = 3;
  int global_max_steps = kDefaultGlobalMaxSteps;
  double failure_prob = 0.0;
  // Relative uniform jitter on the per-step latency, in [0, 1).
  double latency_jitter = 0.0;
  // A wrong action sends the episode back to the first segment.
  bool reset_on_mistake = true;
};

enum class EnvStatus { idle, resetting, stepping, evaluating };

std::string to_string(EnvStatus status);

struct EnvObservation {
  std::vector<int> state;
  int step_index = 0;
  bool done = false;

  bool operator==(const EnvObservation&) const = default;
};

/// One key-sequence puzzle environment. The target is a list of action
/// segments that must be entered in order; the state shows the next segment
/// among random decoys.
class EnvInstance {
 public:
  EnvInstance(int env_id, EnvConfig config);

  /// Binds the env to a task. Throws std::logic_error unless idle.
  EnvObservation reset(const Task& task, std::uint64_t seed);

  /// Executes one action. Throws std::logic_error when no episode is active
  /// or the episode is already done.
  EnvObservation step(std::span<const int> action);

  /// 1 iff the whole target was matched. Throws std::logic_error before done.
  double evaluate() const;

  /// Returns a finished (or never started) env to the idle pool.
  void release();

  /// The action the goal predicate expects next; used by scripted oracles.
  std::vector<int> expected_action() const;

  int env_id() const { return env_id_; }
  EnvStatus status() const { return status_; }
  const std::optional<std::string>& task_id() const { return task_id_; }
  int progress() const { return progress_; }
  int steps_taken() const { return steps_taken_; }
  int step_cap() const { return step_cap_; }
  bool done() const { return done_; }
  TerminalReason terminal_reason() const { return terminal_reason_; }
  double last_step_latency() const { return last_latency_; }
  double busy_time() const { return busy_time_; }
  const EnvConfig& config() const { return config_; }

 private:
  std::vector<int> render_state();

  int env_id_;
  EnvConfig config_;
  EnvStatus status_ = EnvStatus::idle;
  std::optional<std::string> task_id_;
  std::vector<int> target_;
  double step_latency_ = 0.0;
  int segments_ = 0;
  int progress_ = 0;
  int steps_taken_ = 0;
  int step_cap_ = 0;
  bool done_ = false;
  TerminalReason terminal_reason_ = TerminalReason::finished;
  double last_latency_ = 0.0;
  double busy_time_ = 0.0;
  Rng rng_{0};
};

/// Pool of environments. Distinct env ids may be driven concurrently; the
/// idle-set bookkeeping is guarded.
class EnvCluster {
 public:
  EnvCluster(int size, EnvConfig config);

  int size() const { return static_cast<int>(envs_.size()); }
  EnvInstance& at(int env_id);
  const EnvInstance& at(int env_id) const;

  /// Lowest-id idle env, marked as taken; nullopt when all are in use.
  std::optional<int> acquire();
  void release(int env_id);

  /// JSON protocol: {"type": "reset"|"step"|"evaluate"|"release", "env_id", ...}
  /// answered by {"type": "result", "ok", ...}.
  Json handle(const Json& message);

 private:
  std::vector<EnvInstance> envs_;
  std::vector<bool> taken_;
  std::mutex mutex_;
};

/// Builds a puzzle task with `difficulty` segments of `action_len` tokens each.
Task make_puzzle_task(const std::string& task_id, int difficulty, int action_len, int vocab,
                      double step_latency, Rng& rng);

Json to_json(const EnvObservation& obs);

}  // namespace dart
