#pragma once

#include <cstdint>
#include <filesystem>

#include "dart/system.hpp"

namespace dart {

struct LiveOptions {
  // Wall-clock seconds per virtual time unit; env latency, inference, sync
  // and training durations are real sleeps scaled by this.
  double seconds_per_unit = 0.001;
  // Requests a stop once exceeded (0: no limit).
  double max_wall_seconds = 120.0;
};

struct LiveResult {
  std::int64_t iterations = 0;
  std::size_t trajectories = 0;
  std::size_t pool_injections = 0;
  std::size_t syncs = 0;
  ModelVersion max_staleness = 0;  // latest version minus the serving snapshot's, at step time
  double initial_success = 0.0;
  double final_success = 0.0;
  double wall_seconds = 0.0;
  bool timed_out = false;
  bool diverged = false;
};

/// Wall-clock training: one thread per env, a sync coordinator and a trainer
/// thread share the rollout service and the data manager. Sampling is always
/// rollout-wise. Nondeterministic by construction; use run_training for
/// reproducible runs. Artifacts match run_training's layout.
LiveResult run_live(const RunConfig& config, const std::filesystem::path& out, const LiveOptions& options = {});

}  // namespace dart
