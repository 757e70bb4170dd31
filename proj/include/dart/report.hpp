#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dart/core.hpp"

namespace dart {

struct StoreIssue {
  std::string table;
  std::string detail;
};

/// Thrown when a store cannot be summarized; what() lists every failing table.
class StoreError : public std::runtime_error {
 public:
  explicit StoreError(std::vector<StoreIssue> issues);
  const std::vector<StoreIssue>& issues() const { return issues_; }

 private:
  std::vector<StoreIssue> issues_;
};

/// One task at one committed model version, merged over the groups that
/// closed there.
struct CurvePoint {
  std::int64_t iteration = 0;
  std::string task_id;
  int groups = 0;
  int rollouts = 0;  // online rollouts
  double online_success = 0.0;
  double mean_length = 0.0;  // mean online trajectory length
  double success_ema = 0.0;
  int rollout_count = 0;  // N for the task's next group
  int max_steps_cap = 0;  // cap for the task's next group
  int injections = 0;
};

/// Suite means at one committed model version, carrying every task's latest
/// statistics forward.
struct SuitePoint {
  std::int64_t iteration = 0;
  double mean_success_ema = 0.0;
  double mean_rollout_count = 0.0;
  double mean_length_cap = 0.0;
  double mean_sampled_length = 0.0;  // over groups closed at this version
};

struct StoreReport {
  std::size_t tasks = 0;
  std::size_t trajectories = 0;
  std::size_t groups = 0;
  std::size_t trainable_groups = 0;
  std::size_t skipped_groups = 0;
  std::size_t no_positive_groups = 0;
  std::size_t pool_injections = 0;        // groups that received a pool trajectory
  std::size_t pool_injection_events = 0;  // usage events of type pool_injection
  std::size_t training_events = 0;        // usage events of type training_consumption
  std::int64_t iterations = 0;            // latest committed model version
  std::vector<CurvePoint> curves;
  std::vector<SuitePoint> suite;
};

/// Parses every table and checks the fields the report relies on. An empty
/// result means the store is readable.
std::vector<StoreIssue> check_store(const std::filesystem::path& store_dir);

/// Throws StoreError when check_store finds problems, std::runtime_error when
/// the directory does not exist.
StoreReport build_report(const std::filesystem::path& store_dir);

std::string curves_csv(const StoreReport& report);
std::string suite_csv(const StoreReport& report);
Json summary_json(const StoreReport& report);
/// Line plot of the suite curves against the iteration.
std::string suite_svg(const StoreReport& report);

}  // namespace dart
