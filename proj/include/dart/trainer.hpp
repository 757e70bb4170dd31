#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dart/core.hpp"
#include "dart/policy.hpp"

namespace dart {

struct TrainerConfig {
  double learning_rate = 2.0;
  double beta_kl = 0.1;
  double eps_low = 0.2;
  double eps_high = 0.28;
  double is_cap = 1.0;
  double entropy_keep_quantile = 0.2;
  bool use_is_weight = true;
  bool use_entropy_gate = true;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct TrainMetrics {
  std::int64_t iteration = 0;
  ModelVersion version = 0;
  double mean_advantage = 0.0;
  double std_advantage = 0.0;
  double gated_fraction = 0.0;
  double mean_is_weight = 0.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
  double loss = 0.0;
  std::int64_t actions = 0;
  std::int64_t trained_steps = 0;
  double time = 0.0;
};

Json to_json(const TrainMetrics& m);

/// (R - mean) / population std over every step of the group. Throws
/// std::invalid_argument when fewer than two steps or zero variance.
std::vector<double> compute_advantages(std::span<const double> step_rewards);

/// Keeps steps whose entropy is at least the value at ascending rank
/// floor(quantile * n).
std::vector<bool> entropy_gate(std::span<const double> entropies, double quantile);

/// min(exp(logp_train_old - logp_rollout), cap).
double is_weight(double logp_train_old, double logp_rollout, double cap);

/// A step with its per-token features and the fixed quantities of the
/// objective precomputed.
struct PreparedStep {
  std::vector<Vector> features;
  std::vector<int> tokens;
  double advantage = 0.0;
  double logp_old = 0.0;      // trainer policy at admission
  double logp_rollout = 0.0;  // recorded at generation time
};

struct StepLoss {
  double value = 0.0;
  Matrix gradient;
  double ratio = 1.0;
  double weight = 1.0;
  double kl = 0.0;
  bool clipped = false;
};

/// w * min(r A, clip(r, 1-eps_low, 1+eps_high) A) - beta * KL(pi_theta || pi_ref)
/// and its gradient w.r.t. theta, with r = pi_theta / pi_old at sequence level.
StepLoss grpo_step_loss(const PreparedStep& step, const PolicyParams& params, const PolicyParams& ref,
                        const TrainerConfig& config);

/// Mean over steps of grpo_step_loss: the scalar objective one iteration ascends.
StepLoss grpo_objective(std::span<const PreparedStep> steps, const PolicyParams& params, const PolicyParams& ref,
                        const TrainerConfig& config);

struct TrainResult {
  bool applied = false;
  PolicyParams params;
  TrainMetrics metrics;
};

/// Single-learner GRPO trainer holding the frozen reference policy.
class Trainer {
 public:
  Trainer(TrainerConfig config, const Featurizer& featurizer, PolicyParams initial);

  /// Gate, weight and take one ascent step on the group. Rejected groups
  /// (fewer than two steps or zero reward variance) leave the params as is.
  TrainResult train_iteration(const StepGroup& group);

  /// Same as train_iteration, against explicit params.
  TrainResult train_iteration(const StepGroup& group, const PolicyParams& params);

  /// Steps of the group after advantage computation and gating.
  std::vector<PreparedStep> prepare(const StepGroup& group, const PolicyParams& params_old,
                                    TrainMetrics* metrics = nullptr) const;

  const PolicyParams& params() const { return params_; }
  void set_params(PolicyParams params) { params_ = std::move(params); }
  const PolicyParams& reference() const { return reference_; }
  void set_reference(PolicyParams ref) { reference_ = std::move(ref); }
  const TrainerConfig& config() const { return config_; }
  std::int64_t iteration() const { return iteration_; }
  void set_iteration(std::int64_t it) { iteration_ = it; }

 private:
  TrainerConfig config_;
  const Featurizer* featurizer_;
  PolicyParams reference_;
  PolicyParams params_;
  std::int64_t iteration_ = 0;
};

}  // namespace dart
