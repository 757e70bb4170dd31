#include "dart/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dart {

void TrainerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(beta_kl >= 0.0)) throw std::invalid_argument("beta_kl must be nonnegative");
  if (!(eps_low > 0.0 && eps_low < 1.0)) throw std::invalid_argument("eps_low must be in (0,1)");
  if (!(eps_high > 0.0 && eps_high < 1.0)) throw std::invalid_argument("eps_high must be in (0,1)");
  if (!(is_cap > 0.0)) throw std::invalid_argument("is_cap must be positive");
  if (!(entropy_keep_quantile >= 0.0 && entropy_keep_quantile < 1.0)) {
    throw std::invalid_argument("entropy_keep_quantile must be in [0,1)");
  }
}

Json to_json(const TrainMetrics& m) {
  return Json{{"iteration", m.iteration},       {"version", m.version},
              {"mean_advantage", m.mean_advantage}, {"std_advantage", m.std_advantage},
              {"gated_fraction", m.gated_fraction}, {"mean_is_weight", m.mean_is_weight},
              {"clip_fraction", m.clip_fraction},   {"kl", m.kl},
              {"loss", m.loss},                     {"actions", m.actions},
              {"trained_steps", m.trained_steps},   {"time", m.time}};
}

std::vector<double> compute_advantages(std::span<const double> step_rewards) {
  if (step_rewards.size() < 2) throw std::invalid_argument("advantages need at least two steps");
  const double n = static_cast<double>(step_rewards.size());
  double mean = 0.0;
  for (double r : step_rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : step_rewards) var += (r - mean) * (r - mean);
  var /= n;
  const double sd = std::sqrt(var);
  if (!(sd > 0.0)) throw std::invalid_argument("zero reward variance in group");
  std::vector<double> adv;
  adv.reserve(step_rewards.size());
  for (double r : step_rewards) adv.push_back((r - mean) / sd);
  return adv;
}

std::vector<bool> entropy_gate(std::span<const double> entropies, double quantile) {
  if (!(quantile >= 0.0 && quantile < 1.0)) throw std::invalid_argument("quantile must be in [0,1)");
  if (entropies.empty()) return {};
  std::vector<double> sorted(entropies.begin(), entropies.end());
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::floor(quantile * static_cast<double>(sorted.size())));
  const double threshold = sorted[std::min(rank, sorted.size() - 1)];
  std::vector<bool> keep;
  keep.reserve(entropies.size());
  for (double h : entropies) keep.push_back(h >= threshold);
  return keep;
}

double is_weight(double logp_train_old, double logp_rollout, double cap) {
  return std::min(std::exp(logp_train_old - logp_rollout), cap);
}

StepLoss grpo_step_loss(const PreparedStep& step, const PolicyParams& params, const PolicyParams& ref,
                        const TrainerConfig& config) {
  StepLoss out;
  const double logp = sequence_logprob(params, step.features, step.tokens);
  out.ratio = std::exp(logp - step.logp_old);
  out.weight = config.use_is_weight ? is_weight(step.logp_old, step.logp_rollout, config.is_cap) : 1.0;
  const double a = step.advantage;
  const double unclipped = out.ratio * a;
  const double clipped = std::clamp(out.ratio, 1.0 - config.eps_low, 1.0 + config.eps_high) * a;
  out.clipped = clipped < unclipped;
  const double surrogate = std::min(unclipped, clipped);
  out.kl = config.beta_kl > 0.0 ? exact_token_kl(params, ref, step.features) : 0.0;
  out.value = out.weight * surrogate - config.beta_kl * out.kl;

  if (out.clipped) {
    out.gradient = Matrix::Zero(params.features(), params.vocab());
  } else {
    out.gradient = (out.weight * a * out.ratio) * sequence_logprob_gradient(params, step.features, step.tokens);
  }
  if (config.beta_kl > 0.0) out.gradient -= config.beta_kl * exact_token_kl_gradient(params, ref, step.features);

  if (!std::isfinite(out.value) || !out.gradient.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite step loss: logp=" << logp << " logp_old=" << step.logp_old << " ratio=" << out.ratio
        << " weight=" << out.weight << " kl=" << out.kl << " advantage=" << a;
    throw std::runtime_error(msg.str());
  }
  return out;
}

StepLoss grpo_objective(std::span<const PreparedStep> steps, const PolicyParams& params, const PolicyParams& ref,
                        const TrainerConfig& config) {
  StepLoss total;
  total.gradient = Matrix::Zero(params.features(), params.vocab());
  if (steps.empty()) return total;
  for (const auto& s : steps) {
    const auto l = grpo_step_loss(s, params, ref, config);
    total.value += l.value;
    total.gradient += l.gradient;
    total.kl += l.kl;
  }
  const double n = static_cast<double>(steps.size());
  total.value /= n;
  total.gradient /= n;
  total.kl /= n;
  return total;
}

Trainer::Trainer(TrainerConfig config, const Featurizer& featurizer, PolicyParams initial)
    : config_(config), featurizer_(&featurizer), reference_(initial), params_(std::move(initial)) {
  config_.validate();
  if (params_.features() != featurizer.features() || params_.vocab() != featurizer.vocab()) {
    throw std::invalid_argument("policy shape does not match featurizer");
  }
}

std::vector<PreparedStep> Trainer::prepare(const StepGroup& group, const PolicyParams& params_old,
                                           TrainMetrics* metrics) const {
  if (group.step_records.size() != group.rewards.size()) throw std::invalid_argument("group rewards misaligned");
  const auto advantages = compute_advantages(group.rewards);
  std::vector<double> entropies = group.entropy_values;
  if (entropies.size() != group.step_records.size()) {
    entropies.clear();
    for (const auto& s : group.step_records) entropies.push_back(step_entropy(s.token_entropies));
  }
  const auto keep = config_.use_entropy_gate ? entropy_gate(entropies, config_.entropy_keep_quantile)
                                             : std::vector<bool>(entropies.size(), true);
  std::vector<PreparedStep> out;
  for (std::size_t i = 0; i < group.step_records.size(); ++i) {
    if (!keep[i]) continue;
    const auto& rec = group.step_records[i];
    PreparedStep p;
    p.tokens = rec.generated_tokens();
    p.features = featurizer_->positions(featurizer_->context_for(rec), p.tokens);
    p.advantage = advantages[i];
    p.logp_old = sequence_logprob(params_old, p.features, p.tokens);
    p.logp_rollout = rec.rollout_logprob;
    out.push_back(std::move(p));
  }
  if (metrics) {
    double mean = 0.0;
    for (double a : advantages) mean += a;
    mean /= static_cast<double>(advantages.size());
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    metrics->mean_advantage = mean;
    metrics->std_advantage = std::sqrt(var / static_cast<double>(advantages.size()));
    metrics->gated_fraction = 1.0 - static_cast<double>(out.size()) / static_cast<double>(advantages.size());
    std::int64_t actions = 0;
    for (const auto& rec : group.step_records) actions += static_cast<std::int64_t>(!rec.action.empty());
    metrics->actions = actions;
    metrics->trained_steps = static_cast<std::int64_t>(out.size());
  }
  return out;
}

TrainResult Trainer::train_iteration(const StepGroup& group) {
  auto result = train_iteration(group, params_);
  if (result.applied) {
    params_ = result.params;
    ++iteration_;
  }
  return result;
}

TrainResult Trainer::train_iteration(const StepGroup& group, const PolicyParams& params) {
  TrainResult result;
  result.params = params;
  result.metrics.iteration = iteration_ + 1;
  result.metrics.version = params.version;
  std::vector<PreparedStep> steps;
  try {
    steps = prepare(group, params, &result.metrics);
  } catch (const std::invalid_argument&) {
    return result;
  }
  if (steps.empty()) return result;

  Matrix grad = Matrix::Zero(params.features(), params.vocab());
  double value = 0.0;
  double weights = 0.0;
  double clipped = 0.0;
  double kl = 0.0;
  for (const auto& s : steps) {
    const auto l = grpo_step_loss(s, params, reference_, config_);
    grad += l.gradient;
    value += l.value;
    weights += l.weight;
    clipped += l.clipped ? 1.0 : 0.0;
    kl += l.kl;
  }
  const double n = static_cast<double>(steps.size());
  result.params.theta += (config_.learning_rate / n) * grad;
  result.params.version = params.version + 1;
  result.applied = true;
  result.metrics.version = result.params.version;
  result.metrics.loss = -value / n;
  result.metrics.mean_is_weight = weights / n;
  result.metrics.clip_fraction = clipped / n;
  result.metrics.kl = kl / n;
  return result;
}

}  // namespace dart
