#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dart/core.hpp"
#include "dart/rng.hpp"

namespace dart {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr int kDefaultFeatures = 64;
inline constexpr int kDefaultVocab = 32;

/// Parameters of the softmax sequence policy: logits = theta^T phi / temperature.
struct PolicyParams {
  Matrix theta;  // features x vocab
  ModelVersion version = 0;
  double temperature = 1.0;

  static PolicyParams zeros(int features, int vocab, double temperature = 1.0);
  int features() const { return static_cast<int>(theta.rows()); }
  int vocab() const { return static_cast<int>(theta.cols()); }
};

/// What the policy conditions on for one step, apart from its own prefix.
struct Context {
  std::vector<int> task_tokens;
  std::vector<HistoryEntry> history;
  std::vector<int> state;
};

/// Folds (task, last-m history, state, generated prefix) into a feature vector
/// through a fixed random projection of per-block token frequency histograms.
class Featurizer {
 public:
  Featurizer(int features = kDefaultFeatures, int vocab = kDefaultVocab,
             int history_window = kDefaultHistoryWindow, std::uint64_t seed = 0);

  Vector operator()(const Context& ctx, std::span<const int> prefix) const;

  /// Features before each token of `tokens`: entry i conditions on tokens[0..i).
  std::vector<Vector> positions(const Context& ctx, std::span<const int> tokens) const;

  /// Deterministic identifying tokens for a task id.
  std::vector<int> task_tokens(const std::string& task_id) const;

  Context context_for(const StepRecord& step) const;

  int features() const { return features_; }
  int vocab() const { return vocab_; }
  int history_window() const { return history_window_; }
  std::uint64_t seed() const { return seed_; }

 private:
  int features_;
  int vocab_;
  int history_window_;
  std::uint64_t seed_;
  Matrix projection_;  // features x (4 * vocab + 1)
  Eigen::MatrixXd columns_;  // column-major copy for sparse accumulation
};

/// Softmax over the vocabulary. Throws std::domain_error on non-finite logits.
Vector token_distribution(const PolicyParams& params, const Vector& features);

/// Shannon entropy in nats.
double token_entropy(const Vector& probs);

struct SampledStep {
  std::vector<int> tokens;
  std::vector<double> logprobs;
  std::vector<double> entropies;

  double total_logprob() const;
};

/// Draws thought_len + action_len tokens autoregressively, recording each
/// token's log-probability and the entropy of the distribution it came from.
/// When `forced_action` is non-empty the action tokens are taken from it
/// instead of sampled, and are scored the same way.
SampledStep sample_step(const PolicyParams& params, const Featurizer& featurizer, const Context& ctx,
                        Rng& rng, int thought_len, int action_len,
                        std::span<const int> forced_action = {});

double sequence_logprob(const PolicyParams& params, std::span<const Vector> features,
                        std::span<const int> tokens);
double sequence_logprob(const PolicyParams& params, const Featurizer& featurizer, const Context& ctx,
                        std::span<const int> tokens);

/// d/dtheta of sequence_logprob.
Matrix sequence_logprob_gradient(const PolicyParams& params, std::span<const Vector> features,
                                 std::span<const int> tokens);
Matrix sequence_logprob_gradient(const PolicyParams& params, const Featurizer& featurizer,
                                 const Context& ctx, std::span<const int> tokens);

/// KL(p || q) for strictly positive categorical distributions.
double categorical_kl(const Vector& p, const Vector& q);

/// Sum over token positions of KL(pi_a || pi_b) at each recorded prefix.
double exact_token_kl(const PolicyParams& a, const PolicyParams& b, std::span<const Vector> features);
double exact_token_kl(const PolicyParams& a, const PolicyParams& b, const Featurizer& featurizer,
                      const Context& ctx, std::span<const int> tokens);

/// d/dtheta_a of exact_token_kl.
Matrix exact_token_kl_gradient(const PolicyParams& a, const PolicyParams& b,
                               std::span<const Vector> features);

/// Writes `<stem>.bin` (row-major doubles) and `<stem>.json`
/// ({version, F, V, temperature, seed}).
void save_checkpoint(const std::filesystem::path& stem, const PolicyParams& params,
                     std::uint64_t featurizer_seed);

struct Checkpoint {
  PolicyParams params;
  std::uint64_t seed = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& stem);

}  // namespace dart
