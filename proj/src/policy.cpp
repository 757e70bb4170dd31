#include "dart/policy.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dart/jsonl.hpp"

namespace dart {

namespace {

constexpr int kTaskTokenCount = 3;

void add_frequencies(Eigen::Ref<Vector> block, std::span<const int> tokens, int vocab) {
  if (tokens.empty()) return;
  const double w = 1.0 / static_cast<double>(tokens.size());
  for (int t : tokens) {
    if (t < 0 || t >= vocab) throw std::out_of_range("token " + std::to_string(t) + " outside vocabulary");
    block[t] += w;
  }
}

void check_tokens(std::span<const int> tokens, int vocab) {
  for (int t : tokens) {
    if (t < 0 || t >= vocab) throw std::out_of_range("token " + std::to_string(t) + " outside vocabulary");
  }
}

}  // namespace

PolicyParams PolicyParams::zeros(int features, int vocab, double temperature) {
  if (features <= 0 || vocab <= 1) throw std::invalid_argument("policy shape must be positive");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  PolicyParams p;
  p.theta = Matrix::Zero(features, vocab);
  p.temperature = temperature;
  return p;
}

Featurizer::Featurizer(int features, int vocab, int history_window, std::uint64_t seed)
    : features_(features), vocab_(vocab), history_window_(history_window), seed_(seed) {
  if (features <= 0 || vocab <= 1 || history_window < 0) {
    throw std::invalid_argument("invalid featurizer shape");
  }
  Rng rng(Rng::mix(seed, 0xfea7u));
  const int inputs = 4 * vocab + 1;
  const double scale = std::sqrt(3.0 / features);
  projection_.resize(features, inputs);
  for (int r = 0; r < features; ++r) {
    for (int c = 0; c < inputs; ++c) projection_(r, c) = (2.0 * rng.uniform() - 1.0) * scale;
  }
  columns_ = projection_;
}

Vector Featurizer::operator()(const Context& ctx, std::span<const int> prefix) const {
  Vector x = Vector::Zero(4 * vocab_ + 1);
  add_frequencies(x.segment(0, vocab_), ctx.task_tokens, vocab_);

  std::vector<int> history_tokens;
  const std::size_t m = static_cast<std::size_t>(history_window_);
  const std::size_t first = ctx.history.size() > m ? ctx.history.size() - m : 0;
  for (std::size_t i = first; i < ctx.history.size(); ++i) {
    const auto& h = ctx.history[i];
    history_tokens.insert(history_tokens.end(), h.state.begin(), h.state.end());
    history_tokens.insert(history_tokens.end(), h.thought.begin(), h.thought.end());
    history_tokens.insert(history_tokens.end(), h.action.begin(), h.action.end());
  }
  add_frequencies(x.segment(vocab_, vocab_), history_tokens, vocab_);
  add_frequencies(x.segment(2 * vocab_, vocab_), ctx.state, vocab_);
  add_frequencies(x.segment(3 * vocab_, vocab_), prefix, vocab_);
  x[4 * vocab_] = 1.0;
  Vector out = Vector::Zero(features_);
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) out.noalias() += x[j] * columns_.col(j);
  }
  return out;
}

std::vector<Vector> Featurizer::positions(const Context& ctx, std::span<const int> tokens) const {
  std::vector<Vector> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back((*this)(ctx, tokens.first(i)));
  return out;
}

std::vector<int> Featurizer::task_tokens(const std::string& task_id) const {
  Rng rng(stable_hash(task_id));
  std::vector<int> tokens(kTaskTokenCount);
  for (auto& t : tokens) t = rng.below(vocab_);
  return tokens;
}

Context Featurizer::context_for(const StepRecord& step) const {
  return Context{task_tokens(step.task_id), step.history, step.state};
}

Vector token_distribution(const PolicyParams& params, const Vector& features) {
  if (features.size() != params.theta.rows()) throw std::invalid_argument("feature size mismatch");
  Vector logits = params.theta.transpose() * features / params.temperature;
  if (!logits.allFinite()) throw std::domain_error("non-finite logits");
  const double max_logit = logits.maxCoeff();
  Vector p = (logits.array() - max_logit).exp();
  p /= p.sum();
  return p;
}

double token_entropy(const Vector& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  }
  return std::max(0.0, h);
}

double SampledStep::total_logprob() const {
  double s = 0.0;
  for (double lp : logprobs) s += lp;
  return s;
}

SampledStep sample_step(const PolicyParams& params, const Featurizer& featurizer, const Context& ctx,
                        Rng& rng, int thought_len, int action_len, std::span<const int> forced_action) {
  if (thought_len < 0 || action_len < 1) throw std::invalid_argument("invalid step lengths");
  if (!forced_action.empty() && static_cast<int>(forced_action.size()) != action_len) {
    throw std::invalid_argument("forced action length mismatch");
  }
  SampledStep out;
  const int total = thought_len + action_len;
  for (int i = 0; i < total; ++i) {
    const Vector p = token_distribution(params, featurizer(ctx, out.tokens));
    int token;
    if (i >= thought_len && !forced_action.empty()) {
      token = forced_action[static_cast<std::size_t>(i - thought_len)];
      if (token < 0 || token >= params.vocab()) throw std::out_of_range("forced token outside vocabulary");
    } else {
      token = rng.categorical(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
    }
    out.tokens.push_back(token);
    out.logprobs.push_back(std::log(p[token]));
    out.entropies.push_back(token_entropy(p));
  }
  return out;
}

double sequence_logprob(const PolicyParams& params, std::span<const Vector> features,
                        std::span<const int> tokens) {
  check_tokens(tokens, params.vocab());
  double total = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Vector p = token_distribution(params, features[i]);
    total += std::log(p[tokens[i]]);
  }
  return total;
}

double sequence_logprob(const PolicyParams& params, const Featurizer& featurizer, const Context& ctx,
                        std::span<const int> tokens) {
  check_tokens(tokens, params.vocab());
  const auto features = featurizer.positions(ctx, tokens);
  return sequence_logprob(params, features, tokens);
}

Matrix sequence_logprob_gradient(const PolicyParams& params, std::span<const Vector> features,
                                 std::span<const int> tokens) {
  check_tokens(tokens, params.vocab());
  Matrix grad = Matrix::Zero(params.features(), params.vocab());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Vector g = -token_distribution(params, features[i]);
    g[tokens[i]] += 1.0;
    grad.noalias() += features[i] * g.transpose() / params.temperature;
  }
  return grad;
}

Matrix sequence_logprob_gradient(const PolicyParams& params, const Featurizer& featurizer,
                                 const Context& ctx, std::span<const int> tokens) {
  check_tokens(tokens, params.vocab());
  const auto features = featurizer.positions(ctx, tokens);
  return sequence_logprob_gradient(params, features, tokens);
}

double categorical_kl(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw std::invalid_argument("categorical_kl: size mismatch");
  double kl = 0.0;
  for (Eigen::Index v = 0; v < p.size(); ++v) {
    if (p[v] > 0.0) kl += p[v] * (std::log(p[v]) - std::log(q[v]));
  }
  return std::max(0.0, kl);
}

double exact_token_kl(const PolicyParams& a, const PolicyParams& b, std::span<const Vector> features) {
  if (a.vocab() != b.vocab()) throw std::invalid_argument("exact_token_kl: vocabulary mismatch");
  double total = 0.0;
  for (const auto& phi : features) total += categorical_kl(token_distribution(a, phi), token_distribution(b, phi));
  return total;
}

double exact_token_kl(const PolicyParams& a, const PolicyParams& b, const Featurizer& featurizer,
                      const Context& ctx, std::span<const int> tokens) {
  check_tokens(tokens, a.vocab());
  const auto features = featurizer.positions(ctx, tokens);
  return exact_token_kl(a, b, features);
}

Matrix exact_token_kl_gradient(const PolicyParams& a, const PolicyParams& b,
                               std::span<const Vector> features) {
  Matrix grad = Matrix::Zero(a.features(), a.vocab());
  for (const auto& phi : features) {
    const Vector p = token_distribution(a, phi);
    const Vector q = token_distribution(b, phi);
    const Vector log_ratio = p.array().log() - q.array().log();
    const double kl = p.dot(log_ratio);
    const Vector g = p.array() * (log_ratio.array() - kl);
    grad.noalias() += phi * g.transpose() / a.temperature;
  }
  return grad;
}

void save_checkpoint(const std::filesystem::path& stem, const PolicyParams& params,
                     std::uint64_t featurizer_seed) {
  auto bin = stem;
  bin += ".bin";
  auto side = stem;
  side += ".json";
  auto tmp_bin = bin;
  tmp_bin += ".tmp";
  auto tmp_side = side;
  tmp_side += ".tmp";
  {
    std::ofstream out(tmp_bin, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(params.theta.data()),
              static_cast<std::streamsize>(params.theta.size() * sizeof(double)));
    if (!out) throw std::runtime_error("cannot write " + tmp_bin.string());
  }
  {
    std::ofstream out(tmp_side, std::ios::trunc);
    out << dump_compact(Json{{"version", params.version},
                             {"F", params.features()},
                             {"V", params.vocab()},
                             {"temperature", params.temperature},
                             {"seed", featurizer_seed}})
        << "\n";
    if (!out) throw std::runtime_error("cannot write " + tmp_side.string());
  }
  std::filesystem::rename(tmp_bin, bin);
  std::filesystem::rename(tmp_side, side);
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  auto bin = stem;
  bin += ".bin";
  auto side = stem;
  side += ".json";
  std::ifstream meta_in(side);
  if (!meta_in) throw std::runtime_error("missing checkpoint sidecar " + side.string());
  const Json meta = Json::parse(meta_in);
  Checkpoint ck;
  ck.params = PolicyParams::zeros(meta.at("F").get<int>(), meta.at("V").get<int>(),
                                  meta.at("temperature").get<double>());
  ck.params.version = meta.at("version").get<ModelVersion>();
  ck.seed = meta.at("seed").get<std::uint64_t>();
  std::ifstream in(bin, std::ios::binary);
  in.read(reinterpret_cast<char*>(ck.params.theta.data()),
          static_cast<std::streamsize>(ck.params.theta.size() * sizeof(double)));
  if (!in || in.gcount() != static_cast<std::streamsize>(ck.params.theta.size() * sizeof(double))) {
    throw std::runtime_error("truncated checkpoint " + bin.string());
  }
  return ck;
}

}  // namespace dart
