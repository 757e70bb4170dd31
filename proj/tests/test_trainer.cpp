#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dart/trainer.hpp"

using namespace dart;

namespace {

PolicyParams random_params(int f, int v, double scale, Rng& rng) {
  auto p = PolicyParams::zeros(f, v, 1.0);
  for (int i = 0; i < f; ++i) {
    for (int j = 0; j < v; ++j) p.theta(i, j) = scale * (rng.uniform() * 2 - 1);
  }
  return p;
}

std::vector<PreparedStep> random_steps(const PolicyParams& p, const Featurizer& f, Rng& rng, int n) {
  std::vector<PreparedStep> steps;
  for (int k = 0; k < n; ++k) {
    Context ctx;
    for (int i = 0; i < 4; ++i) ctx.state.push_back(rng.below(f.vocab()));
    PreparedStep s;
    s.tokens = {rng.below(f.vocab()), rng.below(f.vocab())};
    s.features = f.positions(ctx, s.tokens);
    s.advantage = rng.uniform() * 4 - 2;
    // Ratios spread across both sides of the clip range.
    s.logp_old = sequence_logprob(p, s.features, s.tokens) + (rng.uniform() - 0.5) * 0.8;
    s.logp_rollout = s.logp_old + (rng.uniform() - 0.3) * 2.0;
    steps.push_back(std::move(s));
  }
  return steps;
}

StepGroup synthetic_group(const Featurizer& f, const PolicyParams& p, Rng& rng, int trajectories, int steps_each) {
  std::vector<Trajectory> ts;
  for (int t = 0; t < trajectories; ++t) {
    Trajectory tr;
    tr.task_id = "task";
    tr.trajectory_id = "g/" + std::to_string(t);
    tr.reward = t % 2 == 0 ? 1.0 : 0.0;
    for (int s = 0; s < steps_each; ++s) {
      StepRecord rec;
      rec.task_id = tr.task_id;
      rec.trajectory_id = tr.trajectory_id;
      rec.step_index = s;
      rec.state = {rng.below(f.vocab()), rng.below(f.vocab())};
      Rng draw(rng.next_u64());
      const auto sampled = sample_step(p, f, f.context_for(rec), draw, 1, 1);
      rec.thought = {sampled.tokens[0]};
      rec.action = {sampled.tokens[1]};
      rec.rollout_logprob = sampled.total_logprob();
      rec.token_entropies = sampled.entropies;
      tr.steps.push_back(rec);
    }
    ts.push_back(tr);
  }
  return make_step_group(ts);
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("advantages have mean zero and population std one") {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 2 + rng.below(60);
      std::vector<double> r;
      for (int i = 0; i < n; ++i) r.push_back(rng.below(2));
      if (std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; })) r[0] = 1.0 - r[0];
      const auto a = compute_advantages(r);
      double mean = 0.0;
      for (double x : a) mean += x;
      mean /= n;
      double var = 0.0;
      for (double x : a) var += (x - mean) * (x - mean);
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(std::sqrt(var / n) - 1.0) < 1e-9);
    }
  }

  TEST_CASE("advantages of a known group") {
    // Rewards {1,0,0,0}: mean 1/4, population std sqrt(3)/4.
    const auto a = compute_advantages(std::vector<double>{1, 0, 0, 0});
    CHECK(a[0] == doctest::Approx(3.0 / std::sqrt(3.0)));
    CHECK(a[1] == doctest::Approx(-1.0 / std::sqrt(3.0)));
  }

  TEST_CASE("advantages reject degenerate groups") {
    CHECK_THROWS_AS(compute_advantages(std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(compute_advantages(std::vector<double>{1.0, 1.0, 1.0}), std::invalid_argument);
  }

  TEST_CASE("entropy gate keeps at least 80 percent, all above the threshold") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 1 + rng.below(100);
      std::vector<double> h;
      for (int i = 0; i < n; ++i) h.push_back(trial % 3 == 0 ? rng.below(3) * 0.5 : rng.uniform());
      const auto keep = entropy_gate(h, 0.2);
      std::vector<double> sorted = h;
      std::sort(sorted.begin(), sorted.end());
      const double threshold = sorted[static_cast<std::size_t>(std::floor(0.2 * n))];
      int kept = 0;
      for (int i = 0; i < n; ++i) {
        if (keep[static_cast<std::size_t>(i)]) {
          ++kept;
          CHECK(h[static_cast<std::size_t>(i)] >= threshold);
        } else {
          CHECK(h[static_cast<std::size_t>(i)] < threshold);
        }
      }
      CHECK(kept >= 0.8 * n);
    }
  }

  TEST_CASE("importance weights lie in (0, 1] with cap one") {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
      const double w = is_weight(-20 * rng.uniform(), -20 * rng.uniform(), 1.0);
      CHECK(w > 0.0);
      CHECK(w <= 1.0);
    }
    CHECK(is_weight(-1.0, -3.0, 1.0) == 1.0);
    CHECK(is_weight(-3.0, -1.0, 1.0) == doctest::Approx(std::exp(-2.0)));
  }

  TEST_CASE("step loss matches a hand evaluation") {
    const Featurizer f(8, 4, 4, 1);
    Rng rng(4);
    const auto p = random_params(8, 4, 0.5, rng);
    const auto ref = random_params(8, 4, 0.5, rng);
    PreparedStep s;
    s.tokens = {1, 2};
    s.features = f.positions(Context{}, s.tokens);
    const double logp = sequence_logprob(p, s.features, s.tokens);
    s.logp_old = logp - std::log(1.5);  // ratio 1.5, above 1 + eps_high
    s.logp_rollout = s.logp_old + 0.5;  // weight exp(-0.5)
    TrainerConfig c;
    const double kl = exact_token_kl(p, ref, s.features);

    s.advantage = 2.0;
    auto l = grpo_step_loss(s, p, ref, c);
    CHECK(l.clipped);
    CHECK(l.value == doctest::Approx(std::exp(-0.5) * 1.28 * 2.0 - 0.1 * kl).epsilon(1e-12));

    s.advantage = -2.0;
    l = grpo_step_loss(s, p, ref, c);
    CHECK_FALSE(l.clipped);
    CHECK(l.value == doctest::Approx(std::exp(-0.5) * 1.5 * -2.0 - 0.1 * kl).epsilon(1e-12));

    c.use_is_weight = false;
    l = grpo_step_loss(s, p, ref, c);
    CHECK(l.weight == 1.0);
  }

  TEST_CASE("objective gradient matches central differences") {
    const double h = 1e-4;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(100 + seed);
      const Featurizer f(16, 8, 4, seed);
      const auto p = random_params(16, 8, 0.6, rng);
      const auto ref = random_params(16, 8, 0.6, rng);
      const auto steps = random_steps(p, f, rng, 6);
      TrainerConfig c;
      const auto g = grpo_objective(steps, p, ref, c).gradient;
      for (int k = 0; k < 20; ++k) {
        const int i = rng.below(16);
        const int j = rng.below(8);
        auto at = [&](double d) {
          auto q = p;
          q.theta(i, j) += d;
          return grpo_objective(steps, q, ref, c).value;
        };
        // Fourth-order stencil keeps rounding noise well below the tolerance.
        const double fd = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
        const double err = std::abs(g(i, j) - fd) / std::max({std::abs(g(i, j)), std::abs(fd), 1e-6});
        worst = std::max(worst, err);
      }
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("one iteration ascends the objective and bumps the version") {
    const Featurizer f(16, 8, 4, 3);
    Rng rng(5);
    const auto p0 = random_params(16, 8, 0.3, rng);
    TrainerConfig c;
    c.learning_rate = 0.05;
    Trainer trainer(c, f, p0);
    const auto group = synthetic_group(f, p0, rng, 4, 3);
    const auto steps = trainer.prepare(group, p0);
    const double before = grpo_objective(steps, p0, trainer.reference(), c).value;
    const auto r = trainer.train_iteration(group);
    REQUIRE(r.applied);
    CHECK(r.params.version == p0.version + 1);
    CHECK(trainer.iteration() == 1);
    CHECK(grpo_objective(steps, r.params, trainer.reference(), c).value > before);
    CHECK(std::abs(r.metrics.mean_advantage) < 1e-9);
    CHECK(r.metrics.std_advantage == doctest::Approx(1.0));
    CHECK(r.metrics.gated_fraction <= 0.2 + 1e-12);
  }

  TEST_CASE("groups without reward variance are rejected untouched") {
    const Featurizer f(16, 8, 4, 3);
    Rng rng(6);
    const auto p0 = random_params(16, 8, 0.3, rng);
    Trainer trainer(TrainerConfig{}, f, p0);
    auto group = synthetic_group(f, p0, rng, 4, 2);
    std::fill(group.rewards.begin(), group.rewards.end(), 1.0);
    const auto r = trainer.train_iteration(group);
    CHECK_FALSE(r.applied);
    CHECK(trainer.iteration() == 0);
    CHECK(trainer.params().theta == p0.theta);
  }

  TEST_CASE("config validation") {
    TrainerConfig c;
    CHECK_NOTHROW(c.validate());
    c.learning_rate = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.entropy_keep_quantile = 1.0;
    CHECK_THROWS(c.validate());
    c = {};
    c.is_cap = 0;
    CHECK_THROWS(c.validate());
  }
}
