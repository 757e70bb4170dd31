// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run every criterion
//   acceptance --only N   run criterion N; exit status reflects it

#include <csignal>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "dart/report.hpp"
#include "dart/sim_kernel.hpp"
#include "dart/system.hpp"

namespace fs = std::filesystem;
using namespace dart;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  static const std::string tag = std::to_string(std::random_device{}());
  const auto p = fs::temp_directory_path() / ("dart_accept_" + tag) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

PolicyParams random_params(int f, int v, double scale, Rng& rng) {
  auto p = PolicyParams::zeros(f, v, 1.0);
  for (int i = 0; i < f; ++i) {
    for (int j = 0; j < v; ++j) p.theta(i, j) = scale * (2 * rng.uniform() - 1);
  }
  return p;
}

// Fourth-order central difference along theta(i, j).
double five_point(const PolicyParams& p, int i, int j, const std::function<double(const PolicyParams&)>& f) {
  const double h = 1e-4;
  auto at = [&](double d) {
    auto q = p;
    q.theta(i, j) += d;
    return f(q);
  };
  return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

// ---------------------------------------------------------------- criterion 1

Verdict math_oracles() {
  double worst_lp = 0.0, worst_kl = 0.0, worst_obj = 0.0;
  int coords = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(Rng::mix(0xacce97, seed));
    const int F = 32, V = 16;
    const Featurizer f(F, V, 4, seed);
    const auto p = random_params(F, V, 0.7, rng);
    const auto ref = random_params(F, V, 0.7, rng);
    std::vector<PreparedStep> steps;
    for (int k = 0; k < 8; ++k) {
      Context ctx;
      for (int i = 0; i < 3; ++i) ctx.task_tokens.push_back(rng.below(V));
      for (int i = 0; i < 5; ++i) ctx.state.push_back(rng.below(V));
      ctx.history.push_back({{rng.below(V)}, {rng.below(V)}, {rng.below(V)}});
      PreparedStep s;
      s.tokens = {rng.below(V), rng.below(V)};
      s.features = f.positions(ctx, s.tokens);
      s.advantage = 4 * rng.uniform() - 2;
      s.logp_old = sequence_logprob(p, s.features, s.tokens) + 0.8 * (rng.uniform() - 0.5);
      s.logp_rollout = s.logp_old + 2.0 * (rng.uniform() - 0.3);
      steps.push_back(std::move(s));
    }
    const TrainerConfig cfg;
    const auto& probe = steps.front();
    const auto g_lp = sequence_logprob_gradient(p, probe.features, probe.tokens);
    const auto g_kl = exact_token_kl_gradient(p, ref, probe.features);
    const auto g_obj = grpo_objective(steps, p, ref, cfg).gradient;
    for (int k = 0; k < 20; ++k, ++coords) {
      const int i = rng.below(F), j = rng.below(V);
      const double fd_lp = five_point(p, i, j, [&](const PolicyParams& q) {
        return sequence_logprob(q, probe.features, probe.tokens);
      });
      const double fd_kl =
          five_point(p, i, j, [&](const PolicyParams& q) { return exact_token_kl(q, ref, probe.features); });
      const double fd_obj =
          five_point(p, i, j, [&](const PolicyParams& q) { return grpo_objective(steps, q, ref, cfg).value; });
      worst_lp = std::max(worst_lp, rel_err(g_lp(i, j), fd_lp));
      worst_kl = std::max(worst_kl, rel_err(g_kl(i, j), fd_kl));
      worst_obj = std::max(worst_obj, rel_err(g_obj(i, j), fd_obj));
    }
  }

  Rng rng(99);
  double adv_mean = 0.0, adv_std = 0.0;
  double min_kept = 1.0;
  bool gate_ok = true;
  double w_min = 1.0, w_max = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + rng.below(100);
    std::vector<double> r;
    for (int i = 0; i < n; ++i) r.push_back(rng.below(2));
    if (std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; })) r[0] = 1 - r[0];
    const auto a = compute_advantages(r);
    double m = 0.0, v = 0.0;
    for (double x : a) m += x;
    m /= n;
    for (double x : a) v += (x - m) * (x - m);
    adv_mean = std::max(adv_mean, std::abs(m));
    adv_std = std::max(adv_std, std::abs(std::sqrt(v / n) - 1.0));

    std::vector<double> ent;
    for (int i = 0; i < n; ++i) ent.push_back(trial % 4 == 0 ? 0.25 * rng.below(4) : rng.uniform());
    const auto keep = entropy_gate(ent, 0.2);
    std::vector<double> sorted = ent;
    std::sort(sorted.begin(), sorted.end());
    const double threshold = sorted[static_cast<std::size_t>(std::floor(0.2 * n))];
    int kept = 0;
    for (int i = 0; i < n; ++i) {
      if (!keep[static_cast<std::size_t>(i)]) continue;
      ++kept;
      gate_ok = gate_ok && ent[static_cast<std::size_t>(i)] >= threshold;
    }
    min_kept = std::min(min_kept, static_cast<double>(kept) / n);

    for (int i = 0; i < 10; ++i) {
      const double w = is_weight(-30 * rng.uniform(), -30 * rng.uniform(), 1.0);
      w_min = std::min(w_min, w);
      w_max = std::max(w_max, w);
    }
  }
  const bool pass = worst_lp < 1e-5 && worst_kl < 1e-5 && worst_obj < 1e-5 && adv_mean < 1e-9 && adv_std < 1e-9 &&
                    min_kept >= 0.8 && gate_ok && w_min > 0.0 && w_max <= 1.0;
  return {pass, fmt("FD rel err logp %.1e kl %.1e objective %.1e over %d coords (tol 1e-5); adv |mean| %.1e "
                    "|std-1| %.1e; gate min kept %.2f; IS in [%.2e, %.2f]",
                    worst_lp, worst_kl, worst_obj, coords, adv_mean, adv_std, min_kept, w_min, w_max)};
}

// ---------------------------------------------------------------- criterion 2

Verdict scheduling_ordering() {
  int ordered = 0, strict = 0, varied = 0;
  const int n = 50;
  for (int i = 0; i < n; ++i) {
    double u[3];
    int k = 0;
    bool variance = false;
    for (auto mode : {SamplingMode::batch, SamplingMode::task, SamplingMode::rollout}) {
      auto c = ordering_scenario(2024, i);
      c.engine.sampling = mode;
      if (k == 0) {
        std::vector<double> durations;
        for (const auto& t : scenario_tasks(c)) {
          for (int s : t.rollout_steps) durations.push_back(s * t.step_latency);
        }
        variance = *std::max_element(durations.begin(), durations.end()) >
                   *std::min_element(durations.begin(), durations.end());
      }
      u[k++] = utilization(simulate(c), EntityClass::env);
    }
    const bool o = u[2] >= u[1] && u[1] >= u[0];
    const bool s = u[2] > u[1] && u[1] > u[0];
    ordered += o;
    varied += variance;
    strict += variance ? s : 1;
  }
  return {ordered == n && strict == n,
          fmt("rollout >= task >= batch in %d/%d scenarios; strict in %d/%d (%d with duration variance)", ordered, n,
              strict, n, varied)};
}

// ---------------------------------------------------------------- criterion 3

Verdict sync_availability() {
  auto per = sync_scenario(1);
  auto all = per;
  all.engine.sync = SyncMode::all_worker;
  const auto rp = simulate(per);
  const auto ra = simulate(all);
  const int w = per.engine.workers;
  const bool pass = rp.min_serving >= w - 1 && ra.sync_updates > 0 && ra.zero_serving_intervals >= ra.sync_updates &&
                    rp.env_blocked_time <= 0.25 * ra.env_blocked_time;
  return {pass, fmt("per-worker min serving %d (need >= %d); all-worker %d zero-availability intervals for %d "
                    "updates; env-blocked %.1f vs %.1f (ratio %.3f, need <= 0.25)",
                    rp.min_serving, w - 1, ra.zero_serving_intervals, ra.sync_updates, rp.env_blocked_time,
                    ra.env_blocked_time, ra.env_blocked_time > 0 ? rp.env_blocked_time / ra.env_blocked_time : 0.0)};
}

// ---------------------------------------------------------------- criterion 4

Verdict decoupling_ratios() {
  const auto base = reference_scenario(1);
  const auto c = simulate(coupled_variant(base));
  const auto d = simulate(decoupled_variant(base));
  const double tp = throughput(d) / throughput(c);
  const double eu = utilization(d, EntityClass::env) / utilization(c, EntityClass::env);
  const double wu = utilization(d, EntityClass::worker) / utilization(c, EntityClass::worker);
  return {tp >= 1.5 && eu >= 3.0 && wu >= 1.2,
          fmt("throughput %.2fx (>= 1.5, ref 1.9x), env util %.2fx (>= 3, ref 5.5x), worker util %.2fx "
              "(>= 1.2, ref 1.6x); actions/min %.0f -> %.0f",
              tp, eu, wu, throughput(c), throughput(d))};
}

// ------------------------------------------------------------- criteria 5, 6

RunConfig with(const KeyValues& kv) { return run_config_from_key_values(kv); }

const RunResult& default_run(std::uint64_t seed) {
  static std::map<std::uint64_t, RunResult> cache;
  auto it = cache.find(seed);
  if (it == cache.end()) {
    const auto c = with({{"seed", std::to_string(seed)}});
    it = cache.emplace(seed, run_training(c, scratch("default_" + std::to_string(seed)))).first;
  }
  return it->second;
}

// Fraction of tasks with at least one success in eight initial-policy rollouts.
double initial_pass_at_8(const RunConfig& c) {
  const Featurizer f(c.features, c.env.vocab, c.rollout.history_window, Rng::mix(c.seed, 0xfea));
  EnvInstance env(0, c.env);
  Worker worker;
  worker.snapshot = std::make_shared<const PolicyParams>(PolicyParams::zeros(c.features, c.env.vocab, c.temperature));
  int solved = 0;
  const auto suite = make_suite(c);
  for (const auto& t : suite) {
    bool any = false;
    for (int k = 0; k < 8; ++k) {
      RolloutRequest req{t.task_id, "pass8/" + t.task_id, k, 0, c.env.global_max_steps, 0.0};
      any = any || run_rollout(t, req, env, worker, f, c.rollout, Rng::mix(c.seed ^ 0x9a55, stable_hash(req.trajectory_id()))).reward >= 1.0;
    }
    solved += any;
  }
  return static_cast<double>(solved) / static_cast<double>(suite.size());
}

Verdict curation_behavior() {
  std::vector<std::string> parts;
  bool pass = true;

  // (a), (b) on the default run.
  const auto& r = default_run(1);
  const double n0 = r.evals.front().mean_rollouts;
  std::int64_t crossed = -1;
  for (const auto& e : r.evals) {
    if (e.success > 0.7) {
      crossed = e.iteration;
      break;
    }
  }
  double n_after = n0;
  for (const auto& e : r.evals) {
    if (crossed >= 0 && e.iteration >= crossed) n_after = std::min(n_after, e.mean_rollouts);
  }
  const bool a = crossed >= 0 && n0 == 8.0 && n_after <= 6.0;
  pass = pass && a;
  parts.push_back(fmt("(a) %s mean N %.2f -> %.2f after success passed 0.7 at iteration %lld", a ? "ok" : "FAIL", n0,
                      n_after, static_cast<long long>(crossed)));

  // Mean online length over the first suite round versus the groups closed after the crossing.
  const std::size_t round = static_cast<std::size_t>(with({}).suite.tasks);
  double len0 = 0.0, len1 = 0.0;
  std::size_t k0 = 0, k1 = 0;
  for (std::size_t i = 0; i < r.groups.size(); ++i) {
    const auto& g = r.groups[i];
    if (i < round) {
      len0 += g.mean_length;
      ++k0;
    } else if (crossed >= 0 && g.iteration >= crossed) {
      len1 += g.mean_length;
      ++k1;
    }
  }
  len0 = k0 ? len0 / static_cast<double>(k0) : 0.0;
  len1 = k1 ? len1 / static_cast<double>(k1) : len0;
  const double drop = len0 > 0 ? 1.0 - len1 / len0 : 0.0;
  const bool b = k1 > 0 && drop >= 0.30;
  pass = pass && b;
  parts.push_back(fmt("(b) %s mean sampled length %.1f -> %.1f (-%.0f%%, need >= 30%%)", b ? "ok" : "FAIL", len0, len1,
                      100 * drop));

  // (c) hard sub-suite with and without the pre-populated pool.
  const KeyValues hard{{"seed", "1"}, {"suite_tasks", "10"}, {"difficulty_min", "4"}, {"difficulty_max", "5"}};
  const double pass8 = initial_pass_at_8(with(hard));
  auto no_pool_kv = hard;
  no_pool_kv["pool_per_task"] = "0";
  const auto with_pool = run_training(with(hard), scratch("hard_pool"));
  const auto without = run_training(with(no_pool_kv), scratch("hard_nopool"));
  const bool c = pass8 == 0.0 && with_pool.final_success > 0.3 && without.final_success < 0.05;
  pass = pass && c;
  parts.push_back(fmt("(c) %s initial pass@8 %.2f; final success with pool %.2f (> 0.3), without %.2f (< 0.05)",
                      c ? "ok" : "FAIL", pass8, with_pool.final_success, without.final_success));

  // (d) two-versions-stale workers, IS weighting on versus off.
  auto on_kv = KeyValues{{"seed", "1"}, {"forced_staleness", "2"}};
  auto off_kv = on_kv;
  off_kv["use_is_weight"] = "false";
  const auto on = run_training(with(on_kv), scratch("stale_is_on"));
  const auto off = run_training(with(off_kv), scratch("stale_is_off"));
  const bool d = off.diverged || off.final_success <= on.final_success - 0.15;
  pass = pass && d;
  parts.push_back(fmt("(d) %s stale by 2: IS on %.2f, IS off %.2f%s (need off diverged or >= 15 points lower)",
                      d ? "ok" : "FAIL", on.final_success, off.final_success, off.diverged ? " (diverged)" : ""));

  std::string detail;
  for (const auto& p : parts) detail += (detail.empty() ? "" : "; ") + p;
  return {pass, detail};
}

Verdict end_to_end() {
  std::vector<double> initial, final;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto& r = default_run(seed);
    initial.push_back(r.initial_success);
    final.push_back(r.final_success);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
  };
  const double i = median(initial), f = median(final);
  return {i < 0.2 && f > 0.8, fmt("median success over seeds 1-3: %.3f -> %.3f (need < 0.2 -> > 0.8); per seed "
                                  "%.2f/%.2f/%.2f",
                                  i, f, final[0], final[1], final[2])};
}

// ---------------------------------------------------------------- criterion 7

Verdict durability() {
  const auto out = scratch("killed");
  const auto config = with({{"seed", "4"}, {"budget", "300"}});

  const pid_t child = fork();
  if (child == 0) {
    run_training(config, out);
    _exit(0);
  }
  // Kill once a good number of iterations are committed.
  const auto deadline = Clock::now() + std::chrono::seconds(60);
  while (Clock::now() < deadline) {
    if (read_jsonl(out / "store/current_model.jsonl").size() >= 60) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  ::kill(child, SIGKILL);
  int status = 0;
  ::waitpid(child, &status, 0);
  const bool killed = WIFSIGNALED(status);

  const auto runs_before = read_jsonl(out / "store/rollout_run.jsonl");
  const auto events_before = read_jsonl(out / "store/dataset_usage_events.jsonl");
  const auto models_before = read_jsonl(out / "store/current_model.jsonl");

  const auto resumed = run_training(config, out, true);
  const auto runs_after = read_jsonl(out / "store/rollout_run.jsonl");
  const auto events_after = read_jsonl(out / "store/dataset_usage_events.jsonl");
  bool kept = runs_after.size() >= runs_before.size() && events_after.size() >= events_before.size();
  for (std::size_t i = 0; kept && i < runs_before.size(); ++i) kept = runs_after[i] == runs_before[i];
  for (std::size_t i = 0; kept && i < events_before.size(); ++i) kept = events_after[i] == events_before[i];
  bool readable = check_store(out / "store").empty();
  {
    DataManager dm(out / "store", config.curation, config.seed);
    for (const auto& row : runs_before) {
      readable = readable && dm.store().contains(row.at("trajectory_id").get<std::string>());
    }
  }
  const bool finished = resumed.iterations == config.budget;

  auto det = with({{"seed", "5"}, {"budget", "100"}, {"record_trace", "true"}});
  const auto a = run_training(det, scratch("det_a"));
  const auto b = run_training(det, scratch("det_b"));
  const bool same_trace = !a.timeline.trace.empty() && trace_jsonl(a.timeline) == trace_jsonl(b.timeline);
  const bool same_params = a.final_params.theta == b.final_params.theta && a.final_params.version == b.final_params.version;

  const bool pass = killed && kept && readable && finished && same_trace && same_params;
  return {pass, fmt("killed at %zu committed iterations (%s); %zu trajectories and %zu usage events before kill %s; "
                    "store %s; resumed to %lld/%lld; reruns: trace %s, params %s",
                    models_before.size(), killed ? "SIGKILL" : "not killed", runs_before.size(), events_before.size(),
                    kept ? "all retained" : "LOST", readable ? "readable" : "UNREADABLE",
                    static_cast<long long>(resumed.iterations), static_cast<long long>(config.budget),
                    same_trace ? "identical" : "DIFFERENT", same_params ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"math oracles", math_oracles},
      {"scheduling ordering", scheduling_ordering},
      {"sync availability", sync_availability},
      {"decoupling ratios", decoupling_ratios},
      {"curation behavior", curation_behavior},
      {"end-to-end learning", end_to_end},
      {"durability and determinism", durability},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only && only != id) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("criterion %d %-28s %s  [%.1fs] %s\n", id, criteria[i].first, v.pass ? "PASS" : "FAIL", secs,
                v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  std::error_code ec;
  fs::remove_all(scratch("x").parent_path(), ec);
  return failed == 0 ? 0 : 1;
}
