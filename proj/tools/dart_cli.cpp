#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dart/config.hpp"
#include "dart/jsonl.hpp"
#include "dart/live.hpp"
#include "dart/report.hpp"
#include "dart/sim_kernel.hpp"
#include "dart/system.hpp"

namespace fs = std::filesystem;
using namespace dart;

namespace {

// Reference hardware values for the coupled -> decoupled improvement factors.
constexpr double kRefThroughput = 1.9;
constexpr double kRefEnvUtil = 5.5;
constexpr double kRefWorkerUtil = 1.6;

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Config file, then DART_* environment variables, then --set pairs.
KeyValues gather(const std::string& config_path, const std::set<std::string>& known,
                 const std::vector<std::string>& sets) {
  KeyValues kv;
  if (!config_path.empty()) kv = load_key_values(config_path);
  apply_env_overrides(kv, known);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

std::string fixed(double v, int digits = 3) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

struct TrainArgs {
  std::string config;
  std::string out = "runs/train";
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::int64_t budget = -1;
  bool resume = false;
  bool live = false;
  double time_scale = 0.001;
  double max_wall = 120.0;
};

int cmd_train(const TrainArgs& a, bool seed_given) {
  auto kv = gather(a.config, run_config_keys(), a.sets);
  if (seed_given) kv["seed"] = std::to_string(a.seed);
  if (a.budget >= 0) kv["budget"] = std::to_string(a.budget);
  const RunConfig config = run_config_from_key_values(kv);
  const fs::path out(a.out);
  fs::create_directories(out);

  if (a.live) {
    if (a.resume) throw std::invalid_argument("--resume is not supported with --live");
    LiveOptions opts;
    opts.seconds_per_unit = a.time_scale;
    opts.max_wall_seconds = a.max_wall;
    const auto r = run_live(config, out, opts);
    const Json summary{{"mode", "live"},
                       {"iterations", r.iterations},
                       {"trajectories", r.trajectories},
                       {"pool_injections", r.pool_injections},
                       {"syncs", r.syncs},
                       {"max_staleness", r.max_staleness},
                       {"initial_success", r.initial_success},
                       {"final_success", r.final_success},
                       {"wall_seconds", r.wall_seconds},
                       {"timed_out", r.timed_out},
                       {"diverged", r.diverged}};
    write_file(out / "summary.json", summary.dump(2) + "\n");
    std::cout << "live run: " << r.iterations << " iterations, " << r.trajectories << " trajectories, success "
              << fixed(r.initial_success) << " -> " << fixed(r.final_success) << " in " << fixed(r.wall_seconds, 1)
              << " s\n";
    return r.diverged ? 1 : 0;
  }

  const auto r = run_training(config, out, a.resume);
  std::ostringstream evals;
  evals << "iteration,time,success,mean_rollouts,mean_length_cap\n";
  for (const auto& e : r.evals) {
    evals << e.iteration << ',' << e.time << ',' << e.success << ',' << e.mean_rollouts << ',' << e.mean_length_cap
          << '\n';
  }
  write_file(out / "evals.csv", evals.str());
  const Json summary{{"mode", "sim"},
                     {"seed", config.seed},
                     {"budget", config.budget},
                     {"iterations", r.iterations},
                     {"initial_success", r.initial_success},
                     {"final_success", r.final_success},
                     {"pool_injections", r.pool_injections},
                     {"virtual_duration", r.timeline.duration},
                     {"throughput_per_minute", throughput(r.timeline)},
                     {"diverged", r.diverged},
                     {"divergence", r.divergence},
                     {"stalled", r.stalled}};
  write_file(out / "summary.json", summary.dump(2) + "\n");
  std::cout << "trained " << r.iterations << " iterations (budget " << config.budget << "), success "
            << fixed(r.initial_success) << " -> " << fixed(r.final_success) << ", pool injections "
            << r.pool_injections << ", virtual time " << fixed(r.timeline.duration, 0) << "\n";
  if (r.stalled) std::cout << "stopped early: rollout cap reached before the budget\n";
  if (r.diverged) {
    std::cerr << "training diverged: " << r.divergence << "\n";
    return 1;
  }
  return 0;
}

struct SimulateArgs {
  std::string config;
  std::string preset = "reference";
  std::string out = "runs/simulate";
  std::string modes = "batch,task,rollout";
  std::string sync = "all,per-worker";
  std::vector<std::string> sets;
  std::uint64_t seed = 1;
  bool gantt = false;
};

ScenarioConfig preset_scenario(const std::string& name, std::uint64_t seed) {
  if (name == "reference") return reference_scenario(seed);
  if (name == "sync") return sync_scenario(seed);
  if (name == "default") {
    ScenarioConfig c;
    c.seed = seed;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (reference, sync, default)");
}

Json report_row(const std::string& label, const TimelineReport& r) {
  return Json{{"label", label},
              {"duration", r.duration},
              {"env_utilization", utilization(r, EntityClass::env)},
              {"worker_utilization", utilization(r, EntityClass::worker)},
              {"throughput_per_minute", throughput(r)},
              {"env_blocked_time", r.env_blocked_time},
              {"min_serving", r.min_serving},
              {"zero_serving_intervals", r.zero_serving_intervals},
              {"train_iterations", r.train_iterations}};
}

void write_report_files(const fs::path& dir, const TimelineReport& r, bool gantt) {
  fs::create_directories(dir);
  write_file(dir / "utilization.csv", utilization_csv(r));
  if (!r.trace.empty()) write_file(dir / "trace.jsonl", trace_jsonl(r));
  if (gantt) {
    write_file(dir / "gantt.txt", ascii_gantt(r));
    write_file(dir / "gantt.svg", svg_gantt(r));
  }
}

int cmd_simulate(const SimulateArgs& a, bool seed_given) {
  auto kv = gather(a.config, scenario_keys(), a.sets);
  if (seed_given) kv["seed"] = std::to_string(a.seed);
  const std::uint64_t seed = seed_given ? a.seed : 1;
  const ScenarioConfig base = scenario_from_key_values(kv, preset_scenario(a.preset, seed));
  const fs::path out(a.out);
  fs::create_directories(out);

  std::vector<SamplingMode> modes;
  for (const auto& m : split_list(a.modes)) modes.push_back(sampling_mode_from_string(m));
  std::vector<SyncMode> syncs;
  for (const auto& s : split_list(a.sync)) syncs.push_back(sync_mode_from_string(s));
  if (modes.empty() || syncs.empty()) throw std::invalid_argument("--modes and --sync need at least one entry");

  Json runs = Json::array();
  std::map<std::pair<SamplingMode, SyncMode>, TimelineReport> reports;
  std::printf("%-8s %-11s %9s %8s %8s %10s %10s %5s %5s\n", "mode", "sync", "duration", "env_u", "worker_u",
              "actions/m", "blocked", "min_s", "zero");
  for (auto mode : modes) {
    for (auto sync : syncs) {
      ScenarioConfig c = base;
      c.engine.sampling = mode;
      c.engine.sync = sync;
      c.engine.coupled = false;
      const auto r = simulate(c);
      const std::string label = to_string(mode) + "_" + to_string(sync);
      write_report_files(out / label, r, a.gantt);
      runs.push_back(report_row(label, r));
      std::printf("%-8s %-11s %9.1f %8.3f %8.3f %10.2f %10.1f %5d %5d\n", to_string(mode).c_str(),
                  to_string(sync).c_str(), r.duration, utilization(r, EntityClass::env),
                  utilization(r, EntityClass::worker), throughput(r), r.env_blocked_time, r.min_serving,
                  r.zero_serving_intervals);
      reports.emplace(std::make_pair(mode, sync), r);
    }
  }

  Json summary{{"runs", runs}};
  if (modes.size() > 1) {
    std::cout << "\nenv utilization by sampling mode (" << to_string(syncs.front()) << " sync):";
    bool ordered = true;
    double prev = -1.0;
    for (auto mode : {SamplingMode::batch, SamplingMode::task, SamplingMode::rollout}) {
      const auto it = reports.find({mode, syncs.front()});
      if (it == reports.end()) continue;
      const double u = utilization(it->second, EntityClass::env);
      std::cout << " " << to_string(mode) << "=" << fixed(u);
      if (u < prev) ordered = false;
      prev = u;
    }
    std::cout << (ordered ? "  (ordered)\n" : "  (NOT ordered)\n");
    summary["ordering_holds"] = ordered;
  }
  if (syncs.size() > 1) {
    const auto mode = modes.back();
    std::cout << "env-blocked time by sync mode (" << to_string(mode) << " sampling):";
    for (auto sync : syncs) {
      std::cout << " " << to_string(sync) << "=" << fixed(reports.at({mode, sync}).env_blocked_time, 1);
    }
    std::cout << "\n";
  }

  const auto coupled = simulate(coupled_variant(base));
  const auto decoupled = simulate(decoupled_variant(base));
  write_report_files(out / "coupled", coupled, a.gantt);
  write_report_files(out / "decoupled", decoupled, a.gantt);
  struct Row {
    const char* name;
    double c;
    double d;
    double reference;
  };
  const Row rows[] = {
      {"training throughput (actions/min)", throughput(coupled), throughput(decoupled), kRefThroughput},
      {"env utilization", utilization(coupled, EntityClass::env), utilization(decoupled, EntityClass::env),
       kRefEnvUtil},
      {"worker utilization", utilization(coupled, EntityClass::worker), utilization(decoupled, EntityClass::worker),
       kRefWorkerUtil},
  };
  std::printf("\n%-36s %10s %10s %8s %8s\n", "metric", "coupled", "decoupled", "ratio", "ref");
  Json ratios = Json::array();
  for (const auto& r : rows) {
    const double ratio = r.c > 0.0 ? r.d / r.c : 0.0;
    std::printf("%-36s %10.3f %10.3f %7.2fx %7.1fx\n", r.name, r.c, r.d, ratio, r.reference);
    ratios.push_back(Json{{"metric", r.name}, {"coupled", r.c}, {"decoupled", r.d}, {"ratio", ratio},
                          {"reference_ratio", r.reference}});
  }
  summary["ratios"] = ratios;
  write_file(out / "summary.json", summary.dump(2) + "\n");
  return 0;
}

struct ReportArgs {
  std::string store;
  std::string out;
  bool svg = false;
};

int cmd_report(const ReportArgs& a) {
  fs::path store(a.store);
  if (fs::is_directory(store / "store")) store /= "store";
  const fs::path out = a.out.empty() ? store.parent_path() / "report" : fs::path(a.out);
  StoreReport rep;
  try {
    rep = build_report(store);
  } catch (const StoreError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  write_file(out / "curves.csv", curves_csv(rep));
  write_file(out / "suite.csv", suite_csv(rep));
  const Json summary = summary_json(rep);
  write_file(out / "summary.json", summary.dump(2) + "\n");
  if (a.svg) write_file(out / "suite.svg", suite_svg(rep));
  std::cout << "tasks " << rep.tasks << ", trajectories " << rep.trajectories << ", groups " << rep.groups
            << " (trainable " << rep.trainable_groups << ", all-success " << rep.skipped_groups << ", no-positive "
            << rep.no_positive_groups << "), iterations " << rep.iterations << "\n";
  std::cout << "pool injections " << rep.pool_injections << " (usage events " << rep.pool_injection_events << ")\n";
  if (!rep.suite.empty()) {
    const auto& first = rep.suite.front();
    const auto& last = rep.suite.back();
    std::cout << "suite success EMA " << fixed(first.mean_success_ema) << " -> " << fixed(last.mean_success_ema)
              << ", mean N " << fixed(first.mean_rollout_count, 2) << " -> " << fixed(last.mean_rollout_count, 2)
              << ", mean sampled length " << fixed(first.mean_sampled_length, 1) << " -> "
              << fixed(last.mean_sampled_length, 1) << "\n";
  }
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoupled asynchronous RL trainer for a toy multi-step agent, with a discrete-event simulator"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Pool pre-population, then asynchronous training to the budget");
  t->add_option("--config", train.config, "key=value config file")->check(CLI::ExistingFile);
  auto* train_seed = t->add_option("--seed", train.seed, "Global seed");
  t->add_option("--out", train.out, "Output directory")->capture_default_str();
  t->add_option("--budget", train.budget, "Training iterations");
  t->add_flag("--resume", train.resume, "Continue from the last committed iteration in --out");
  t->add_flag("--live", train.live, "Wall-clock mode with concurrent env, sync and trainer threads");
  t->add_option("--time-scale", train.time_scale, "Live mode: seconds per virtual time unit")->capture_default_str();
  t->add_option("--max-wall", train.max_wall, "Live mode: wall-clock limit in seconds")->capture_default_str();
  t->add_option("--set", train.sets, "Config override key=value (repeatable)");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Scheduling and sync studies on the virtual clock");
  s->add_option("--config", sim.config, "key=value scenario file")->check(CLI::ExistingFile);
  s->add_option("--preset", sim.preset, "Base scenario: reference, sync or default")->capture_default_str();
  auto* sim_seed = s->add_option("--seed", sim.seed, "Scenario seed");
  s->add_option("--out", sim.out, "Output directory")->capture_default_str();
  s->add_option("--modes", sim.modes, "Sampling modes to run")->capture_default_str();
  s->add_option("--sync", sim.sync, "Sync modes to run (all, per-worker)")->capture_default_str();
  s->add_flag("--gantt", sim.gantt, "Also write ASCII and SVG Gantt charts");
  s->add_option("--set", sim.sets, "Scenario override key=value (repeatable)");

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Curves and counts from a trajectory store");
  r->add_option("store", rep.store, "Run directory or its store/ subdirectory")->required();
  r->add_option("--out", rep.out, "Output directory (default: <run>/report)");
  r->add_flag("--svg", rep.svg, "Also render suite curves to SVG");

  CLI11_PARSE(app, argc, argv);
  try {
    if (t->parsed()) return cmd_train(train, train_seed->count() > 0);
    if (s->parsed()) return cmd_simulate(sim, sim_seed->count() > 0);
    if (r->parsed()) return cmd_report(rep);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
