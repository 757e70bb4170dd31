#include <doctest.h>

#include <sstream>

#include "dart/sim_kernel.hpp"

using namespace dart;

namespace {

ScenarioConfig small(const KeyValues& extra = {}) {
  KeyValues kv{{"envs", "6"}, {"workers", "2"}, {"tasks", "6"}, {"rollouts", "3"}, {"rounds", "2"}};
  for (const auto& [k, v] : extra) kv[k] = v;
  return scenario_from_key_values(kv);
}

void check_timeline_invariants(const TimelineReport& r) {
  for (const auto& e : r.entities) {
    double prev_end = 0.0;
    for (const auto& iv : e.busy) {
      CHECK(iv.start >= prev_end - 1e-9);
      CHECK(iv.end >= iv.start);
      CHECK(iv.end <= r.duration + 1e-9);
      prev_end = iv.end;
    }
    CHECK(e.busy_time() <= r.duration + 1e-9);
  }
  for (auto cls : {EntityClass::env, EntityClass::worker}) {
    double busy = 0.0;
    int n = 0;
    for (const auto& e : r.entities) {
      if (e.cls != cls) continue;
      busy += e.busy_time();
      ++n;
    }
    CHECK(busy + idle_time(r, cls) == doctest::Approx(n * r.duration));
  }
}

}  // namespace

TEST_SUITE("sim_kernel") {
  TEST_CASE("events pop in (time, entity, id, sequence) order") {
    EventQueue q;
    q.push(2.0, EntityClass::env, 0, EventKind::step_end);
    q.push(1.0, EntityClass::worker, 0, EventKind::sync_end);
    q.push(1.0, EntityClass::env, 3, EventKind::step_end);
    q.push(1.0, EntityClass::env, 1, EventKind::step_end);
    q.push(1.0, EntityClass::env, 1, EventKind::rollout_done);
    const auto a = q.pop();
    const auto b = q.pop();
    CHECK((a.entity_id == 1 && a.kind == EventKind::step_end));
    CHECK((b.entity_id == 1 && b.kind == EventKind::rollout_done));
    CHECK(q.pop().entity_id == 3);
    CHECK(q.pop().entity == EntityClass::worker);
    CHECK(q.pop().time == 2.0);
    CHECK(q.empty());
    CHECK_THROWS(q.push(std::nan(""), EntityClass::env, 0, EventKind::reset));
  }

  TEST_CASE("hand-computed two-env timeline") {
    // Two envs share one worker; rollouts of 2 and 3 steps, inference 1, env step 1.
    // Env 0 busy 2 of 6, env 1 busy 3 of 6; the worker infers at [0,1], [2,3], [4,5].
    const auto c = scenario_from_key_values(
        {{"envs", "2"}, {"workers", "1"}, {"training", "false"}, {"task_table", "A:1:2,3"}, {"inference_latency", "1"}});
    const auto r = simulate(c);
    CHECK(r.duration == doctest::Approx(6.0));
    CHECK(utilization(r, EntityClass::env) == doctest::Approx(5.0 / 12.0));
    CHECK(utilization(r, EntityClass::worker) == doctest::Approx(0.5));
    CHECK(r.rollouts_completed == 2);
    CHECK(r.actions_produced == 5);
    check_timeline_invariants(r);
  }

  TEST_CASE("busy intervals are disjoint and conserve time across modes") {
    for (auto mode : {"batch", "task", "rollout"}) {
      for (auto sync : {"all", "per-worker"}) {
        for (auto coupled : {"false", "true"}) {
          if (std::string(coupled) == "true" && std::string(mode) != "batch") continue;
          const auto r = simulate(small({{"sampling", mode}, {"sync", sync}, {"coupled", coupled}}));
          CAPTURE(mode);
          CAPTURE(sync);
          check_timeline_invariants(r);
          CHECK(r.rollouts_completed == 6 * 3 * 2);
          CHECK(r.actions_consumed <= r.actions_produced);
          CHECK(r.min_serving >= 0);
        }
      }
    }
  }

  TEST_CASE("every issued unit finishes exactly once") {
    const auto r = simulate(small({{"sampling", "rollout"}}));
    std::set<std::pair<std::string, int>> seen;
    for (const auto& u : r.units) {
      CHECK(seen.insert({u.group_id, u.ordinal}).second);
      CHECK(u.finished_at >= u.issued_at);
      CHECK(u.steps >= 1);
    }
    CHECK(seen.size() == 36);
  }

  TEST_CASE("identical configs give identical traces") {
    const auto a = simulate(small({{"seed", "9"}}));
    const auto b = simulate(small({{"seed", "9"}}));
    CHECK(trace_jsonl(a) == trace_jsonl(b));
    CHECK(trace_jsonl(a) != trace_jsonl(simulate(small({{"seed", "10"}}))));
  }

  TEST_CASE("sampling modes order env utilization on randomized scenarios") {
    for (int i = 0; i < 10; ++i) {
      double u[3];
      int k = 0;
      for (auto mode : {SamplingMode::batch, SamplingMode::task, SamplingMode::rollout}) {
        auto c = ordering_scenario(11, i);
        c.engine.sampling = mode;
        u[k++] = utilization(simulate(c), EntityClass::env);
      }
      CAPTURE(i);
      CHECK(u[2] >= u[1]);
      CHECK(u[1] >= u[0]);
    }
  }

  TEST_CASE("uniform durations tie the sampling modes") {
    // One task per slot, identical rollouts: nothing to reorder.
    double u[3];
    int k = 0;
    for (auto mode : {"batch", "task", "rollout"}) {
      const auto c = scenario_from_key_values({{"envs", "4"},
                                               {"slots", "2"},
                                               {"workers", "4"},
                                               {"training", "false"},
                                               {"inference_latency", "0"},
                                               {"sampling", mode},
                                               {"task_table", "A:1:5,5;B:1:5,5"}});
      u[k++] = utilization(simulate(c), EntityClass::env);
    }
    CHECK(u[0] == doctest::Approx(u[1]));
    CHECK(u[1] == doctest::Approx(u[2]));
  }

  TEST_CASE("per-worker sync keeps W-1 workers serving; all-worker sync blacks out") {
    auto per = sync_scenario(3);
    per.engine.max_time = 600;
    auto all = per;
    all.engine.sync = SyncMode::all_worker;
    const auto rp = simulate(per);
    const auto ra = simulate(all);
    CHECK(rp.sync_updates > 0);
    CHECK(rp.min_serving >= per.engine.workers - 1);
    CHECK(rp.zero_serving_intervals == 0);
    CHECK(ra.zero_serving_intervals >= ra.sync_updates);
    CHECK(rp.env_blocked_time <= 0.25 * ra.env_blocked_time);
  }

  TEST_CASE("coupled batch training alternates with rollouts") {
    const auto r = simulate(small({{"sampling", "batch"}, {"coupled", "true"}, {"sync", "all"}}));
    // No env steps while the trainer runs.
    const EntityTimeline* trainer = nullptr;
    for (const auto& e : r.entities) {
      if (e.cls == EntityClass::trainer) trainer = &e;
    }
    REQUIRE(trainer);
    CHECK(trainer->busy_time() > 0.0);
    for (const auto& e : r.entities) {
      if (e.cls != EntityClass::env) continue;
      for (const auto& iv : e.busy) {
        for (const auto& t : trainer->busy) CHECK((iv.end <= t.start + 1e-9 || iv.start >= t.end - 1e-9));
      }
    }
  }

  TEST_CASE("decoupled beats coupled on the reference scenario") {
    auto base = reference_scenario(2);
    base.engine.max_time = 1500;
    const auto c = simulate(coupled_variant(base));
    const auto d = simulate(decoupled_variant(base));
    CHECK(throughput(d) > throughput(c));
    CHECK(utilization(d, EntityClass::env) > utilization(c, EntityClass::env));
  }

  TEST_CASE("scenario keys parse and unknown keys are rejected") {
    const auto c = scenario_from_key_values(
        {{"sampling", "task"}, {"sync", "all"}, {"envs", "12"}, {"task_table", "A:2:3,4;B:1.5:7"}});
    CHECK(c.engine.sampling == SamplingMode::task);
    CHECK(c.engine.sync == SyncMode::all_worker);
    CHECK(c.engine.envs == 12);
    REQUIRE(c.tasks.size() == 2);
    CHECK(c.tasks[1].step_latency == 1.5);
    CHECK(c.tasks[0].rollout_steps == std::vector<int>{3, 4});
    CHECK_THROWS_AS(scenario_from_key_values({{"envz", "3"}}), std::invalid_argument);
    CHECK_THROWS_AS(scenario_from_key_values({{"task_table", "A:x:1"}}), std::invalid_argument);
    const auto kept = scenario_from_key_values({{"seed", "4"}}, reference_scenario(1));
    CHECK(kept.engine.envs == 180);
    CHECK(kept.seed == 4);
    for (const auto& [k, _] : KeyValues{{"sampling", ""}, {"task_table", ""}}) CHECK(scenario_keys().contains(k));
  }

  TEST_CASE("exports are well formed") {
    const auto r = simulate(small());
    std::istringstream trace(trace_jsonl(r));
    std::string line;
    std::size_t rows = 0;
    double last = 0.0;
    while (std::getline(trace, line)) {
      const auto j = Json::parse(line);
      CHECK(j.contains("entity"));
      CHECK(j.contains("event"));
      CHECK(j.at("timestamp").get<double>() >= last);
      last = j.at("timestamp").get<double>();
      ++rows;
    }
    CHECK(rows == r.trace.size());
    const auto csv = utilization_csv(r);
    CHECK(csv.rfind("entity", 0) == 0);
    CHECK(ascii_gantt(r).find("env") != std::string::npos);
    CHECK(svg_gantt(r).rfind("<svg", 0) == 0);
  }
}
