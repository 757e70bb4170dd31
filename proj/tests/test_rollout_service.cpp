#include <doctest.h>

#include <map>
#include <set>

#include "dart/rollout_service.hpp"

using namespace dart;

namespace {

Snapshot snapshot(ModelVersion v, int f = 16, int vocab = 8) {
  auto p = PolicyParams::zeros(f, vocab);
  p.version = v;
  return std::make_shared<const PolicyParams>(p);
}

RolloutScheduler::GroupSource groups(int count, int rollouts) {
  auto next = std::make_shared<int>(0);
  return [=]() -> std::optional<GroupSpec> {
    if (*next >= count) return std::nullopt;
    GroupSpec g;
    g.task_id = "t" + std::to_string(*next);
    g.group_id = "g" + std::to_string(*next);
    g.rollouts = rollouts;
    ++*next;
    return g;
  };
}

}  // namespace

TEST_SUITE("rollout_service") {
  TEST_CASE("dispatch picks the least loaded serving worker, lowest id on ties") {
    std::vector<Worker> ws(3);
    for (int i = 0; i < 3; ++i) ws[static_cast<std::size_t>(i)].worker_id = i;
    ws[0].in_flight = 2;
    ws[1].in_flight = 1;
    ws[2].in_flight = 1;
    CHECK(dispatch(ws) == 1);
    ws[1].status = WorkerStatus::syncing;
    CHECK(dispatch(ws) == 2);
    for (auto& w : ws) w.status = WorkerStatus::syncing;
    CHECK_FALSE(dispatch(ws).has_value());
  }

  TEST_CASE("load stays balanced under random submits and completions") {
    RolloutService s(4, snapshot(0));
    Rng rng(3);
    std::vector<int> live;
    for (int i = 0; i < 2000; ++i) {
      if (live.empty() || rng.uniform() < 0.6) {
        live.push_back(*s.submit(static_cast<std::uint64_t>(i)));
      } else {
        const auto k = static_cast<std::size_t>(rng.below(static_cast<int>(live.size())));
        s.complete(live[k]);
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
      }
      int total = 0;
      for (const auto& w : s.workers()) total += w.in_flight;
      CHECK(total == static_cast<int>(live.size()));
    }
  }

  TEST_CASE("sync drains, swaps and hands queued tickets back") {
    RolloutService s(1, snapshot(0));
    CHECK(s.submit(1) == 0);
    const auto ack = s.sync_worker(0, snapshot(1));
    CHECK(ack.accepted);
    CHECK(ack.to == 1);
    CHECK(s.serving_count() == 0);
    CHECK_FALSE(s.submit(2).has_value());
    CHECK(s.pending() == 1);
    CHECK_FALSE(s.drained(0));
    CHECK_THROWS_AS(s.finish_sync(0), std::logic_error);
    CHECK(s.complete(0));
    const auto handed = s.finish_sync(0);
    REQUIRE(handed.size() == 1);
    CHECK(handed[0] == std::pair<std::uint64_t, int>{2, 0});
    CHECK(s.worker(0).version() == 1);
    CHECK(s.worker(0).in_flight == 1);
  }

  TEST_CASE("stale or repeated syncs are ignored") {
    RolloutService s(2, snapshot(3));
    CHECK_FALSE(s.sync_worker(0, snapshot(3)).accepted);
    CHECK_FALSE(s.sync_worker(0, snapshot(2)).accepted);
    CHECK(s.ignored_syncs() == 2);
    CHECK(s.sync_worker(0, snapshot(5)).accepted);
    CHECK_FALSE(s.sync_worker(0, snapshot(4)).accepted);
    CHECK(s.worker(0).status == WorkerStatus::syncing);
  }

  TEST_CASE("per-worker plans one worker at a time; all-worker plans every outdated one") {
    RolloutService s(4, snapshot(0));
    CHECK(plan_sync(s, 1, SyncMode::per_worker) == std::vector<int>{0});
    CHECK(plan_sync(s, 1, SyncMode::all_worker) == std::vector<int>{0, 1, 2, 3});
    CHECK(plan_sync(s, 0, SyncMode::all_worker).empty());
    s.sync_worker(0, snapshot(1));
    CHECK(plan_sync(s, 1, SyncMode::per_worker).empty());
    s.finish_sync(0);
    CHECK(plan_sync(s, 1, SyncMode::per_worker) == std::vector<int>{1});
  }

  TEST_CASE("mode strings round trip") {
    for (auto m : {SamplingMode::batch, SamplingMode::task, SamplingMode::rollout}) {
      CHECK(sampling_mode_from_string(to_string(m)) == m);
    }
    for (auto m : {SyncMode::all_worker, SyncMode::per_worker}) CHECK(sync_mode_from_string(to_string(m)) == m);
    CHECK_THROWS(sync_mode_from_string("some"));
  }

  TEST_CASE("rollout-wise sampling issues every unit exactly once") {
    RolloutScheduler sched(SamplingMode::rollout, 3, 1, groups(5, 4));
    std::map<std::string, std::set<int>> issued;
    int env = 0;
    while (auto r = sched.next_unit(env, 0.0)) {
      CHECK(issued[r->group_id].insert(r->ordinal).second);
      sched.on_rollout_done(r->group_id);
      env = (env + 1) % 3;
    }
    CHECK(issued.size() == 5);
    for (const auto& [_, ords] : issued) CHECK(ords.size() == 4);
    CHECK(sched.finished());
  }

  TEST_CASE("task-wise sampling holds a slot until its group finishes") {
    RolloutScheduler sched(SamplingMode::task, 4, 2, groups(4, 2));
    const auto a = sched.next_unit(0);
    const auto b = sched.next_unit(1);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->group_id == b->group_id);
    CHECK_FALSE(sched.next_unit(0).has_value());
    const auto c = sched.next_unit(2);
    REQUIRE(c);
    CHECK(c->group_id != a->group_id);
    sched.on_rollout_done(a->group_id);
    CHECK_FALSE(sched.next_unit(0).has_value());
    sched.on_rollout_done(a->group_id);
    const auto d = sched.next_unit(0);
    REQUIRE(d);
    CHECK(d->group_id != a->group_id);
    CHECK(d->group_id != c->group_id);
  }

  TEST_CASE("batch-wise sampling waits for the whole batch and honours the gate") {
    RolloutScheduler sched(SamplingMode::batch, 2, 2, groups(4, 1));
    const auto a = sched.next_unit(0);
    const auto b = sched.next_unit(1);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(sched.batches_started() == 1);
    sched.on_rollout_done(a->group_id);
    CHECK_FALSE(sched.next_unit(0).has_value());
    sched.on_rollout_done(b->group_id);
    sched.set_gate(false);
    CHECK_FALSE(sched.next_unit(0).has_value());
    sched.set_gate(true);
    CHECK(sched.next_unit(0).has_value());
    CHECK(sched.batches_started() == 2);
  }

  TEST_CASE("unknown completions are rejected") {
    RolloutScheduler sched(SamplingMode::rollout, 1, 1, groups(1, 1));
    CHECK_THROWS_AS(sched.on_rollout_done("nope"), std::logic_error);
  }

  TEST_CASE("cursor records one step per env step with the serving snapshot's version") {
    const Featurizer f(16, 8, 4, 1);
    EnvConfig ec;
    ec.vocab = 8;
    EnvInstance env(0, ec);
    Task task;
    task.task_id = "t";
    task.target_sequence = {1, 2, 3};
    RolloutRequest req{"t", "g", 0, 0, 30, 0.0};
    RolloutOptions opts;
    opts.oracle_actions = true;
    RolloutCursor cursor(task, req, env, f, opts, 9);
    auto p = PolicyParams::zeros(16, 8);
    p.version = 4;
    cursor.advance(p);
    p.version = 5;
    while (!cursor.done()) cursor.advance(p);
    const auto t = cursor.finish();
    CHECK(t.reward == 1.0);
    REQUIRE(t.steps.size() == 3);
    CHECK(t.steps[0].model_version == 4);
    CHECK(t.steps[2].model_version == 5);
    CHECK(t.model_version == 4);
    CHECK(t.steps[1].history.size() == 1);
    CHECK(t.steps[0].thought.size() == 1);
    CHECK_NOTHROW(validate(t));
    CHECK(env.status() == EnvStatus::idle);
  }

  TEST_CASE("rollouts are reproducible from the seed") {
    const Featurizer f(16, 8, 4, 1);
    EnvConfig ec;
    ec.vocab = 8;
    EnvInstance e1(0, ec), e2(1, ec);
    Task task;
    task.task_id = "t";
    task.target_sequence = {1, 2};
    task.max_steps_cap = 6;
    Worker w;
    w.snapshot = snapshot(0, 16, 8);
    const RolloutRequest req{"t", "g", 0, 0, 30, 0.0};
    CHECK(run_rollout(task, req, e1, w, f, RolloutOptions{}, 5) == run_rollout(task, req, e2, w, f, RolloutOptions{}, 5));
  }
}
