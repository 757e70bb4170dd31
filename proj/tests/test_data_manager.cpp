#include <doctest.h>

#include <fstream>

#include "dart/data_manager.hpp"
#include "test_util.hpp"

using namespace dart;

namespace {

Trajectory make_traj(const std::string& id, const std::string& task, int steps, double reward,
                     std::size_t window = 4) {
  Trajectory t;
  t.trajectory_id = id;
  t.task_id = task;
  t.reward = reward;
  t.terminal_reason = reward > 0 ? TerminalReason::finished : TerminalReason::step_cap;
  for (int i = 0; i < steps; ++i) {
    StepRecord s;
    s.task_id = task;
    s.trajectory_id = id;
    s.step_index = i;
    s.state = {i, 7, 9};
    s.thought = {};
    s.action = {i % 4};
    s.rollout_logprob = -0.3 - i;
    s.token_entropies = {0.5 + 0.01 * i};
    for (std::size_t k = i > static_cast<int>(window) ? i - window : 0; k < static_cast<std::size_t>(i); ++k) {
      s.history.push_back({{static_cast<int>(k), 7, 9}, {}, {static_cast<int>(k) % 4}});
    }
    t.steps.push_back(s);
  }
  return t;
}

Task make_task(const std::string& id) {
  Task t;
  t.task_id = id;
  t.target_sequence = {1, 2};
  return t;
}

}  // namespace

TEST_SUITE("data_manager") {
  TEST_CASE("rollout count follows the tier table") {
    const CurationConfig c;
    TaskStats s;
    const std::vector<std::pair<double, int>> table{{0.0, 8}, {0.59, 8}, {0.6, 6}, {0.7, 5},
                                                    {0.8, 4}, {0.9, 2},  {1.0, 2}};
    for (const auto& [ema, n] : table) {
      s.success_rate_ema = ema;
      CHECK(next_rollout_count(s, c) == n);
    }
  }

  TEST_CASE("rollout count is monotone non-increasing in the EMA") {
    const CurationConfig c;
    TaskStats s;
    int prev = c.max_rollouts;
    for (int i = 0; i <= 1000; ++i) {
      s.success_rate_ema = i / 1000.0;
      const int n = next_rollout_count(s, c);
      CHECK(n <= prev);
      CHECK((n >= c.min_rollouts && n <= c.max_rollouts));
      prev = n;
    }
  }

  TEST_CASE("length cap tracks the longest success plus the margin") {
    TaskStats s;
    CHECK(next_max_length(s, 30, 2) == 30);
    s.best_success_length = 5;
    CHECK(next_max_length(s, 30, 2) == 7);
    s.best_success_length = 29;
    CHECK(next_max_length(s, 30, 2) == 30);
    s.best_success_length = 31;
    CHECK_THROWS_AS(next_max_length(s, 30, 2), std::invalid_argument);
  }

  TEST_CASE("stats update folds the group into the EMA") {
    const CurationConfig c;
    TaskStats s;
    s.task_id = "t";
    const std::vector<Trajectory> group{make_traj("a", "t", 4, 1.0), make_traj("b", "t", 6, 1.0),
                                        make_traj("c", "t", 30, 0.0), make_traj("d", "t", 30, 0.0)};
    s = update_task_stats(s, group, c);
    CHECK(s.success_rate_ema == doctest::Approx(0.3 * 0.5));
    CHECK(s.best_success_length == 6);
    CHECK(s.max_steps_cap == 8);
    CHECK(s.attempts == 4);
    s = update_task_stats(s, group, c);
    CHECK(s.success_rate_ema == doctest::Approx(0.7 * 0.15 + 0.15));
  }

  TEST_CASE("EMA stays within [0, 1] for arbitrary outcomes") {
    const CurationConfig c;
    Rng rng(4);
    TaskStats s;
    s.task_id = "t";
    for (int i = 0; i < 500; ++i) {
      std::vector<Trajectory> g;
      const int n = 1 + rng.below(8);
      for (int k = 0; k < n; ++k) g.push_back(make_traj("x", "t", 1 + rng.below(29), rng.below(2)));
      s = update_task_stats(s, g, c);
      CHECK((s.success_rate_ema >= 0.0 && s.success_rate_ema <= 1.0));
      CHECK(s.max_steps_cap <= c.global_max_steps);
    }
  }

  TEST_CASE("pool accepts successes only and samples within the task") {
    ExperiencePool pool;
    CHECK_THROWS_AS(pool.add(make_traj("f", "t", 3, 0.0)), std::invalid_argument);
    pool.add(make_traj("s1", "t", 3, 1.0));
    pool.add(make_traj("s2", "t", 3, 1.0));
    pool.add(make_traj("u1", "u", 3, 1.0));
    CHECK(pool.size("t") == 2);
    CHECK(pool.total() == 3);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
      const auto* p = pool.sample("t", rng);
      REQUIRE(p);
      CHECK(p->task_id == "t");
      CHECK(p->source == TrajectorySource::experience_pool);
    }
    CHECK(pool.sample("none", rng) == nullptr);
  }

  TEST_CASE("store round trips trajectories through the compact and plain encodings") {
    test::TempDir dir("store");
    TrajectoryStore store(dir.path());
    const auto derivable = make_traj("g/0", "t", 9, 1.0, 4);
    auto irregular = make_traj("g/1", "t", 3, 0.0, 4);
    irregular.steps[2].history.pop_back();
    store.put_trajectory(derivable, true);
    store.put_trajectory(irregular, true);
    CHECK(store.get_trajectory("g/0") == derivable);
    CHECK(store.get_trajectory("g/1") == irregular);
    CHECK_THROWS_AS(store.put_trajectory(derivable, true), std::invalid_argument);
    CHECK_THROWS_AS(store.get_trajectory("missing"), std::out_of_range);
  }

  TEST_CASE("store recovers rows and rebuilds a lagging index after reopen") {
    test::TempDir dir("store_reopen");
    {
      TrajectoryStore store(dir.path());
      store.put_trajectory(make_traj("a", "t", 2, 1.0), true);
      store.put_trajectory(make_traj("b", "t", 2, 0.0), false);
    }
    // Drop the last index row and leave a torn chunk write behind.
    {
      auto rows = read_jsonl(dir / "rollout_chunk.idx");
      std::ofstream idx(dir / "rollout_chunk.idx", std::ios::trunc);
      idx << dump_compact(rows[0]) << "\n";
      std::ofstream chunk(dir / "rollout_chunk.jsonl", std::ios::app);
      chunk << "{\"trajectory_id\":\"torn";
    }
    TrajectoryStore store(dir.path());
    CHECK(store.trajectory_count() == 2);
    CHECK(store.get_trajectory("b") == make_traj("b", "t", 2, 0.0));
    CHECK_FALSE(store.trainable("b"));
    store.put_trajectory(make_traj("c", "t", 1, 1.0), true);
    CHECK(TrajectoryStore(dir.path()).get_trajectory("c") == make_traj("c", "t", 1, 1.0));
  }

  TEST_CASE("mixed groups are trainable, all-success groups are skipped") {
    test::TempDir dir("dm_groups");
    DataManager dm(dir.path(), CurationConfig{}, 1);
    dm.register_task(make_task("t"));
    dm.open_group("g", "t", 2);
    dm.store_trajectory(make_traj("g/0", "t", 3, 1.0), "g");
    CHECK(dm.assemble_group("g").status == GroupStatus::not_ready);
    dm.store_trajectory(make_traj("g/1", "t", 30, 0.0), "g");
    const auto g = dm.assemble_group("g");
    CHECK(g.status == GroupStatus::trainable);
    CHECK(g.steps.step_records.size() == 33);
    CHECK_FALSE(g.injected.has_value());

    dm.open_group("h", "t", 2);
    dm.store_trajectory(make_traj("h/0", "t", 3, 1.0), "h");
    dm.store_trajectory(make_traj("h/1", "t", 4, 1.0), "h");
    CHECK(dm.assemble_group("h").status == GroupStatus::skipped_all_success);
    CHECK_THROWS_AS(dm.assemble_group("h"), std::invalid_argument);
  }

  TEST_CASE("all-failure groups get exactly one pool trajectory and an injection event") {
    test::TempDir dir("dm_pool");
    DataManager dm(dir.path(), CurationConfig{}, 1);
    dm.register_task(make_task("t"));
    dm.add_to_pool(make_traj("pool/t#0", "t", 2, 1.0));
    dm.open_group("g", "t", 3);
    for (int i = 0; i < 3; ++i) dm.store_trajectory(make_traj("g/" + std::to_string(i), "t", 30, 0.0), "g");
    const auto g = dm.assemble_group("g");
    CHECK(g.status == GroupStatus::trainable);
    REQUIRE(g.injected.has_value());
    CHECK(*g.injected == "pool/t#0");
    CHECK(g.trajectories.size() == 4);
    CHECK(g.trajectories.back().source == TrajectorySource::experience_pool);
    CHECK(dm.usage_counters().at("pool/t#0").at("pool_injection") == 1);
    // Success stats count online rollouts only.
    CHECK(g.stats.success_rate_ema == 0.0);
  }

  TEST_CASE("without a pool entry an all-failure group has no positive") {
    test::TempDir dir("dm_nopool");
    CurationConfig c;
    c.use_pool = false;
    DataManager dm(dir.path(), c, 1);
    dm.register_task(make_task("t"));
    dm.add_to_pool(make_traj("pool/t#0", "t", 2, 1.0));
    dm.open_group("g", "t", 2);
    dm.store_trajectory(make_traj("g/0", "t", 30, 0.0), "g");
    dm.store_trajectory(make_traj("g/1", "t", 30, 0.0), "g");
    CHECK(dm.assemble_group("g").status == GroupStatus::no_positive);
  }

  TEST_CASE("env failures are stored but excluded from the group") {
    test::TempDir dir("dm_fail");
    DataManager dm(dir.path(), CurationConfig{}, 1);
    dm.register_task(make_task("t"));
    dm.open_group("g", "t", 3);
    auto broken = make_traj("g/2", "t", 1, 0.0);
    broken.terminal_reason = TerminalReason::env_failure;
    dm.store_trajectory(make_traj("g/0", "t", 2, 1.0), "g");
    dm.store_trajectory(make_traj("g/1", "t", 30, 0.0), "g");
    dm.store_trajectory(broken, "g");
    const auto g = dm.assemble_group("g");
    CHECK(g.trajectories.size() == 2);
    CHECK_FALSE(dm.store().trainable("g/2"));
  }

  TEST_CASE("group misuse is rejected") {
    test::TempDir dir("dm_misuse");
    DataManager dm(dir.path(), CurationConfig{}, 1);
    dm.register_task(make_task("t"));
    dm.open_group("g", "t", 1);
    CHECK_THROWS(dm.open_group("g", "t", 1));
    CHECK_THROWS(dm.store_trajectory(make_traj("x/0", "u", 1, 1.0), "g"));
    CHECK_THROWS(dm.store_trajectory(make_traj("x/0", "t", 1, 1.0), "nope"));
    dm.store_trajectory(make_traj("g/0", "t", 1, 1.0), "g");
    CHECK_THROWS_AS(dm.store_trajectory(make_traj("g/1", "t", 1, 1.0), "g"), std::logic_error);
  }

  TEST_CASE("usage counters replay from the event log after reopen") {
    test::TempDir dir("dm_usage");
    UsageCounters before;
    {
      DataManager dm(dir.path(), CurationConfig{}, 1);
      dm.register_task(make_task("t"));
      dm.store_trajectory(make_traj("a", "t", 1, 1.0));
      dm.record_usage_event("a", "training_consumption", 1);
      dm.record_usage_event("a", "training_consumption", 2);
      dm.record_model(2, 1, "", 2);
      before = dm.usage_counters();
    }
    DataManager dm(dir.path(), CurationConfig{}, 1);
    CHECK(dm.usage_counters() == before);
    CHECK(dm.usage_counters().at("a").at("training_consumption") == 2);
    CHECK(dm.current_model() == 2);
    CHECK(dm.tasks().size() == 1);
    const auto ev = dm.record_usage_event("a", "training_consumption", 3);
    CHECK(ev.event_id == 2);
  }

  TEST_CASE("pool and stats survive a reopen") {
    test::TempDir dir("dm_reopen");
    {
      DataManager dm(dir.path(), CurationConfig{}, 1);
      dm.register_task(make_task("t"));
      dm.add_to_pool(make_traj("pool/t#0", "t", 2, 1.0));
      dm.open_group("g", "t", 2);
      dm.store_trajectory(make_traj("g/0", "t", 2, 1.0), "g");
      dm.store_trajectory(make_traj("g/1", "t", 5, 0.0), "g");
      dm.assemble_group("g");
    }
    DataManager dm(dir.path(), CurationConfig{}, 1);
    CHECK(dm.pool().size("t") == 1);
    CHECK(dm.stats("t").success_rate_ema == doctest::Approx(0.15));
    CHECK(dm.stats("t").max_steps_cap == 4);
  }
}
