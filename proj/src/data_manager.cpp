#include "dart/data_manager.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace dart {

namespace {

bool is_success(const Trajectory& t, double threshold) { return t.reward >= threshold; }

}  // namespace

Json to_json(const TaskStats& s) {
  Json j{{"task_id", s.task_id},
         {"success_rate_ema", s.success_rate_ema},
         {"attempts", s.attempts},
         {"rollout_count", s.rollout_count},
         {"max_steps_cap", s.max_steps_cap}};
  j["best_success_length"] = s.best_success_length ? Json(*s.best_success_length) : Json(nullptr);
  return j;
}

TaskStats task_stats_from_json(const Json& j) {
  TaskStats s;
  s.task_id = j.at("task_id").get<std::string>();
  s.success_rate_ema = j.at("success_rate_ema").get<double>();
  s.attempts = j.at("attempts").get<std::int64_t>();
  s.rollout_count = j.at("rollout_count").get<int>();
  s.max_steps_cap = j.at("max_steps_cap").get<int>();
  if (!j.at("best_success_length").is_null()) s.best_success_length = j.at("best_success_length").get<int>();
  return s;
}

int next_rollout_count(const TaskStats& stats, const CurationConfig& config) {
  int n = config.max_rollouts;
  for (const auto& tier : config.rollout_table) {
    if (stats.success_rate_ema >= tier.min_ema) n = std::min(n, tier.rollouts);
  }
  return std::clamp(n, std::max(1, config.min_rollouts), config.max_rollouts);
}

int next_max_length(const TaskStats& stats, int global_cap, int margin) {
  if (!stats.best_success_length) return global_cap;
  if (*stats.best_success_length > global_cap) {
    throw std::invalid_argument("best success length " + std::to_string(*stats.best_success_length) +
                                " exceeds the global step cap " + std::to_string(global_cap));
  }
  return std::min(global_cap, *stats.best_success_length + margin);
}

TaskStats update_task_stats(TaskStats stats, std::span<const Trajectory> outcomes, const CurationConfig& config) {
  if (!outcomes.empty()) {
    int successes = 0;
    for (const auto& t : outcomes) {
      if (!is_success(t, config.success_threshold)) continue;
      ++successes;
      const int len = static_cast<int>(t.steps.size());
      stats.best_success_length = std::max(stats.best_success_length.value_or(0), len);
    }
    const double fraction = static_cast<double>(successes) / static_cast<double>(outcomes.size());
    stats.success_rate_ema = (1.0 - config.ema_decay) * stats.success_rate_ema + config.ema_decay * fraction;
    stats.success_rate_ema = std::clamp(stats.success_rate_ema, 0.0, 1.0);
    stats.attempts += static_cast<std::int64_t>(outcomes.size());
  }
  stats.rollout_count = config.dynamic_rollouts ? next_rollout_count(stats, config) : config.max_rollouts;
  stats.max_steps_cap = config.dynamic_length
                            ? next_max_length(stats, config.global_max_steps, config.length_margin)
                            : config.global_max_steps;
  return stats;
}

void ExperiencePool::add(Trajectory trajectory) {
  if (trajectory.reward < threshold_) {
    throw std::invalid_argument("pool entry " + trajectory.trajectory_id + " is not a success");
  }
  trajectory.source = TrajectorySource::experience_pool;
  entries_[trajectory.task_id].push_back(std::move(trajectory));
}

std::span<const Trajectory> ExperiencePool::for_task(const std::string& task_id) const {
  const auto it = entries_.find(task_id);
  if (it == entries_.end()) return {};
  return it->second;
}

std::size_t ExperiencePool::total() const {
  std::size_t n = 0;
  for (const auto& [_, v] : entries_) n += v.size();
  return n;
}

const Trajectory* ExperiencePool::sample(const std::string& task_id, Rng& rng) const {
  const auto entries = for_task(task_id);
  if (entries.empty()) return nullptr;
  return &entries[static_cast<std::size_t>(rng.below(static_cast<int>(entries.size())))];
}

std::string_view table_name(Table table) {
  switch (table) {
    case Table::checkpoint: return "checkpoint";
    case Table::current_model: return "current_model";
    case Table::model_registry: return "model_registry";
    case Table::datasets: return "datasets";
    case Table::dataset_usage_events: return "dataset_usage_events";
    case Table::rollout_run: return "rollout_run";
    case Table::rollout_chunk: return "rollout_chunk";
    case Table::trainable_group: return "trainable_group";
    case Table::update_model_task: return "update_model_task";
    case Table::inference_node: return "inference_node";
    case Table::inference_tasks: return "inference_tasks";
  }
  return "unknown";
}

UsageCounters replay_usage(std::span<const Json> rows) {
  UsageCounters counters;
  for (const auto& row : rows) {
    ++counters[row.at("trajectory_id").get<std::string>()][row.at("event_type").get<std::string>()];
  }
  return counters;
}

namespace {

// Steps are stored without their history when it is exactly the trailing
// window of the trajectory's own earlier steps, which is how rollouts build it.
// Per-step ids are dropped too and restored from the trajectory.
std::optional<std::size_t> derivable_window(const Trajectory& t) {
  std::size_t m = 0;
  for (const auto& s : t.steps) m = std::max(m, s.history.size());
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    if (t.steps[i].task_id != t.task_id || t.steps[i].trajectory_id != t.trajectory_id) return std::nullopt;
    const auto& h = t.steps[i].history;
    const std::size_t from = i > m ? i - m : 0;
    if (h.size() != i - from) return std::nullopt;
    for (std::size_t j = from; j < i; ++j) {
      const auto& prev = t.steps[j];
      const auto& e = h[j - from];
      if (e.state != prev.state || e.thought != prev.thought || e.action != prev.action) return std::nullopt;
    }
  }
  return m;
}

void put_ints(std::string& out, const std::vector<int>& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  out += ']';
}

void put_string(std::string& out, const std::string& s) { out += Json(s).dump(); }

// Same bytes as dump_compact of the equivalent Json (keys in sorted order),
// without building the tree.
std::string encode_trajectory(const Trajectory& t) {
  const auto m = derivable_window(t);
  if (!m) return dump_compact(to_json(t));
  std::string out;
  out.reserve(256 + t.steps.size() * 160);
  out += "{\"history_window\":" + std::to_string(*m);
  out += ",\"model_version\":" + std::to_string(t.model_version);
  out += ",\"reward\":" + format_double(t.reward);
  out += ",\"source\":";
  put_string(out, to_string(t.source));
  out += ",\"steps\":[";
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    if (i) out += ',';
    out += "{\"action\":";
    put_ints(out, s.action);
    out += ",\"model_version\":" + std::to_string(s.model_version);
    out += ",\"rollout_logprob\":" + format_double(s.rollout_logprob);
    out += ",\"state\":";
    put_ints(out, s.state);
    out += ",\"step_index\":" + std::to_string(s.step_index);
    out += ",\"thought\":";
    put_ints(out, s.thought);
    out += ",\"token_entropies\":[";
    for (std::size_t k = 0; k < s.token_entropies.size(); ++k) {
      if (k) out += ',';
      out += format_double(s.token_entropies[k]);
    }
    out += "]}";
  }
  out += "],\"task_id\":";
  put_string(out, t.task_id);
  out += ",\"terminal_reason\":";
  put_string(out, to_string(t.terminal_reason));
  out += ",\"trajectory_id\":";
  put_string(out, t.trajectory_id);
  out += ",\"wall_time\":" + format_double(t.wall_time);
  out += '}';
  return out;
}

Trajectory decode_trajectory(Json j) {
  if (!j.contains("history_window")) return trajectory_from_json(j);
  const auto m = j.at("history_window").get<std::size_t>();
  for (auto& step : j.at("steps")) {
    step["history"] = Json::array();
    step["task_id"] = j.at("task_id");
    step["trajectory_id"] = j.at("trajectory_id");
  }
  auto t = trajectory_from_json(j);
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    for (std::size_t k = i > m ? i - m : 0; k < i; ++k) {
      const auto& prev = t.steps[k];
      t.steps[i].history.push_back(HistoryEntry{prev.state, prev.thought, prev.action});
    }
  }
  return t;
}

}  // namespace

TrajectoryStore::TrajectoryStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  for (Table t : kAllTables) {
    truncate_torn_tail(table_path(t));
    appenders_.emplace(t, JsonlAppender(table_path(t)));
  }

  // Offsets are authoritative from the chunk file itself; the sidecar is
  // rewritten when it lags behind (e.g. after a crash between the writes).
  const auto chunk_path = table_path(Table::rollout_chunk);
  const auto idx_path = dir_ / "rollout_chunk.idx";
  truncate_torn_tail(idx_path);
  std::size_t indexed = 0;
  for (const auto& row : read_jsonl(idx_path)) {
    offsets_[row.at("trajectory_id").get<std::string>()] = row.at("offset").get<std::uint64_t>();
    ++indexed;
  }
  std::ifstream in(chunk_path, std::ios::binary);
  std::string line;
  std::uint64_t offset = 0;
  std::size_t lines = 0;
  std::vector<std::pair<std::string, std::uint64_t>> missing;
  while (std::getline(in, line)) {
    ++lines;
    if (lines > indexed) {
      const auto j = Json::parse(line);
      missing.emplace_back(j.at("trajectory_id").get<std::string>(), offset);
    }
    offset += line.size() + 1;
  }
  index_ = JsonlAppender(idx_path);
  for (const auto& [id, off] : missing) {
    offsets_[id] = off;
    index_.append(Json{{"trajectory_id", id}, {"offset", off}});
  }

  std::unordered_map<std::string, bool> has_run;
  for (const auto& row : rows(Table::rollout_run)) {
    const auto id = row.at("trajectory_id").get<std::string>();
    trainable_[id] = row.at("trainable").get<bool>();
    has_run[id] = true;
  }
  for (const auto& [id, _] : offsets_) {
    if (has_run.contains(id)) continue;
    const auto t = get_trajectory(id);
    const bool ok = t.terminal_reason != TerminalReason::env_failure;
    append(Table::rollout_run, Json{{"trajectory_id", id},
                                    {"task_id", t.task_id},
                                    {"reward", t.reward},
                                    {"model_version", t.model_version},
                                    {"terminal_reason", to_string(t.terminal_reason)},
                                    {"source", to_string(t.source)},
                                    {"num_steps", t.steps.size()},
                                    {"trainable", ok}});
    trainable_[id] = ok;
  }
}

std::filesystem::path TrajectoryStore::table_path(Table table) const {
  return dir_ / (std::string(table_name(table)) + ".jsonl");
}

JsonlAppender& TrajectoryStore::appender(Table table) { return appenders_.at(table); }

void TrajectoryStore::put_trajectory(const Trajectory& trajectory, bool trainable) {
  validate(trajectory);
  if (contains(trajectory.trajectory_id)) {
    throw std::invalid_argument("duplicate trajectory id " + trajectory.trajectory_id);
  }
  const auto offset = appender(Table::rollout_chunk).append_line(encode_trajectory(trajectory));
  index_.append(Json{{"trajectory_id", trajectory.trajectory_id}, {"offset", offset}});
  offsets_[trajectory.trajectory_id] = offset;
  append(Table::rollout_run, Json{{"trajectory_id", trajectory.trajectory_id},
                                  {"task_id", trajectory.task_id},
                                  {"reward", trajectory.reward},
                                  {"model_version", trajectory.model_version},
                                  {"terminal_reason", to_string(trajectory.terminal_reason)},
                                  {"source", to_string(trajectory.source)},
                                  {"num_steps", trajectory.steps.size()},
                                  {"trainable", trainable}});
  trainable_[trajectory.trajectory_id] = trainable;
}

Trajectory TrajectoryStore::get_trajectory(const std::string& trajectory_id) const {
  const auto it = offsets_.find(trajectory_id);
  if (it == offsets_.end()) throw std::out_of_range("unknown trajectory " + trajectory_id);
  std::ifstream in(table_path(Table::rollout_chunk), std::ios::binary);
  in.seekg(static_cast<std::streamoff>(it->second));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("index points past rollout_chunk for " + trajectory_id);
  return decode_trajectory(Json::parse(line));
}

bool TrajectoryStore::trainable(const std::string& trajectory_id) const {
  const auto it = trainable_.find(trajectory_id);
  if (it == trainable_.end()) throw std::out_of_range("unknown trajectory " + trajectory_id);
  return it->second;
}

void TrajectoryStore::append(Table table, const Json& row) { appender(table).append(row); }

std::vector<Json> TrajectoryStore::rows(Table table) const { return read_jsonl(table_path(table)); }

std::string to_string(GroupStatus status) {
  switch (status) {
    case GroupStatus::not_ready: return "not_ready";
    case GroupStatus::trainable: return "trainable";
    case GroupStatus::skipped_all_success: return "skipped_all_success";
    case GroupStatus::no_positive: return "no_positive";
  }
  return "not_ready";
}

DataManager::DataManager(std::filesystem::path dir, CurationConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      store_(std::move(dir)),
      pool_(config_.success_threshold),
      rng_(Rng::mix(seed, 0xda7a)) {
  if (!(config_.ema_decay > 0.0 && config_.ema_decay <= 1.0)) throw std::invalid_argument("ema_decay must be in (0,1]");
  if (config_.min_rollouts < 1 || config_.max_rollouts < config_.min_rollouts) {
    throw std::invalid_argument("invalid rollout bounds");
  }
  if (config_.global_max_steps < 1 || config_.length_margin < 0) throw std::invalid_argument("invalid length bounds");
  restore();
}

void DataManager::restore() {
  for (const auto& row : store_.rows(Table::datasets)) {
    const auto dataset = row.at("dataset").get<std::string>();
    if (dataset == "task_suite") {
      auto t = task_from_json(row.at("task"));
      const auto id = t.task_id;
      if (!tasks_.contains(id)) task_order_.push_back(id);
      TaskStats s;
      s.task_id = id;
      s.rollout_count = config_.max_rollouts;
      s.max_steps_cap = config_.global_max_steps;
      stats_[id] = s;
      tasks_[id] = std::move(t);
    } else if (dataset == "experience_pool") {
      pool_.add(store_.get_trajectory(row.at("trajectory_id").get<std::string>()));
    }
  }
  for (const auto& row : store_.rows(Table::trainable_group)) {
    if (row.contains("stats")) {
      auto s = task_stats_from_json(row.at("stats"));
      stats_[s.task_id] = s;
    }
  }
  const auto events = store_.rows(Table::dataset_usage_events);
  usage_ = replay_usage(events);
  for (const auto& e : events) next_event_id_ = std::max(next_event_id_, e.at("event_id").get<std::uint64_t>() + 1);
  for (const auto& row : store_.rows(Table::current_model)) current_model_ = row.at("version").get<ModelVersion>();
  committed_iterations_ = static_cast<std::int64_t>(store_.rows(Table::update_model_task).size());
}

void DataManager::register_task(const Task& task) {
  std::lock_guard lock(mutex_);
  if (task.target_sequence.empty()) throw std::invalid_argument("task " + task.task_id + " has no target");
  if (tasks_.contains(task.task_id)) return;
  store_.append(Table::datasets, Json{{"dataset", "task_suite"}, {"task_id", task.task_id}, {"task", to_json(task)}});
  tasks_[task.task_id] = task;
  task_order_.push_back(task.task_id);
  TaskStats s;
  s.task_id = task.task_id;
  s.rollout_count = config_.max_rollouts;
  s.max_steps_cap = config_.global_max_steps;
  stats_[task.task_id] = s;
}

std::vector<Task> DataManager::tasks() const {
  std::lock_guard lock(mutex_);
  std::vector<Task> out;
  for (const auto& id : task_order_) {
    Task t = tasks_.at(id);
    const auto& s = stats_.at(id);
    t.rollout_count = s.rollout_count;
    t.max_steps_cap = s.max_steps_cap;
    t.success_rate_ema = s.success_rate_ema;
    t.best_success_length = s.best_success_length;
    out.push_back(std::move(t));
  }
  return out;
}

const Task& DataManager::task(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  const auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw std::out_of_range("unknown task " + task_id);
  return it->second;
}

TaskStats DataManager::stats(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  const auto it = stats_.find(task_id);
  if (it == stats_.end()) throw std::out_of_range("unknown task " + task_id);
  return it->second;
}

void DataManager::open_group(const std::string& group_id, const std::string& task_id, int rollouts) {
  std::lock_guard lock(mutex_);
  if (rollouts < 1) throw std::invalid_argument("group needs at least one rollout");
  if (groups_.contains(group_id)) throw std::invalid_argument("group " + group_id + " already open");
  groups_[group_id] = OpenGroup{task_id, rollouts, {}};
}

std::string DataManager::store_trajectory(const Trajectory& trajectory, const std::string& group_id) {
  std::lock_guard lock(mutex_);
  const bool trainable = trajectory.terminal_reason != TerminalReason::env_failure;
  OpenGroup* group = nullptr;
  if (!group_id.empty()) {
    const auto it = groups_.find(group_id);
    if (it == groups_.end()) throw std::invalid_argument("unknown group " + group_id);
    if (it->second.task_id != trajectory.task_id) throw std::invalid_argument("trajectory task does not match group");
    if (static_cast<int>(it->second.online.size()) >= it->second.expected) {
      throw std::logic_error("group " + group_id + " is already complete");
    }
    group = &it->second;
  }
  store_.put_trajectory(trajectory, trainable);
  if (group) group->online.push_back(trajectory);
  return trajectory.trajectory_id;
}

AssembledGroup DataManager::assemble_group(const std::string& group_id) {
  std::lock_guard lock(mutex_);
  AssembledGroup out;
  out.group_id = group_id;
  const auto it = groups_.find(group_id);
  if (it == groups_.end()) throw std::invalid_argument("unknown group " + group_id);
  auto& g = it->second;
  out.task_id = g.task_id;
  if (static_cast<int>(g.online.size()) < g.expected) return out;

  for (auto& t : g.online) {
    if (t.terminal_reason != TerminalReason::env_failure) out.trajectories.push_back(std::move(t));
  }
  groups_.erase(it);
  out.stats = update_stats_locked(out.task_id, out.trajectories);

  const bool any_positive = std::any_of(out.trajectories.begin(), out.trajectories.end(),
                                        [](const Trajectory& t) { return t.reward > 0.0; });
  const bool zero_variance =
      !out.trajectories.empty() &&
      std::all_of(out.trajectories.begin(), out.trajectories.end(),
                  [&](const Trajectory& t) { return t.reward == out.trajectories.front().reward; });

  if (out.trajectories.empty()) {
    out.status = GroupStatus::no_positive;
  } else if (!any_positive) {
    const Trajectory* pick = config_.use_pool ? pool_.sample(out.task_id, rng_) : nullptr;
    if (pick) {
      out.trajectories.push_back(*pick);
      out.injected = pick->trajectory_id;
      usage_locked(pick->trajectory_id, "pool_injection", current_model_.value_or(0));
      out.status = GroupStatus::trainable;
    } else {
      out.status = GroupStatus::no_positive;
    }
  } else if (zero_variance) {
    out.status = GroupStatus::skipped_all_success;
  } else {
    out.status = GroupStatus::trainable;
  }
  if (out.status == GroupStatus::trainable) out.steps = make_step_group(out.trajectories);

  Json ids = Json::array();
  for (const auto& t : out.trajectories) ids.push_back(t.trajectory_id);
  std::size_t online_steps = 0;
  std::size_t online_count = 0;
  double online_success = 0.0;
  for (const auto& t : out.trajectories) {
    if (t.source != TrajectorySource::online) continue;
    online_steps += t.steps.size();
    ++online_count;
    online_success += is_success(t, config_.success_threshold) ? 1.0 : 0.0;
  }
  store_.append(Table::trainable_group,
                Json{{"group_id", group_id},
                     {"task_id", out.task_id},
                     {"status", to_string(out.status)},
                     {"trajectory_ids", ids},
                     {"injected", out.injected ? Json(*out.injected) : Json(nullptr)},
                     {"online_count", online_count},
                     {"online_success", online_count ? online_success / static_cast<double>(online_count) : 0.0},
                     {"mean_length", online_count ? static_cast<double>(online_steps) / static_cast<double>(online_count) : 0.0},
                     {"model_version", current_model_.value_or(0)},
                     {"timestamp", clock_},
                     {"stats", to_json(out.stats)}});
  return out;
}

TaskStats DataManager::update_task_stats(const std::string& task_id, std::span<const Trajectory> outcomes) {
  std::lock_guard lock(mutex_);
  return update_stats_locked(task_id, outcomes);
}

TaskStats DataManager::update_stats_locked(const std::string& task_id, std::span<const Trajectory> outcomes) {
  const auto it = stats_.find(task_id);
  if (it == stats_.end()) throw std::out_of_range("unknown task " + task_id);
  it->second = dart::update_task_stats(it->second, outcomes, config_);
  return it->second;
}

void DataManager::add_to_pool(Trajectory trajectory) {
  std::lock_guard lock(mutex_);
  trajectory.source = TrajectorySource::experience_pool;
  if (trajectory.reward < config_.success_threshold) {
    throw std::invalid_argument("pool entry " + trajectory.trajectory_id + " is not a success");
  }
  store_.put_trajectory(trajectory, true);
  store_.append(Table::datasets, Json{{"dataset", "experience_pool"},
                                      {"trajectory_id", trajectory.trajectory_id},
                                      {"task_id", trajectory.task_id}});
  pool_.add(std::move(trajectory));
}

UsageEvent DataManager::record_usage_event(const std::string& trajectory_id, const std::string& event_type,
                                           ModelVersion model_version) {
  std::lock_guard lock(mutex_);
  return usage_locked(trajectory_id, event_type, model_version);
}

UsageEvent DataManager::usage_locked(const std::string& trajectory_id, const std::string& event_type,
                                     ModelVersion model_version) {
  if (!store_.contains(trajectory_id)) throw std::invalid_argument("usage event for unknown trajectory " + trajectory_id);
  UsageEvent e{next_event_id_++, trajectory_id, event_type, model_version, clock_};
  store_.append(Table::dataset_usage_events, Json{{"event_id", e.event_id},
                                                  {"trajectory_id", e.trajectory_id},
                                                  {"event_type", e.event_type},
                                                  {"model_version", e.model_version},
                                                  {"timestamp", e.timestamp}});
  ++usage_[trajectory_id][event_type];
  return e;
}

UsageCounters DataManager::usage_counters() const {
  std::lock_guard lock(mutex_);
  return usage_;
}

void DataManager::record_model(ModelVersion version, ModelVersion parent, const std::string& checkpoint_path,
                               std::int64_t iteration) {
  std::lock_guard lock(mutex_);
  if (!checkpoint_path.empty()) {
    store_.append(Table::checkpoint, Json{{"version", version}, {"path", checkpoint_path}, {"iteration", iteration}});
  }
  store_.append(Table::model_registry, Json{{"version", version}, {"parent_version", parent}, {"created_at", clock_}});
  store_.append(Table::current_model, Json{{"version", version}, {"timestamp", clock_}});
  current_model_ = version;
}

void DataManager::record_update(const Json& row) {
  std::lock_guard lock(mutex_);
  store_.append(Table::update_model_task, row);
  ++committed_iterations_;
}

void DataManager::record_worker_event(int worker_id, ModelVersion version, const std::string& event) {
  std::lock_guard lock(mutex_);
  store_.append(Table::inference_node,
                Json{{"worker_id", worker_id}, {"version", version}, {"event", event}, {"timestamp", clock_}});
}

void DataManager::record_request(const std::string& trajectory_id, int env_id, int worker_id) {
  std::lock_guard lock(mutex_);
  store_.append(Table::inference_tasks,
                Json{{"trajectory_id", trajectory_id}, {"env_id", env_id}, {"worker_id", worker_id}, {"timestamp", clock_}});
}

std::optional<ModelVersion> DataManager::current_model() const {
  std::lock_guard lock(mutex_);
  return current_model_;
}

std::int64_t DataManager::committed_iterations() const {
  std::lock_guard lock(mutex_);
  return committed_iterations_;
}

void DataManager::set_clock(double now) {
  std::lock_guard lock(mutex_);
  clock_ = now;
}

double DataManager::clock() const {
  std::lock_guard lock(mutex_);
  return clock_;
}

}  // namespace dart
