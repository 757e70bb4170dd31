#include "dart/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "dart/data_manager.hpp"
#include "dart/jsonl.hpp"

namespace dart {

namespace {

std::string join_issues(const std::vector<StoreIssue>& issues) {
  std::string out = "corrupt store:";
  for (const auto& i : issues) out += "\n  table " + i.table + ": " + i.detail;
  return out;
}

const std::map<Table, std::vector<const char*>>& required_fields() {
  static const std::map<Table, std::vector<const char*>> fields{
      {Table::datasets, {"dataset"}},
      {Table::dataset_usage_events, {"event_id", "trajectory_id", "event_type", "model_version"}},
      {Table::rollout_run, {"trajectory_id", "task_id", "reward", "num_steps"}},
      {Table::trainable_group,
       {"group_id", "task_id", "status", "online_count", "online_success", "mean_length", "model_version", "stats",
        "injected"}},
      {Table::current_model, {"version"}},
      {Table::model_registry, {"version", "parent_version"}},
      {Table::checkpoint, {"version", "path"}},
  };
  return fields;
}

std::vector<Json> load_table(const std::filesystem::path& dir, Table table, std::vector<StoreIssue>& issues) {
  const std::string name(table_name(table));
  try {
    auto rows = read_jsonl(dir / (name + ".jsonl"));
    const auto it = required_fields().find(table);
    if (it != required_fields().end()) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (const char* field : it->second) {
          if (!rows[r].is_object() || !rows[r].contains(field)) {
            issues.push_back({name, "row " + std::to_string(r + 1) + " lacks field '" + field + "'"});
            return {};
          }
        }
      }
    }
    return rows;
  } catch (const std::exception& e) {
    issues.push_back({name, e.what()});
    return {};
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

StoreError::StoreError(std::vector<StoreIssue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

std::vector<StoreIssue> check_store(const std::filesystem::path& store_dir) {
  std::vector<StoreIssue> issues;
  std::map<Table, std::vector<Json>> tables;
  for (Table t : kAllTables) tables[t] = load_table(store_dir, t, issues);
  try {
    for (const auto& row : read_jsonl(store_dir / "rollout_chunk.idx")) {
      if (!row.contains("trajectory_id") || !row.contains("offset")) {
        issues.push_back({"rollout_chunk.idx", "index row without trajectory_id/offset"});
        break;
      }
    }
  } catch (const std::exception& e) {
    issues.push_back({"rollout_chunk.idx", e.what()});
  }
  if (!issues.empty()) return issues;

  std::set<std::string> known;
  for (const auto& row : tables[Table::rollout_run]) known.insert(row.at("trajectory_id").get<std::string>());
  for (const auto& row : tables[Table::dataset_usage_events]) {
    const auto id = row.at("trajectory_id").get<std::string>();
    if (!known.contains(id)) {
      issues.push_back({"dataset_usage_events", "event for unknown trajectory " + id});
      break;
    }
  }
  return issues;
}

StoreReport build_report(const std::filesystem::path& store_dir) {
  if (!std::filesystem::is_directory(store_dir)) {
    throw std::runtime_error("store directory " + store_dir.string() + " does not exist");
  }
  auto issues = check_store(store_dir);
  if (!issues.empty()) throw StoreError(std::move(issues));

  StoreReport rep;
  std::vector<StoreIssue> unused;
  std::map<std::string, TaskStats> latest;
  for (const auto& row : load_table(store_dir, Table::datasets, unused)) {
    if (row.at("dataset") != "task_suite") continue;
    const auto task = task_from_json(row.at("task"));
    if (latest.contains(task.task_id)) continue;
    TaskStats s;
    s.task_id = task.task_id;
    s.success_rate_ema = task.success_rate_ema;
    s.rollout_count = task.rollout_count;
    s.max_steps_cap = task.max_steps_cap;
    latest[task.task_id] = s;
  }
  rep.tasks = latest.size();
  rep.trajectories = load_table(store_dir, Table::rollout_run, unused).size();
  for (const auto& row : load_table(store_dir, Table::dataset_usage_events, unused)) {
    const auto type = row.at("event_type").get<std::string>();
    if (type == "pool_injection") ++rep.pool_injection_events;
    if (type == "training_consumption") ++rep.training_events;
  }
  for (const auto& row : load_table(store_dir, Table::current_model, unused)) {
    rep.iterations = std::max(rep.iterations, row.at("version").get<std::int64_t>());
  }

  std::map<std::pair<std::int64_t, std::string>, CurvePoint> curves;
  std::map<std::int64_t, std::pair<double, int>> lengths;  // sum of mean lengths, group count
  std::map<std::int64_t, std::map<std::string, TaskStats>> snapshots;
  for (const auto& row : load_table(store_dir, Table::trainable_group, unused)) {
    ++rep.groups;
    const auto status = row.at("status").get<std::string>();
    if (status == "trainable") ++rep.trainable_groups;
    if (status == "skipped_all_success") ++rep.skipped_groups;
    if (status == "no_positive") ++rep.no_positive_groups;
    const bool injected = !row.at("injected").is_null();
    if (injected) ++rep.pool_injections;

    const auto iteration = row.at("model_version").get<std::int64_t>();
    const auto task_id = row.at("task_id").get<std::string>();
    const auto stats = task_stats_from_json(row.at("stats"));
    const int online = row.at("online_count").get<int>();
    const double mean_length = row.at("mean_length").get<double>();

    auto& p = curves[{iteration, task_id}];
    p.iteration = iteration;
    p.task_id = task_id;
    const int total = p.rollouts + online;
    if (total > 0) {
      p.online_success = (p.online_success * p.rollouts + row.at("online_success").get<double>() * online) / total;
      p.mean_length = (p.mean_length * p.rollouts + mean_length * online) / total;
    }
    p.rollouts = total;
    ++p.groups;
    p.injections += injected ? 1 : 0;
    p.success_ema = stats.success_rate_ema;
    p.rollout_count = stats.rollout_count;
    p.max_steps_cap = stats.max_steps_cap;

    latest[task_id] = stats;
    snapshots[iteration] = latest;
    auto& l = lengths[iteration];
    l.first += mean_length;
    ++l.second;
  }
  for (auto& [_, p] : curves) rep.curves.push_back(std::move(p));
  for (const auto& [iteration, tasks] : snapshots) {
    SuitePoint s;
    s.iteration = iteration;
    for (const auto& [_, t] : tasks) {
      s.mean_success_ema += t.success_rate_ema;
      s.mean_rollout_count += t.rollout_count;
      s.mean_length_cap += t.max_steps_cap;
    }
    const double n = static_cast<double>(tasks.size());
    s.mean_success_ema /= n;
    s.mean_rollout_count /= n;
    s.mean_length_cap /= n;
    const auto& l = lengths.at(iteration);
    s.mean_sampled_length = l.first / l.second;
    rep.suite.push_back(s);
  }
  return rep;
}

std::string curves_csv(const StoreReport& report) {
  std::ostringstream out;
  out << "iteration,task_id,groups,rollouts,online_success,mean_length,success_ema,rollout_count,max_steps_cap,"
         "injections\n";
  for (const auto& p : report.curves) {
    out << p.iteration << ',' << p.task_id << ',' << p.groups << ',' << p.rollouts << ',' << fmt(p.online_success)
        << ',' << fmt(p.mean_length) << ',' << fmt(p.success_ema) << ',' << p.rollout_count << ','
        << p.max_steps_cap << ',' << p.injections << '\n';
  }
  return out.str();
}

std::string suite_csv(const StoreReport& report) {
  std::ostringstream out;
  out << "iteration,mean_success_ema,mean_rollout_count,mean_length_cap,mean_sampled_length\n";
  for (const auto& s : report.suite) {
    out << s.iteration << ',' << fmt(s.mean_success_ema) << ',' << fmt(s.mean_rollout_count) << ','
        << fmt(s.mean_length_cap) << ',' << fmt(s.mean_sampled_length) << '\n';
  }
  return out.str();
}

Json summary_json(const StoreReport& report) {
  return Json{{"tasks", report.tasks},
              {"trajectories", report.trajectories},
              {"groups", report.groups},
              {"trainable_groups", report.trainable_groups},
              {"skipped_groups", report.skipped_groups},
              {"no_positive_groups", report.no_positive_groups},
              {"pool_injections", report.pool_injections},
              {"pool_injection_events", report.pool_injection_events},
              {"training_consumption_events", report.training_events},
              {"iterations", report.iterations}};
}

std::string suite_svg(const StoreReport& report) {
  const int w = 640;
  const int h = 200;
  const int pad = 40;
  std::ostringstream out;
  const int panels = 3;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << panels * (h + pad) + pad
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  const std::int64_t last = report.suite.empty() ? 1 : std::max<std::int64_t>(1, report.suite.back().iteration);
  struct Series {
    const char* title;
    double lo;
    double hi;
    double SuitePoint::*field;
  };
  const Series series[panels] = {{"mean success EMA", 0.0, 1.0, &SuitePoint::mean_success_ema},
                                 {"mean rollout count N", 0.0, 8.0, &SuitePoint::mean_rollout_count},
                                 {"mean length cap / sampled length", 0.0, 30.0, &SuitePoint::mean_length_cap}};
  for (int k = 0; k < panels; ++k) {
    const int top = pad + k * (h + pad);
    const auto& s = series[k];
    out << "<text x=\"" << pad << "\" y=\"" << top - 6 << "\">" << s.title << "</text>\n";
    out << "<rect x=\"" << pad << "\" y=\"" << top << "\" width=\"" << w - 2 * pad << "\" height=\"" << h
        << "\" fill=\"none\" stroke=\"#999\"/>\n";
    auto polyline = [&](double SuitePoint::*field, const char* color) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
      for (const auto& p : report.suite) {
        const double x = pad + (w - 2 * pad) * static_cast<double>(p.iteration) / static_cast<double>(last);
        const double v = std::clamp(p.*field, s.lo, s.hi);
        const double y = top + h - h * (v - s.lo) / (s.hi - s.lo);
        out << fmt(x) << ',' << fmt(y) << ' ';
      }
      out << "\"/>\n";
    };
    polyline(s.field, "#4c78a8");
    if (k == 2) polyline(&SuitePoint::mean_sampled_length, "#f58518");
  }
  out << "<text x=\"" << pad << "\" y=\"" << panels * (h + pad) + pad - 4 << "\">iteration 0.." << last
      << "</text>\n</svg>\n";
  return out.str();
}

}  // namespace dart
