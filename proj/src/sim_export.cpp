#include <algorithm>
#include <cstdio>
#include <sstream>

#include "dart/jsonl.hpp"
#include "dart/sim_kernel.hpp"

namespace dart {

namespace {

std::string entity_name(EntityClass cls, int id) { return to_string(cls) + ":" + std::to_string(id); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string trace_jsonl(const TimelineReport& report) {
  std::string out;
  for (const auto& e : report.trace) {
    Json row = Json::object();
    row["timestamp"] = e.time;
    row["entity"] = entity_name(e.entity, e.entity_id);
    row["event"] = to_string(e.kind);
    if (e.payload.is_object()) {
      for (const auto& [k, v] : e.payload.items()) row[k] = v;
    }
    out += dump_compact(row);
    out += '\n';
  }
  return out;
}

std::string utilization_csv(const TimelineReport& report) {
  std::ostringstream out;
  out << "entity,class,busy_time,idle_time,utilization\n";
  for (const auto& e : report.entities) {
    const double busy = e.busy_time();
    const double u = report.duration > 0.0 ? busy / report.duration : 0.0;
    out << entity_name(e.cls, e.id) << ',' << to_string(e.cls) << ',' << fmt(busy) << ','
        << fmt(report.duration - busy) << ',' << fmt(u) << '\n';
  }
  return out.str();
}

std::string ascii_gantt(const TimelineReport& report, int width, int max_rows) {
  std::ostringstream out;
  if (width <= 0 || report.duration <= 0.0) return "";
  const double scale = static_cast<double>(width) / report.duration;
  int rows = 0;
  for (const auto& e : report.entities) {
    if (rows++ >= max_rows) {
      out << "... " << (report.entities.size() - static_cast<std::size_t>(max_rows)) << " more\n";
      break;
    }
    std::string line(static_cast<std::size_t>(width), '.');
    for (const auto& iv : e.busy) {
      const int a = std::clamp(static_cast<int>(iv.start * scale), 0, width - 1);
      const int b = std::clamp(static_cast<int>(iv.end * scale + 0.5), a + 1, width);
      for (int i = a; i < b; ++i) line[static_cast<std::size_t>(i)] = '#';
    }
    char label[24];
    std::snprintf(label, sizeof(label), "%-11s", entity_name(e.cls, e.id).c_str());
    out << label << '|' << line << "|\n";
  }
  out << "duration " << fmt(report.duration) << "\n";
  return out.str();
}

std::string svg_gantt(const TimelineReport& report, int max_rows) {
  const int row_h = 12;
  const int label_w = 90;
  const int plot_w = 800;
  const int rows = std::min(static_cast<int>(report.entities.size()), max_rows);
  const double scale = report.duration > 0.0 ? plot_w / report.duration : 0.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << label_w + plot_w + 10 << "\" height=\""
      << rows * row_h + 30 << "\" font-family=\"monospace\" font-size=\"9\">\n";
  for (int r = 0; r < rows; ++r) {
    const auto& e = report.entities[static_cast<std::size_t>(r)];
    const int y = r * row_h + 5;
    const char* color = e.cls == EntityClass::env ? "#4c78a8" : e.cls == EntityClass::worker ? "#f58518" : "#54a24b";
    out << "<text x=\"2\" y=\"" << y + 9 << "\">" << entity_name(e.cls, e.id) << "</text>\n";
    out << "<rect x=\"" << label_w << "\" y=\"" << y << "\" width=\"" << plot_w << "\" height=\"" << row_h - 2
        << "\" fill=\"#eeeeee\"/>\n";
    for (const auto& iv : e.busy) {
      out << "<rect x=\"" << fmt(label_w + iv.start * scale) << "\" y=\"" << y << "\" width=\""
          << fmt(std::max(0.5, (iv.end - iv.start) * scale)) << "\" height=\"" << row_h - 2 << "\" fill=\"" << color
          << "\"/>\n";
    }
  }
  out << "<text x=\"" << label_w << "\" y=\"" << rows * row_h + 22 << "\">duration " << fmt(report.duration)
      << "</text>\n</svg>\n";
  return out.str();
}

}  // namespace dart
