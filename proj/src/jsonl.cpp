#include "dart/jsonl.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dart {

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("cannot serialize non-finite number");
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  std::string s(buf);
  // Keep floats recognisable as floats when they happen to be integral.
  if (s.find_first_of(".eE") == std::string::npos) {
    s += ".0";
  }
  return s;
}

namespace {

void dump_into(const Json& value, std::string& out) {
  switch (value.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [key, item] : value.items()) {
        if (!first) out += ',';
        first = false;
        out += Json(key).dump();
        out += ':';
        dump_into(item, out);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& item : value) {
        if (!first) out += ',';
        first = false;
        dump_into(item, out);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float:
      out += format_double(value.get<double>());
      break;
    default:
      out += value.dump();
      break;
  }
}

}  // namespace

std::string dump_compact(const Json& value) {
  std::string out;
  dump_into(value, out);
  return out;
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::vector<Json> rows;
  std::ifstream in(path, std::ios::binary);
  if (!in) return rows;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    const auto end = content.find('\n', start);
    if (end == std::string::npos) break;  // torn tail
    ++line_no;
    if (end > start) {
      try {
        rows.push_back(Json::parse(content.begin() + static_cast<std::ptrdiff_t>(start),
                                   content.begin() + static_cast<std::ptrdiff_t>(end)));
      } catch (const Json::parse_error& e) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    start = end + 1;
  }
  return rows;
}

void truncate_torn_tail(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return;
  const auto size = std::filesystem::file_size(path);
  if (size == 0) return;
  std::ifstream in(path, std::ios::binary);
  in.seekg(-1, std::ios::end);
  if (in.get() == '\n') return;
  in.seekg(0);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto last = content.rfind('\n');
  const std::uintmax_t keep = last == std::string::npos ? 0 : last + 1;
  std::filesystem::resize_file(path, keep);
}

JsonlAppender::JsonlAppender(const std::filesystem::path& path) {
  truncate_torn_tail(path);
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for append");
  std::error_code ec;
  offset_ = std::filesystem::exists(path, ec) ? std::filesystem::file_size(path) : 0;
}

std::uint64_t JsonlAppender::append(const Json& row) { return append_line(dump_compact(row)); }

std::uint64_t JsonlAppender::append_line(const std::string& line) {
  const auto at = offset_;
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.put('\n');
  out_.flush();
  if (!out_) throw std::runtime_error("write failed");
  offset_ += line.size() + 1;
  return at;
}

}  // namespace dart
