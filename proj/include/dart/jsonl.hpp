#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dart/core.hpp"

namespace dart {

/// Serializes a JSON value on one line. Floating-point numbers are written
/// with 17 significant digits so that every double round-trips exactly.
std::string dump_compact(const Json& value);

/// Formats a double with 17 significant digits.
std::string format_double(double value);

/// Reads every complete line of a JSONL file. A trailing line without a
/// newline is a torn write and is ignored. Missing files read as empty.
std::vector<Json> read_jsonl(const std::filesystem::path& path);

/// Append-only JSONL writer. Every append is flushed before returning, so a
/// row is committed once append() returns.
class JsonlAppender {
 public:
  JsonlAppender() = default;
  explicit JsonlAppender(const std::filesystem::path& path);

  /// Returns the byte offset at which the row starts.
  std::uint64_t append(const Json& row);
  /// Appends an already serialized row; `line` must be one JSON value without a newline.
  std::uint64_t append_line(const std::string& line);
  std::uint64_t size() const { return offset_; }
  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
  std::uint64_t offset_ = 0;
};

/// Drops a torn trailing line so later appends start on a line boundary.
void truncate_torn_tail(const std::filesystem::path& path);

}  // namespace dart
