#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace dart {

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
/// Throws std::invalid_argument on a line without `=` or a repeated key.
KeyValues parse_key_values(const std::string& text);

/// Reads and parses a config file. Throws std::runtime_error when unreadable.
KeyValues load_key_values(const std::filesystem::path& path);

/// Overrides `key` with the environment variable PREFIX + upper-cased key,
/// for every key in `known`.
void apply_env_overrides(KeyValues& kv, const std::set<std::string>& known, const std::string& prefix = "DART_");

/// Typed, consumption-tracking view over key-values.
class ConfigReader {
 public:
  explicit ConfigReader(const KeyValues& kv) : kv_(&kv) {}

  bool has(const std::string& key) const { return kv_->contains(key); }
  std::string get_string(const std::string& key, const std::string& fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);

  /// Throws std::invalid_argument naming the first key never read.
  void reject_unknown() const;

 private:
  const std::string* find(const std::string& key);

  const KeyValues* kv_;
  std::set<std::string> used_;
};

}  // namespace dart
