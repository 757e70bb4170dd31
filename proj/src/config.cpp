#include "dart/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dart {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

void apply_env_overrides(KeyValues& kv, const std::set<std::string>& known, const std::string& prefix) {
  for (const auto& key : known) {
    std::string name = prefix;
    for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(name.c_str())) kv[key] = v;
  }
}

const std::string* ConfigReader::find(const std::string& key) {
  used_.insert(key);
  const auto it = kv_->find(key);
  return it == kv_->end() ? nullptr : &it->second;
}

std::string ConfigReader::get_string(const std::string& key, const std::string& fallback) {
  const auto* v = find(key);
  return v ? *v : fallback;
}

std::int64_t ConfigReader::get_int(const std::string& key, std::int64_t fallback) {
  const auto* v = find(key);
  if (!v) return fallback;
  std::size_t pos = 0;
  try {
    const auto out = std::stoll(*v, &pos);
    if (pos == v->size()) return out;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument(key + ": expected an integer, got '" + *v + "'");
}

std::uint64_t ConfigReader::get_uint(const std::string& key, std::uint64_t fallback) {
  const auto* v = find(key);
  if (!v) return fallback;
  std::size_t pos = 0;
  try {
    if (!v->empty() && (*v)[0] != '-') {
      const auto out = std::stoull(*v, &pos);
      if (pos == v->size()) return out;
    }
  } catch (const std::exception&) {
  }
  throw std::invalid_argument(key + ": expected a nonnegative integer, got '" + *v + "'");
}

double ConfigReader::get_double(const std::string& key, double fallback) {
  const auto* v = find(key);
  if (!v) return fallback;
  std::size_t pos = 0;
  try {
    const auto out = std::stod(*v, &pos);
    if (pos == v->size()) return out;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument(key + ": expected a number, got '" + *v + "'");
}

bool ConfigReader::get_bool(const std::string& key, bool fallback) {
  const auto* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw std::invalid_argument(key + ": expected a boolean, got '" + *v + "'");
}

void ConfigReader::reject_unknown() const {
  for (const auto& [key, value] : *kv_) {
    if (!used_.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

}  // namespace dart
