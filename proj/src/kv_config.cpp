#include "s3/kv_config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>

#include "s3/core.hpp"
#include "s3/raster_io.hpp"

namespace s3 {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

KvConfig KvConfig::parse(std::string_view text) {
  KvConfig cfg;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw Error("config line " + std::to_string(line_no) + ": empty key");
    cfg.entries_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("config file not found: " + path.string());
  return parse(read_text_file(path));
}

void KvConfig::merge(const KvConfig& overrides) {
  for (const auto& [k, v] : overrides.entries_) entries_[k] = v;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  used_.insert(key);
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  used_.insert(key);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (it->second.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw Error("config key '" + key + "': expected a number, got '" + it->second + "'");
  }
  return v;
}

int KvConfig::get_int(const std::string& key, int fallback) const {
  used_.insert(key);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(it->second.c_str(), &end, 10);
  if (it->second.empty() || *end != '\0' || errno == ERANGE || v < -2147483647L ||
      v > 2147483647L) {
    throw Error("config key '" + key + "': expected an integer, got '" + it->second + "'");
  }
  return static_cast<int>(v);
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  used_.insert(key);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  if (it->second == "1" || it->second == "true") return true;
  if (it->second == "0" || it->second == "false") return false;
  throw Error("config key '" + key + "': expected 0|1, got '" + it->second + "'");
}

void KvConfig::reject_unused(std::string_view context) const {
  std::string unknown;
  for (const auto& [k, v] : entries_) {
    if (used_.count(k) == 0) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) throw Error(std::string(context) + ": unknown config keys: " + unknown);
}

std::string KvConfig::format() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

}  // namespace s3
