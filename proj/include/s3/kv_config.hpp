#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace s3 {

/// `key=value` text config. Lines starting with '#' are comments.
///
/// Getters record which keys were read; reject_unused() then throws for any
/// key no consumer asked for, which is how unknown keys get rejected.
class KvConfig {
 public:
  static KvConfig parse(std::string_view text);
  static KvConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void merge(const KvConfig& overrides);
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws s3::Error naming every key that no getter consumed.
  void reject_unused(std::string_view context) const;

  /// Sorted `key=value` lines; parse(format()) reproduces the entries.
  std::string format() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> used_;
};

}  // namespace s3
