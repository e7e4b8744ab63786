#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace edl {

/// Flat key-value configuration. Files hold one `key = value` per line;
/// '#' starts a comment. Later sets win, so command-line overrides applied
/// after the file take precedence. Every getter marks its key as used, and
/// check_all_used() rejects keys nothing asked for (typos, mostly).
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::filesystem::path& path);
  static KeyValueConfig from_text(const std::string& text, const std::string& origin = "<text>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;

  /// Throws ConfigError naming the first key that was never read.
  void check_all_used() const;

  /// Sorted `key=value` lines of every set key; stable across runs.
  std::string canonical() const;
  std::uint64_t hash() const;
  /// Copy with `key` removed (usage marks are not carried over).
  KeyValueConfig without(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace edl
