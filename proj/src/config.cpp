#include "edl/config.hpp"

#include "edl/error.hpp"
#include "edl/version.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace edl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_as(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text[0] == '+') ++first;
  const auto r = std::from_chars(first, last, v);
  if (text.empty() || r.ec != std::errc{} || r.ptr != last)
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_text(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path.string());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of(" \t=#") != std::string::npos)
    throw ConfigError("invalid config key '" + key + "'");
  values_[key] = value;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KeyValueConfig::require_string(const std::string& key) const {
  used_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) throw ConfigError("missing required config key '" + key + "'");
  return it->second;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  return has(key) ? parse_as<int>(key, get_string(key, {})) : (used_.insert(key), fallback);
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? parse_as<std::uint64_t>(key, get_string(key, {})) : (used_.insert(key), fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? parse_as<double>(key, get_string(key, {})) : (used_.insert(key), fallback);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) {
    used_.insert(key);
    return fallback;
  }
  const std::string v = get_string(key, {});
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
  if (!has(key)) {
    used_.insert(key);
    return fallback;
  }
  std::vector<int> out;
  for (const auto& s : split_list(get_string(key, {}))) out.push_back(parse_as<int>(key, s));
  return out;
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    const std::vector<double>& fallback) const {
  if (!has(key)) {
    used_.insert(key);
    return fallback;
  }
  std::vector<double> out;
  for (const auto& s : split_list(get_string(key, {}))) out.push_back(parse_as<double>(key, s));
  return out;
}

void KeyValueConfig::check_all_used() const {
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) throw ConfigError("unknown config key '" + k + "'");
}

std::string KeyValueConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t KeyValueConfig::hash() const { return fnv1a(canonical()); }

KeyValueConfig KeyValueConfig::without(const std::string& key) const {
  KeyValueConfig c;
  c.values_ = values_;
  c.values_.erase(key);
  return c;
}

}  // namespace edl
