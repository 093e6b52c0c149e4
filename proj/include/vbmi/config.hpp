#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vbmi {

// Line-oriented key=value configuration. '#' starts a comment, values may be
// double-quoted, keys are case-sensitive.
class Config {
 public:
  Config() = default;

  static Config parse_string(std::string_view text);
  static Config parse_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list of numbers.
  std::vector<double> get_doubles(const std::string& key) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace vbmi
