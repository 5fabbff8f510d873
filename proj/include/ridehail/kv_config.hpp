#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ridehail {

/// Plain-text `key = value` configuration. `#` starts a comment; blank lines
/// are ignored. Every lookup marks its key as consumed so callers can reject
/// leftovers with `require_all_consumed`.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<std::vector<double>> get_double_list(const std::string& key) const;

  /// Throws a config error naming the first key nobody asked for.
  void require_all_consumed() const;

  const std::map<std::string, std::string>& entries() const { return values_; }
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
  mutable std::set<std::string> consumed_;
};

}  // namespace ridehail
