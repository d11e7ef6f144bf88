#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace mcvqa {

/// Flat `key=value` text. Blank lines and lines starting with '#' are
/// ignored; whitespace around keys and values is trimmed.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse(std::string_view text, std::string source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(std::string_view key) const { return values_.count(std::string(key)) != 0; }
  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

  /// Overwrites `out` when `key` is present; ConfigError names the key on a bad value.
  void read(std::string_view key, std::string& out) const;
  void read(std::string_view key, double& out) const;
  void read(std::string_view key, unsigned long& out) const;
  void read(std::string_view key, unsigned long long& out) const;

  /// Throws ConfigError listing keys never passed to read().
  void reject_unknown() const;
  const std::string& source() const { return source_; }

 private:
  const std::string* find(std::string_view key) const;

  std::map<std::string, std::string, std::less<>> values_;
  mutable std::set<std::string, std::less<>> used_;
  std::string source_;
};

}  // namespace mcvqa
