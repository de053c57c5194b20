#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ptomo {

/// Flat `key = value` configuration.
///
/// Syntax: one entry per line, `#` starts a comment, keys are dotted paths
/// (`grid.width_px`, `cameras.vertical.pivot_x`), lists are comma separated.
/// Later entries override earlier ones. Keys under `run.` are metadata
/// written into manifests and are ignored when a manifest is read back.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::string& path);

  /// Applies a `key=value` override; throws ValidationError on bad syntax.
  void apply_override(std::string_view kv);
  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, const std::vector<double>& values);
  void set(const std::string& key, const std::vector<int>& values);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<int> get_ints(const std::string& key, std::vector<int> fallback) const;

  /// Keys that were set but never read; typos surface here.
  std::vector<std::string> unused_keys() const;
  /// Throws ValidationError listing unused keys, if any.
  void reject_unused() const;

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
  std::string to_text() const;

  static std::string format_double(double v);

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> used_;
};

}  // namespace ptomo
