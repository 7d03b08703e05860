#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "refvos/common.hpp"

namespace refvos {

/// Flat key=value configuration with dotted keys ("loss.tau = 0.07").
/// Lines starting with '#' are comments. Overrides take precedence over
/// file values.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::filesystem::path& path);
  /// Apply an override of the form "key=value"; wins over file values.
  void apply_override(const std::string& kv);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& def) const;
  int get_int(const std::string& key, int def) const;
  std::int64_t get_i64(const std::string& key, std::int64_t def) const;
  real get_real(const std::string& key, real def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& def) const;

  void set(const std::string& key, const std::string& value);

  /// Throws ConfigError naming the first key not present in `known`.
  void require_known(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace refvos
