#pragma once

// Flat key=value run configuration. Every key has an embedded default; files
// and command-line overrides may only set known keys.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lwta {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

const std::vector<ConfigKey>& config_keys();

class Config {
 public:
  Config();  // all defaults

  static Config from_file(const std::filesystem::path& path);
  // "key = value" lines; '#' starts a comment.
  static Config parse(std::istream& is, std::string_view origin = "<config>");

  // Unknown key -> ConfigError listing the valid keys.
  void set(std::string_view key, std::string value);
  const std::string& get(std::string_view key) const;
  bool has(std::string_view key) const;

  std::string str(std::string_view key) const { return get(key); }
  double real(std::string_view key) const;
  std::size_t count(std::string_view key) const;
  std::uint64_t u64(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::vector<std::size_t> counts(std::string_view key) const;  // comma separated
  std::vector<std::string> list(std::string_view key) const;

  // key = value per line in declaration order.
  void dump(std::ostream& os) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string valid_keys_message();

}  // namespace lwta
