#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace picknet::train {

// Values of the small TOML subset accepted for configuration: strings,
// integers, floats, booleans and flat arrays of those.
struct ConfigValue {
  using Array = std::vector<std::variant<bool, std::int64_t, double, std::string>>;
  std::variant<bool, std::int64_t, double, std::string, Array> value;
  int line = 0;

  std::string as_string(std::string_view key) const;
  double as_double(std::string_view key) const;
  std::int64_t as_int(std::string_view key) const;
  std::uint64_t as_uint(std::string_view key) const;
  bool as_bool(std::string_view key) const;
  std::vector<double> as_double_list(std::string_view key) const;
};

// Keys are dotted: "[train]\nseed = 1" yields "train.seed".
using ConfigTable = std::map<std::string, ConfigValue>;

ConfigTable parse_config(std::string_view text);
ConfigTable load_config(const std::filesystem::path& path);

// "key=value" overrides; a value that is not valid TOML is taken as a bare string.
ConfigTable parse_overrides(const std::vector<std::string>& items);

// Copies `from` over `into` (later wins).
void merge_config(ConfigTable& into, const ConfigTable& from);

}  // namespace picknet::train
