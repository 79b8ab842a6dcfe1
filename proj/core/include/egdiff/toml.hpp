#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace egdiff {

struct TomlError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Value of the TOML subset used by run configs: strings, integers, floats,
/// booleans, and flat arrays of those.
struct TomlValue {
  enum class Type { kString, kInt, kFloat, kBool, kArray };
  Type type = Type::kString;
  std::string str;
  long long integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::vector<TomlValue> array;

  const std::string& as_string() const;
  long long as_int() const;
  double as_float() const;  // accepts integers
  bool as_bool() const;
  const std::vector<TomlValue>& as_array() const;
  std::vector<double> as_float_array() const;
  std::vector<std::string> as_string_array() const;
};

/// Keys are flattened as "table.key"; top-level keys keep their bare name.
using TomlTable = std::map<std::string, TomlValue>;

/// Strict parser for the subset: `# comments`, `[table]` headers, and
/// `key = value` lines. Duplicate keys, malformed values, and anything
/// outside the subset raise TomlError with a line number.
TomlTable parse_toml(const std::string& text);
TomlTable parse_toml_file(const std::filesystem::path& path);

}  // namespace egdiff
