#pragma once

// Flat sectioned key-value config files:
//
//   experiment = demo
//   seed = 42
//   [rates]
//   N_list = 10,100,1000
//
// Section headers prefix later keys as "section.key".  Values are typed at
// access time; every key must be consumed by the caller, and leftovers are
// reported as unknown keys so misspellings cannot silently fall back to
// defaults.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pamlab/errors.hpp"

namespace pamlab {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  // Parses file contents; ConfigError on syntax errors or duplicate keys,
  // IoError when the file cannot be read.
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_text(const std::string& text,
                                   const std::string& origin = "<config>");

  bool has(const std::string& key) const;

  // Typed getters consume the key.  The plain forms throw ConfigError when
  // the key is missing; the optional forms return nullopt instead.
  std::string get_string(const std::string& key);
  double get_double(const std::string& key);
  std::uint64_t get_u64(const std::string& key);
  long long get_int(const std::string& key);
  bool get_bool(const std::string& key);
  std::vector<double> get_double_list(const std::string& key);
  std::vector<std::size_t> get_size_list(const std::string& key);

  std::optional<std::string> take_string(const std::string& key);
  std::optional<double> take_double(const std::string& key);
  std::optional<std::uint64_t> take_u64(const std::string& key);
  std::optional<long long> take_int(const std::string& key);
  std::optional<bool> take_bool(const std::string& key);
  std::optional<std::vector<double>> take_double_list(const std::string& key);
  std::optional<std::vector<std::size_t>> take_size_list(
      const std::string& key);

  // All keys in file order, consumed or not; for manifest echoes.
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  // ConfigError naming every unconsumed key.
  void require_all_consumed() const;

 private:
  std::string raw(const std::string& key);  // consume; throws if missing
  std::vector<std::pair<std::string, std::string>> entries_;
  std::vector<bool> consumed_;
  std::string origin_;
};

// Kernel specs may use an inline-table look: braces, quotes, and spaces are
// stripped down to the canonical comma-separated form understood by
// StationaryKernel::parse.
std::string normalize_kernel_spec(const std::string& spec);

}  // namespace pamlab
