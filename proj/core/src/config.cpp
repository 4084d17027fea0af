#include "pamlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pamlab {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

KeyValueConfig KeyValueConfig::parse_text(const std::string& text,
                                          const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::string section;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": empty section name");
      }
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!section.empty()) key = section + "." + key;
    for (const auto& [k, v] : cfg.entries_) {
      if (k == key) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
      }
    }
    cfg.entries_.emplace_back(key, value);
    cfg.consumed_.push_back(false);
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return true;
  }
  return false;
}

std::string KeyValueConfig::raw(const std::string& key) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first == key) {
      consumed_[i] = true;
      return entries_[i].second;
    }
  }
  throw ConfigError(origin_ + ": missing required key '" + key + "'");
}

std::string KeyValueConfig::get_string(const std::string& key) {
  std::string v = raw(key);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    v = v.substr(1, v.size() - 2);
  }
  return v;
}

double KeyValueConfig::get_double(const std::string& key) {
  const std::string v = raw(key);
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE) {
    throw ConfigError(origin_ + ": key '" + key + "' is not a real number: " +
                      v);
  }
  return x;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key) {
  const std::string v = raw(key);
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE ||
      v.find('-') != std::string::npos) {
    throw ConfigError(origin_ + ": key '" + key +
                      "' is not an unsigned integer: " + v);
  }
  return x;
}

long long KeyValueConfig::get_int(const std::string& key) {
  const std::string v = raw(key);
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE) {
    throw ConfigError(origin_ + ": key '" + key + "' is not an integer: " + v);
  }
  return x;
}

bool KeyValueConfig::get_bool(const std::string& key) {
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(origin_ + ": key '" + key + "' is not a boolean: " + v);
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key) {
  const std::string v = raw(key);
  std::vector<double> out;
  for (const std::string& part : split(v, ',')) {
    const std::string p = trim(part);
    if (p.empty()) {
      throw ConfigError(origin_ + ": key '" + key + "' has an empty element");
    }
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(p.c_str(), &end);
    if (end == p.c_str() || *end != '\0' || errno == ERANGE) {
      throw ConfigError(origin_ + ": key '" + key +
                        "' has a non-numeric element: " + p);
    }
    out.push_back(x);
  }
  return out;
}

std::vector<std::size_t> KeyValueConfig::get_size_list(const std::string& key) {
  const std::vector<double> xs = get_double_list(key);
  std::vector<std::size_t> out;
  out.reserve(xs.size());
  for (double x : xs) {
    if (!(x >= 0.0) || x != std::floor(x) || x > 9e15) {
      throw ConfigError(origin_ + ": key '" + key +
                        "' must hold nonnegative integers");
    }
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

#define PAMLAB_TAKE(Name, Type)                                    \
  std::optional<Type> KeyValueConfig::take_##Name(                 \
      const std::string& key) {                                    \
    if (!has(key)) return std::nullopt;                            \
    return get_##Name(key);                                        \
  }

PAMLAB_TAKE(string, std::string)
PAMLAB_TAKE(double, double)
PAMLAB_TAKE(u64, std::uint64_t)
PAMLAB_TAKE(int, long long)
PAMLAB_TAKE(bool, bool)
PAMLAB_TAKE(double_list, std::vector<double>)
PAMLAB_TAKE(size_list, std::vector<std::size_t>)

#undef PAMLAB_TAKE

void KeyValueConfig::require_all_consumed() const {
  std::string leftovers;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!consumed_[i]) {
      if (!leftovers.empty()) leftovers += ", ";
      leftovers += entries_[i].first;
    }
  }
  if (!leftovers.empty()) {
    throw ConfigError(origin_ + ": unknown config keys: " + leftovers);
  }
}

std::string normalize_kernel_spec(const std::string& spec) {
  std::string out;
  out.reserve(spec.size());
  for (char c : spec) {
    if (c == '{' || c == '}' || c == '"' || c == '\'' ||
        std::isspace(static_cast<unsigned char>(c))) {
      continue;
    }
    out += c;
  }
  return out;
}

}  // namespace pamlab
