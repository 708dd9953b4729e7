#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "alignkit/errors.hpp"

namespace alignkit {

// Flat key=value config with '#' comments. Lookup precedence is
// flag > environment > file; flags are handled by the CLI layer, the
// environment override (ALIGNKIT_<KEY> with dots mapped to underscores)
// lives here.
class Config {
 public:
  Config() = default;

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Config config;
    config.path_ = path;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto comment = line.find('#');
      if (comment != std::string::npos) line.resize(comment);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": expected key = value");
      }
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
      }
      config.values_[key] = value;
    }
    return config;
  }

  static std::string env_name(const std::string& key) {
    std::string name = "ALIGNKIT_";
    for (char c : key) {
      name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return name;
  }

  std::optional<std::string> get(const std::string& key) const {
    if (const char* env = std::getenv(env_name(key).c_str())) {
      return std::string(env);
    }
    const auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    return std::nullopt;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    const auto v = get(key);
    return v ? *v : fallback;
  }

  std::string require(const std::string& key) const {
    const auto v = get(key);
    if (!v || v->empty()) {
      throw ConfigError("missing required config key: " + key +
                        (path_.empty() ? "" : " (config: " + path_ + ")"));
    }
    return *v;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    try {
      return std::stod(*v);
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " is not a number: " + *v);
    }
  }

  long get_int(const std::string& key, long fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    try {
      return std::stol(*v);
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " is not an integer: " + *v);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key " + key + " is not a boolean: " + *v);
  }

  // "a,b,c" -> {a, b, c}, entries trimmed, empties dropped.
  std::vector<std::string> get_list(const std::string& key) const {
    const auto v = get(key);
    std::vector<std::string> items;
    if (!v) return items;
    std::size_t start = 0;
    while (start <= v->size()) {
      auto comma = v->find(',', start);
      if (comma == std::string::npos) comma = v->size();
      const std::string item = trim(v->substr(start, comma - start));
      if (!item.empty()) items.push_back(item);
      start = comma + 1;
    }
    return items;
  }

  const std::map<std::string, std::string>& file_values() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
  }

  std::map<std::string, std::string> values_;
  std::string path_;
};

// FNV-1a over the canonicalized (sorted) effective settings; stamped into
// artifacts so evaluation output traces back to generation settings.
inline std::string manifest_hash(const std::map<std::string, std::string>& settings) {
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      hash ^= c;
      hash *= 1099511628211ull;
    }
    hash ^= 0x1f;
    hash *= 1099511628211ull;
  };
  for (const auto& [key, value] : settings) {
    mix(key);
    mix(value);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace alignkit
