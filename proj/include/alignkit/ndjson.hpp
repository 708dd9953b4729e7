#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alignkit/errors.hpp"

namespace alignkit::ndjson {

struct LineError {
  std::size_t line_no = 0;
  std::string message;
  std::string raw;
};

template <typename T>
void write_file(const std::string& path, const std::vector<T>& records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  for (const auto& record : records) {
    out << nlohmann::json(record).dump() << "\n";
  }
}

inline void write_lines(const std::string& path, const std::vector<nlohmann::json>& lines) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  for (const auto& line : lines) out << line.dump() << "\n";
}

// Reads every parseable record; malformed lines are collected, not fatal.
template <typename T>
std::pair<std::vector<T>, std::vector<LineError>> read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  std::vector<T> records;
  std::vector<LineError> errors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(nlohmann::json::parse(line).get<T>());
    } catch (const std::exception& e) {
      errors.push_back(LineError{line_no, e.what(), line});
    }
  }
  return {std::move(records), std::move(errors)};
}

}  // namespace alignkit::ndjson
