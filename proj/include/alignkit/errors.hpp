#pragma once

#include <stdexcept>
#include <string>

namespace alignkit {

// Base for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Caller violated a documented precondition (dimension mismatch, bad range).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(what) {}
};

// Bad or missing configuration / input files. Maps to CLI exit code 1.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace alignkit
