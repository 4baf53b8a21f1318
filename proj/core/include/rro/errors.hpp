#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rro {

// Base for every error raised by the library. Messages are single-line so
// the CLI can print them as machine-parsable `error: <kind>: <detail>`.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& detail)
      : std::runtime_error(kind + ": " + detail), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class UnknownTaskError : public Error {
 public:
  explicit UnknownTaskError(const std::string& detail) : Error("unknown_task", detail) {}
};

class IllegalActionError : public Error {
 public:
  explicit IllegalActionError(const std::string& detail) : Error("illegal_action", detail) {}
};

class InvalidArgumentError : public Error {
 public:
  explicit InvalidArgumentError(const std::string& detail) : Error("invalid_argument", detail) {}
};

class OracleUnsupportedError : public Error {
 public:
  explicit OracleUnsupportedError(const std::string& detail)
      : Error("oracle_unsupported", detail) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& detail) : Error("parse_error", detail) {}
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& detail, std::vector<std::string> offending_keys)
      : Error("config_error", detail), keys_(std::move(offending_keys)) {}

  const std::vector<std::string>& offending_keys() const noexcept { return keys_; }

 private:
  std::vector<std::string> keys_;
};

}  // namespace rro
