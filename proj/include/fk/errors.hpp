#pragma once

#include <stdexcept>
#include <string>

namespace fk {

// Exit-code contract of the CLI: 0 pass, 1 property failure, 2 parse/usage,
// 3 refusal, 4 io. Library code throws; only the CLI maps to exit codes.
enum class ExitCode : int { Pass = 0, PropertyFailed = 1, Parse = 2, Refusal = 3, Io = 4 };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::Parse; }
};

// Malformed system / partition / experiment configuration.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what);
  ConfigError(const std::string& what, int line, int column);
  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  std::string field_;
  int line_ = 0;
  int column_ = 0;
};

// Operation invoked outside its domain (non-integer time on a map, mismatched systems, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but too large to process exactly.
class RefusalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::Refusal; }
};

// A constructive step whose preconditions failed; the message names the inequality.
class ConstructionError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::PropertyFailed; }
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::Io; }
};

}  // namespace fk
