#pragma once

#include <stdexcept>
#include <string>

namespace adeye {

// Bad input data: scenario documents, world files, parameter values.
// `path` names the offending field ("actors[1].id", "ego.state.speed").
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Malformed text, reported at a 1-based line/column.
class ParseError : public ValidationError {
 public:
  ParseError(int line, int column, const std::string& what)
      : ValidationError("", "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

// Inconsistent run setup detected before the first tick (undeclared topics,
// unknown channel ids, wrong payload types).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A run that cannot continue (arbitration invariant broken, truncated trace).
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace adeye
