#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pdial {

enum class ErrorKind {
  input,     // caller passed something invalid
  config,    // configuration or file content is inconsistent
  parse,     // malformed JSON / JSONL
  numeric,   // non-finite values, solver non-convergence
  protocol,  // a remote service answered with something unusable
  backend,   // transport failure or non-success status; may be retried
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(ErrorKind::parse, what), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(ErrorKind::protocol, what) {}
};

class BackendError : public Error {
 public:
  BackendError(const std::string& what, int status, bool retriable)
      : Error(ErrorKind::backend, what), status_(status), retriable_(retriable) {}
  /// HTTP status, or 0 when the request never got a response.
  int status() const noexcept { return status_; }
  bool retriable() const noexcept { return retriable_; }

 private:
  int status_;
  bool retriable_;
};

/// Process exit code for the CLI: 2 for usage/config/input problems,
/// 3 for numeric, protocol and backend failures.
inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::input:
    case ErrorKind::config:
    case ErrorKind::parse:
      return 2;
    case ErrorKind::numeric:
    case ErrorKind::protocol:
    case ErrorKind::backend:
      return 3;
  }
  return 3;
}

}  // namespace pdial
