// errors.hpp - exception types with stable machine-readable codes.
//
// The CLI maps each code to a single-line "ERROR:<code>:" message.
#pragma once

#include <stdexcept>
#include <string>

namespace salvox {

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// File missing / unreadable / unwritable.
struct IoError : Error {
  explicit IoError(const std::string& what) : Error("IO", what) {}
};

// Malformed input file; carries the 1-based line where parsing failed.
struct ParseError : Error {
  ParseError(const std::string& what, long line)
      : Error("PARSE", what + " (line " + std::to_string(line) + ")"), line(line) {}
  long line;
};

// Bad or out-of-range configuration value, or unknown key.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("CONFIG", what) {}
};

// Mesh whose ray-parity is inconsistent in too many columns.
struct WatertightError : Error {
  explicit WatertightError(const std::string& what) : Error("WATERTIGHT", what) {}
};

// Geometric degeneracy: zero-extent mesh, zero-length direction, ...
struct DegenerateError : Error {
  explicit DegenerateError(const std::string& what) : Error("DEGENERATE", what) {}
};

// File exists but is not in the expected format.
struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error("FORMAT", what) {}
};

// Invalid argument to a library operation (dimension mismatch, k > n, ...).
struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& what) : Error("INVALID", what) {}
};

}  // namespace salvox
