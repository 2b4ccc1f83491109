#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace brace {

/// Position of a token in a script: 1-based line and column, 0-based offset.
struct SourcePos {
  int line = 1;
  int column = 1;
  std::size_t offset = 0;

  friend bool operator==(const SourcePos &, const SourcePos &) = default;
};

std::string to_string(const SourcePos &pos);

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class LexError : public Error {
public:
  LexError(SourcePos pos, const std::string &what);
  SourcePos pos;
};

class ParseError : public Error {
public:
  ParseError(SourcePos pos, std::vector<std::string> expected, const std::string &found);
  SourcePos pos;
  std::vector<std::string> expected;
  std::string found;
};

class LoweringError : public Error {
public:
  using Error::Error;
};

class EvalTypeError : public Error {
public:
  using Error::Error;
};

class InversionUnsupported : public Error {
public:
  using Error::Error;
};

class OutOfBounds : public Error {
public:
  using Error::Error;
};

class ChecksumMismatch : public Error {
public:
  using Error::Error;
};

class VersionMismatch : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace brace
