#pragma once

#include <stdexcept>
#include <string>

namespace laeo {

// Invalid input data or arguments. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system or format-level failure. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A record in a line-oriented file that could not be parsed.
class ParseError : public IoError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : IoError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace laeo
