#pragma once

#include <stdexcept>
#include <string>

namespace aggflow {

// Malformed or unreadable files (flow files, images, configs on disk).
class IoError : public std::runtime_error {
 public:
  enum class Code {
    open_failed,
    bad_magic,
    truncated,
    bad_dimensions,
    bad_format,
    write_failed,
  };

  IoError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// A computation produced non-finite values or otherwise failed numerically.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed configuration text, unknown keys, or invalid values.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aggflow
