#ifndef PTL_ERRORS_HPP
#define PTL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ptl {

// Validation failures (bad specs, bad configs, malformed files): exit code 1.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : ValidationError {
  explicit ParseError(const std::string& msg) : ValidationError(msg) {}
};

// Runtime/numerical failures: exit code 2.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace ptl

#endif
