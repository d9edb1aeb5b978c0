#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mcse {

// Error hierarchy. Everything user-visible derives from Error so the CLI can
// catch one type and report a clean message with a nonzero exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct UnsupportedOpError : Error {
  using Error::Error;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfSound = 343.0;  // m/s

template <typename... Args>
[[noreturn]] inline void fail_shape(const std::string& msg) {
  throw ShapeError(msg);
}

#define MCSE_CHECK(cond, ExType, msg)    \
  do {                                   \
    if (!(cond)) throw ExType(msg);      \
  } while (0)

}  // namespace mcse
