#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace pcdiff {

// Runtime failure (bad input data, numeric blow-up, I/O).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (shape/hyperparameter contract violations).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

namespace detail {
template <class E, class... Args>
[[noreturn]] inline void throw_error(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw E(os.str());
}
}  // namespace detail

}  // namespace pcdiff

#define PCD_CHECK(cond, ...)                                        \
  do {                                                              \
    if (!(cond)) {                                                  \
      ::pcdiff::detail::throw_error<::pcdiff::Error>(__VA_ARGS__);  \
    }                                                               \
  } while (0)

#define PCD_CHECK_CFG(cond, ...)                                          \
  do {                                                                    \
    if (!(cond)) {                                                        \
      ::pcdiff::detail::throw_error<::pcdiff::ConfigError>(__VA_ARGS__);  \
    }                                                                     \
  } while (0)
