#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace vreid {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input values or shapes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem problems: missing roots, unreadable or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad run configuration (unknown keys, inconsistent settings).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline void cat_into(std::ostringstream&) {}

template <typename T, typename... Rest>
void cat_into(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  cat_into(os, rest...);
}
}  // namespace detail

template <typename... Ts>
std::string cat(const Ts&... parts) {
  std::ostringstream os;
  detail::cat_into(os, parts...);
  return os.str();
}

}  // namespace vreid
