#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace tpt {

// Error category, carried so callers can branch without parsing messages.
enum class ErrorKind {
  Shape,    // dimension / extent mismatch
  Mask,     // fully masked attention row or empty sequence
  Config,   // invalid or inconsistent configuration
  Data,     // file format, manifest, vocabulary problems
  Numeric,  // non-finite values where finite ones are required
  Usage,    // API misuse (wrong tape, wrong precision, ...)
};

class TptError : public std::runtime_error {
 public:
  TptError(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {
inline void format_parts(std::ostringstream&) {}
template <class T, class... Rest>
void format_parts(std::ostringstream& os, const T& part, const Rest&... rest) {
  os << part;
  format_parts(os, rest...);
}
}  // namespace detail

template <class... Parts>
[[noreturn]] void fail(ErrorKind kind, const Parts&... parts) {
  std::ostringstream os;
  detail::format_parts(os, parts...);
  throw TptError(kind, os.str());
}

template <class... Parts>
void require(bool condition, ErrorKind kind, const Parts&... parts) {
  if (!condition) fail(kind, parts...);
}

}  // namespace tpt
