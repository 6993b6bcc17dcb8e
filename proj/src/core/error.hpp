#pragma once

#include <stdexcept>
#include <string>

namespace cnf {

// Error categories shared by the C++ core and the C API status codes.
enum class errc {
  ok = 0,
  invalid_argument = 1,
  shape_mismatch = 2,
  domain_error = 3,
  io_error = 4,
  bad_magic = 5,
  truncated = 6,
  version_mismatch = 7,
  diverged = 8,
  already_exists = 9,
  unknown_key = 10,
  internal = 11,
};

const char* errc_name(errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace cnf
