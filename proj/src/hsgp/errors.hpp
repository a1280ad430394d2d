#pragma once

#include <stdexcept>
#include <string>

namespace hsgp {

enum class ErrorKind {
  kConfig,     // invalid arguments, malformed config, schema violations
  kNumeric,    // factorization failure, divergence, non-finite values
  kAssertion,  // violated invariant (bound check, construction identity)
  kIo,         // file access / parse failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorKind::kConfig, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorKind::kNumeric, msg); }
[[noreturn]] inline void throw_assertion(const std::string& msg) { throw Error(ErrorKind::kAssertion, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::kIo, msg); }

}  // namespace hsgp
