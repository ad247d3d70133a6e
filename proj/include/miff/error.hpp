#pragma once

#include <stdexcept>
#include <string>

namespace miff {

enum class ErrorKind {
  InvalidArgument,
  Format,
  Config,
  Infeasible,
  FeatureMissing,
  Degenerate,
  NoModel,
  Unstabilizable,
  Internal,
};

const char* to_string(ErrorKind kind);

// All library failures are reported through this type; `kind()` drives the
// CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace miff
