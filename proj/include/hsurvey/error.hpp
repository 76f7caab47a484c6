#pragma once

#include <stdexcept>
#include <string>

namespace hsurvey {

/// Broad failure classes. The CLI maps these onto its exit codes.
enum class ErrorKind {
  InvalidInput,  ///< bad parameters, malformed data, usage errors
  Infeasible,    ///< a design or budget that cannot meet its constraints
  Io,            ///< unreadable or unwritable files
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) {
  throw Error(ErrorKind::InvalidInput, what);
}

[[noreturn]] inline void fail_infeasible(const std::string& what) {
  throw Error(ErrorKind::Infeasible, what);
}

}  // namespace hsurvey
