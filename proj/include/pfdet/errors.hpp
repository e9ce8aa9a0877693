#pragma once

#include <stdexcept>
#include <string>

namespace pfdet {

// Error taxonomy shared by all modules. The CLI maps kinds to exit codes:
// Config/Validation -> 2, NotFound -> 3, everything else -> 4.
enum class ErrorKind {
  Config,      // invalid configuration key or value
  Validation,  // input data violates a documented invariant
  NotFound,    // missing file, sample id, or input artifact
  Contract,    // caller violated an operation precondition
  Data,        // undecodable or corrupt sample
  Integrity,   // artifact failed a structural or digest check
  Io,          // read or write failure
  Retrieval,   // LLM client transport failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace pfdet
