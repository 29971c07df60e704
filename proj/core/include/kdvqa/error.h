#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kdvqa {

enum class ErrorCode {
  kConfig,
  kFormat,
  kIntegrity,
  kDuplicate,
  kValidation,
  kShape,
  kRange,
  kPrecondition,
  kChecksum,
  kMissingArtifact,
  kIo,
  kNumeric,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as this exception. `code()` gives the stable
// machine-readable category the CLI prints.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace kdvqa
