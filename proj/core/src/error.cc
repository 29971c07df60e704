#include "kdvqa/error.h"

namespace kdvqa {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kMissingArtifact: return "missing-artifact";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kNumeric: return "numeric";
  }
  return "unknown";
}

}  // namespace kdvqa
