#include "picknet/error.hpp"

namespace picknet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kInvalidState: return "invalid-state";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kSamplingFailure: return "sampling-failure";
    case ErrorCode::kSyncFailure: return "sync-failure";
    case ErrorCode::kTrainingDiverged: return "training-diverged";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMagicMismatch: return "magic-mismatch";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kChecksumMismatch: return "checksum-mismatch";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace picknet
