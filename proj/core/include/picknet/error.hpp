#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace picknet {

enum class ErrorCode {
  kInvalidInput,
  kInvalidConfig,
  kInvalidState,
  kOutOfRange,
  kSamplingFailure,
  kSyncFailure,
  kTrainingDiverged,
  kIo,
  // Checkpoint loading.
  kMagicMismatch,
  kUnsupportedVersion,
  kTruncated,
  kShapeMismatch,
  kChecksumMismatch,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers (and the CLI
// exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace picknet
