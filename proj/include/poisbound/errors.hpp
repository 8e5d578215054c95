#pragma once

#include <stdexcept>
#include <string>

namespace poisbound {

// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorCode {
  kInvalidParam,
  kZeroExitRate,
  kSingularInner,
  kNoConvergence,
  kTruncationTooSmall,
  kDegenerateDenominator,
  kReducible,
  kMissingExact,
  kConfig,
  kCertificateFailure,
};

const char* to_string(ErrorCode code);

class BoundError : public std::runtime_error {
 public:
  BoundError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define POISBOUND_DEFINE_ERROR(Name)                                         \
  class Name : public BoundError {                                           \
   public:                                                                   \
    explicit Name(const std::string& what) : BoundError(ErrorCode::k##Name, what) {} \
  };

POISBOUND_DEFINE_ERROR(InvalidParam)
POISBOUND_DEFINE_ERROR(ZeroExitRate)
POISBOUND_DEFINE_ERROR(SingularInner)
POISBOUND_DEFINE_ERROR(NoConvergence)
POISBOUND_DEFINE_ERROR(TruncationTooSmall)
POISBOUND_DEFINE_ERROR(DegenerateDenominator)
POISBOUND_DEFINE_ERROR(Reducible)
POISBOUND_DEFINE_ERROR(MissingExact)

#undef POISBOUND_DEFINE_ERROR

class ConfigError : public BoundError {
 public:
  explicit ConfigError(const std::string& what) : BoundError(ErrorCode::kConfig, what) {}
};

class CertificateFailure : public BoundError {
 public:
  explicit CertificateFailure(const std::string& what)
      : BoundError(ErrorCode::kCertificateFailure, what) {}
};

}  // namespace poisbound
