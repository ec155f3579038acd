#pragma once

#include <stdexcept>
#include <string>

namespace bsrt {

enum class ErrorCode {
  InvalidArgument,
  NoCredential,
  InvalidScenario,
  ConfigError,
  InvariantViolation,
  ParseError,
  IoError,
  LedgerBadProposerSignature,
  LedgerQuorumMismatch,
  LedgerDuplicateRound,
  LedgerBrokenChain,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bsrt
