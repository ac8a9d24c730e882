#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace market {

/// Machine-readable failure classes. The string form (see to_string) is what
/// the HTTP API puts in the `code` field of an error response.
enum class ErrorCode {
  EmptyContent,
  IoError,
  NotFound,
  IntegrityFailure,
  DuplicateProduct,
  UnknownProduct,
  ValidationError,
  InvalidValueFields,
  NotStrongReuse,
  LedgerUnavailable,
  InvalidPrice,
  InvalidPagination,
  UnknownParticipant,
  ListingNotActive,
  VerificationFailed,
  OrderNotPayable,
  SelfTransfer,
  IllegalTransition,
  MalformedInput,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace market
