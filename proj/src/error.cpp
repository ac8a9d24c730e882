#include "market/error.hpp"

namespace market {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyContent: return "empty_content";
    case ErrorCode::IoError: return "io_error";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::IntegrityFailure: return "integrity_failure";
    case ErrorCode::DuplicateProduct: return "duplicate_product";
    case ErrorCode::UnknownProduct: return "unknown_product";
    case ErrorCode::ValidationError: return "validation_error";
    case ErrorCode::InvalidValueFields: return "invalid_value_fields";
    case ErrorCode::NotStrongReuse: return "not_strong_reuse";
    case ErrorCode::LedgerUnavailable: return "ledger_unavailable";
    case ErrorCode::InvalidPrice: return "invalid_price";
    case ErrorCode::InvalidPagination: return "invalid_pagination";
    case ErrorCode::UnknownParticipant: return "unknown_participant";
    case ErrorCode::ListingNotActive: return "listing_not_active";
    case ErrorCode::VerificationFailed: return "verification_failed";
    case ErrorCode::OrderNotPayable: return "order_not_payable";
    case ErrorCode::SelfTransfer: return "self_transfer";
    case ErrorCode::IllegalTransition: return "illegal_transition";
    case ErrorCode::MalformedInput: return "malformed_input";
    case ErrorCode::ConfigError: return "config_error";
  }
  return "unknown";
}

}  // namespace market
