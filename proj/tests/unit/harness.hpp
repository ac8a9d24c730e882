#pragma once

// Legal end states after an injected fault in add_product or pay.

#include <optional>
#include <string>

#include "market/error.hpp"
#include "market/marketplace.hpp"
#include "support.hpp"

namespace test {

using namespace market;

enum class Outcome { Applied, Reverted, Illegal };

inline const char* name(Outcome o) {
  return o == Outcome::Applied ? "applied" : o == Outcome::Reverted ? "reverted" : "illegal";
}

// Runs fn with the fault armed; returns true if the instance crashed.
template <class Fn>
bool run_with_fault(test::World& w, FaultPoint point, FaultMode mode, Fn fn) {
  w.m().faults().arm(point, mode);
  try {
    fn();
  } catch (const SimulatedCrash&) {
    w.reopen();
    return true;
  } catch (const Error&) {
  }
  w.m().faults().clear();
  return false;
}

inline Outcome classify_add(Marketplace& m, const std::string& pid) {
  const bool on_ledger = m.ledger().has_product(pid);
  const auto listing = m.listing_for_product(pid);
  if (!on_ledger && !listing) return Outcome::Reverted;
  if (on_ledger && listing && listing->status == ListingStatus::Active &&
      m.ledger().get_record(listing->anchor_tid).ipfs_ref == listing->dpp_address &&
      m.listing_validity(pid, listing->seller_id, listing->listing_id).v == 1) {
    return Outcome::Applied;
  }
  return Outcome::Illegal;
}

inline Outcome classify_pay(Marketplace& m, SimulatedPaymentProvider& payments, const std::string& lid,
                     const std::string& oid) {
  const auto listing = m.get_listing(lid);
  const auto order = m.get_order(oid);
  const auto history = m.ledger().history_for(listing.product_id);
  const bool transferred = m.ledger().get_record(history.back()).kind == RecordKind::OwnershipTransferred;
  const auto payment = order.payment_tid.empty()
                           ? std::optional<SimulatedPaymentProvider::State>()
                           : std::optional(payments.state(order.payment_tid));
  if (transferred && listing.status == ListingStatus::Sold && order.status == OrderStatus::Fulfilled &&
      payment == SimulatedPaymentProvider::State::Captured && order.ownership_tid == history.back()) {
    return Outcome::Applied;
  }
  if (!transferred && history.size() == 1 && listing.status == ListingStatus::Active &&
      (order.status == OrderStatus::Placed || order.status == OrderStatus::Failed) &&
      payment != SimulatedPaymentProvider::State::Captured) {
    return Outcome::Reverted;
  }
  return Outcome::Illegal;
}

}  // namespace test
