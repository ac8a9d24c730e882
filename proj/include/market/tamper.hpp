#pragma once

// Test-only backdoors that mutate marketplace state behind the public API.
// Available only in builds that define MARKET_TAMPER_HOOKS.

#ifndef MARKET_TAMPER_HOOKS
#error "tamper hooks are only available in test builds"
#endif

#include <cstdint>

#include "market/marketplace.hpp"

namespace market {

class TamperHooks {
 public:
  /// Points the listing at a different DPP address without touching the ledger.
  static void repoint_listing_dpp(Marketplace& m, const std::string& listing_id,
                                  const ContentAddress& address);
  /// Edits the listed price directly in the listing store.
  static void set_listing_price(Marketplace& m, const std::string& listing_id, Money price);
  /// Replaces sections of the listing's DPP, stores the altered passport and
  /// repoints the listing at it. Returns the altered address.
  static ContentAddress store_altered_dpp(Marketplace& m, const std::string& listing_id,
                                          const canonical::Json& sections);
  /// XORs one byte of a stored object in place.
  static void corrupt_cas_object(Marketplace& m, const ContentAddress& address,
                                 std::size_t offset, std::uint8_t mask = 0x01);
  static void unregister_participant(Marketplace& m, const std::string& id);
  /// Makes an order point at another listing.
  static void rebind_order(Marketplace& m, const std::string& order_id,
                           const std::string& listing_id);
};

}  // namespace market
