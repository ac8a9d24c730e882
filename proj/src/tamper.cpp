#include "market/tamper.hpp"

#include <fstream>

#include "market/error.hpp"

namespace market {

void TamperHooks::repoint_listing_dpp(Marketplace& m, const std::string& listing_id,
                                      const ContentAddress& address) {
  auto listing = m.get_listing(listing_id);
  listing.dpp_address = address;
  std::unique_lock lock(m.state_mutex_);
  m.put_listing_locked(listing);
}

void TamperHooks::set_listing_price(Marketplace& m, const std::string& listing_id, Money price) {
  auto listing = m.get_listing(listing_id);
  listing.price = price;
  std::unique_lock lock(m.state_mutex_);
  m.put_listing_locked(listing);
}

ContentAddress TamperHooks::store_altered_dpp(Marketplace& m, const std::string& listing_id,
                                              const canonical::Json& sections) {
  const auto listing = m.get_listing(listing_id);
  auto passport = dpp::parse(m.cas().retrieve(listing.dpp_address));
  for (const auto& [name, content] : sections.items()) dpp::set_section(passport, name, content);
  const auto address = m.cas().store(dpp::canonical_bytes(passport));
  repoint_listing_dpp(m, listing_id, address);
  return address;
}

void TamperHooks::corrupt_cas_object(Marketplace& m, const ContentAddress& address,
                                     std::size_t offset, std::uint8_t mask) {
  const auto path = m.cas().object_path(address);
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  f.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(f.tellg());
  if (size == 0) throw Error(ErrorCode::IoError, "empty object " + path.string());
  offset %= size;
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.get(c);
  c = static_cast<char>(static_cast<std::uint8_t>(c) ^ mask);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(c);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

void TamperHooks::unregister_participant(Marketplace& m, const std::string& id) {
  std::unique_lock lock(m.state_mutex_);
  m.journal_.append(canonical::Json{{"type", "participant_removed"}, {"id", id}});
  m.participants_.erase(id);
}

void TamperHooks::rebind_order(Marketplace& m, const std::string& order_id,
                               const std::string& listing_id) {
  auto order = m.get_order(order_id);
  order.listing_id = listing_id;
  std::unique_lock lock(m.state_mutex_);
  m.journal_.append(canonical::Json{{"type", "order"}, {"order", to_json(order)}});
  m.orders_[order.order_id] = order;
}

}  // namespace market
