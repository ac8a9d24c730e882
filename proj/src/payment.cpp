#include "market/payment.hpp"

#include <cstdio>

#include "market/error.hpp"

namespace market {

Authorization SimulatedPaymentProvider::authorize(const PaymentRequest& request) {
  std::lock_guard lock(mutex_);
  char id[32];
  std::snprintf(id, sizeof id, "PAY-%06lu", next_++);
  Authorization auth{id, request.instrument.rfind("OK-", 0) == 0, {}};
  if (!auth.approved) {
    auth.reason = request.instrument.rfind("FAIL-", 0) == 0 ? "declined by issuer"
                                                            : "unrecognized instrument";
  }
  entries_.emplace(auth.transaction_id,
                   Entry{request, auth.approved ? State::Authorized : State::Declined});
  return auth;
}

void SimulatedPaymentProvider::capture(const std::string& transaction_id) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(transaction_id);
  if (it == entries_.end() || it->second.state != State::Authorized) {
    throw Error(ErrorCode::OrderNotPayable, "no authorized hold " + transaction_id);
  }
  it->second.state = State::Captured;
}

void SimulatedPaymentProvider::release(const std::string& transaction_id) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(transaction_id);
  if (it != entries_.end() && it->second.state == State::Authorized) {
    it->second.state = State::Released;
  }
}

void SimulatedPaymentProvider::refund(const std::string& transaction_id) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(transaction_id);
  if (it == entries_.end()) return;
  if (it->second.state == State::Captured) it->second.state = State::Refunded;
  if (it->second.state == State::Authorized) it->second.state = State::Released;
}

SimulatedPaymentProvider::State SimulatedPaymentProvider::state(
    const std::string& transaction_id) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(transaction_id);
  if (it == entries_.end()) throw Error(ErrorCode::NotFound, "unknown payment " + transaction_id);
  return it->second.state;
}

Money SimulatedPaymentProvider::settled_total() const {
  std::lock_guard lock(mutex_);
  std::int64_t cents = 0;
  for (const auto& [id, e] : entries_) {
    if (e.state == State::Captured) cents += e.request.amount.cents();
  }
  return Money::from_cents(cents);
}

}  // namespace market
