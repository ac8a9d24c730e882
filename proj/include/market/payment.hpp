#pragma once

#include <map>
#include <mutex>
#include <string>

#include "market/money.hpp"

namespace market {

struct PaymentRequest {
  std::string buyer_id;
  std::string seller_id;
  std::string product_id;
  Money amount;
  std::string instrument;
};

struct Authorization {
  std::string transaction_id;
  bool approved = false;
  std::string reason;
};

/// Two-phase payment gateway: authorize places a hold, capture settles it,
/// release drops an uncaptured hold, refund reverses a captured payment.
/// release and refund are no-ops for unknown or already-settled ids.
class PaymentProvider {
 public:
  virtual ~PaymentProvider() = default;
  virtual Authorization authorize(const PaymentRequest& request) = 0;
  virtual void capture(const std::string& transaction_id) = 0;
  virtual void release(const std::string& transaction_id) = 0;
  virtual void refund(const std::string& transaction_id) = 0;
};

/// Deterministic gateway: instruments starting with "OK-" are approved,
/// everything else ("FAIL-..." or unrecognized) is declined.
class SimulatedPaymentProvider final : public PaymentProvider {
 public:
  enum class State { Authorized, Declined, Captured, Released, Refunded };

  Authorization authorize(const PaymentRequest& request) override;
  void capture(const std::string& transaction_id) override;
  void release(const std::string& transaction_id) override;
  void refund(const std::string& transaction_id) override;

  /// Throws NotFound for unknown ids.
  State state(const std::string& transaction_id) const;
  /// Sum of captured, unrefunded payments.
  Money settled_total() const;

 private:
  struct Entry {
    PaymentRequest request;
    State state;
  };
  mutable std::mutex mutex_;
  std::map<std::string, Entry> entries_;
  unsigned long next_ = 1;
};

}  // namespace market
