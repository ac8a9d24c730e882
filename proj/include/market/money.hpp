#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace market {

/// Non-negative currency amount held as integer minor units (cents).
/// Text form always carries exactly two fraction digits, e.g. "120.00".
class Money {
 public:
  constexpr Money() = default;

  static Money from_cents(std::int64_t cents);
  /// Accepts "120", "120.5" or "120.50". More than two fraction digits,
  /// signs, exponents and empty strings are rejected with InvalidPrice.
  static Money parse(std::string_view text);

  std::int64_t cents() const noexcept { return cents_; }
  std::string str() const;

  bool is_zero() const noexcept { return cents_ == 0; }

  friend constexpr auto operator<=>(const Money&, const Money&) = default;

 private:
  explicit constexpr Money(std::int64_t cents) : cents_(cents) {}
  std::int64_t cents_ = 0;
};

}  // namespace market
