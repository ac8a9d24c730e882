#include "market/money.hpp"

#include <charconv>
#include <limits>

#include "market/error.hpp"

namespace market {

namespace {

[[noreturn]] void bad_price(std::string_view text) {
  throw Error(ErrorCode::InvalidPrice,
              "invalid price '" + std::string(text) + "'");
}

bool all_digits(std::string_view s) {
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

}  // namespace

Money Money::from_cents(std::int64_t cents) {
  if (cents < 0) {
    throw Error(ErrorCode::InvalidPrice, "price must be non-negative");
  }
  return Money(cents);
}

Money Money::parse(std::string_view text) {
  const auto dot = text.find('.');
  std::string_view whole = text.substr(0, dot);
  std::string_view frac =
      dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);

  if (whole.empty() || !all_digits(whole)) bad_price(text);
  if (dot != std::string_view::npos && (frac.empty() || frac.size() > 2)) {
    bad_price(text);
  }
  if (!all_digits(frac)) bad_price(text);
  // Keep well clear of int64 overflow once scaled to cents.
  if (whole.size() > 15) bad_price(text);

  std::int64_t units = 0;
  std::from_chars(whole.data(), whole.data() + whole.size(), units);
  std::int64_t minor = 0;
  if (!frac.empty()) {
    std::from_chars(frac.data(), frac.data() + frac.size(), minor);
    if (frac.size() == 1) minor *= 10;
  }
  return Money(units * 100 + minor);
}

std::string Money::str() const {
  std::string out = std::to_string(cents_ / 100);
  const auto minor = cents_ % 100;
  out.push_back('.');
  out.push_back(static_cast<char>('0' + minor / 10));
  out.push_back(static_cast<char>('0' + minor % 10));
  return out;
}

}  // namespace market
