#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace market {

/// UTC instant with millisecond resolution. Rendered as RFC-3339
/// "YYYY-MM-DDTHH:MM:SS.mmmZ".
struct Timestamp {
  std::int64_t millis = 0;

  std::string rfc3339() const;
  static Timestamp parse(std::string_view text);

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() = 0;
};

/// Wall clock that never returns the same instant twice, so consecutive
/// events (e.g. two ownership transfers) are strictly ordered.
class SystemClock final : public Clock {
 public:
  Timestamp now() override;

 private:
  std::atomic<std::int64_t> last_{0};
};

/// Deterministic clock for tests: starts at `start` and advances by `step`
/// milliseconds on every call.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start, std::int64_t step = 1000)
      : next_(start.millis), step_(step) {}
  Timestamp now() override { return Timestamp{next_.fetch_add(step_)}; }

 private:
  std::atomic<std::int64_t> next_;
  std::int64_t step_;
};

}  // namespace market
