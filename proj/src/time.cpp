#include "market/time.hpp"

#include <chrono>
#include <cstdio>

#include "market/error.hpp"

namespace market {

namespace chr = std::chrono;

std::string Timestamp::rfc3339() const {
  const chr::sys_time<chr::milliseconds> tp{chr::milliseconds(millis)};
  const auto day = chr::floor<chr::days>(tp);
  const chr::year_month_day ymd{day};
  const chr::hh_mm_ss hms{tp - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()),
                static_cast<int>(hms.subseconds().count()));
  return buf;
}

Timestamp Timestamp::parse(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, ms = 0;
  char tail = 0;
  const std::string owned(text);
  // Exactly the form rfc3339() emits; anything else is rejected.
  if (owned.size() != 24 ||
      std::sscanf(owned.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%c", &y, &mo, &d,
                  &h, &mi, &s, &ms, &tail) != 8 ||
      tail != 'Z') {
    throw Error(ErrorCode::MalformedInput,
                "bad RFC-3339 timestamp '" + owned + "'");
  }
  const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)},
                                chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) {
    throw Error(ErrorCode::MalformedInput,
                "bad RFC-3339 timestamp '" + owned + "'");
  }
  const auto tp = chr::sys_days{ymd} + chr::hours{h} + chr::minutes{mi} +
                  chr::seconds{s} + chr::milliseconds{ms};
  return Timestamp{
      chr::duration_cast<chr::milliseconds>(tp.time_since_epoch()).count()};
}

Timestamp SystemClock::now() {
  const auto wall = chr::duration_cast<chr::milliseconds>(
                        chr::system_clock::now().time_since_epoch())
                        .count();
  auto prev = last_.load();
  std::int64_t next = 0;
  do {
    next = wall > prev ? wall : prev + 1;
  } while (!last_.compare_exchange_weak(prev, next));
  return Timestamp{next};
}

}  // namespace market
