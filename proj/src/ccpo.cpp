#include "market/ccpo.hpp"

#include <algorithm>
#include <cmath>

#include "market/error.hpp"

using market::canonical::Json;

namespace market::ccpo {

namespace {

[[noreturn]] void invalid(const std::string& why) {
  throw Error(ErrorCode::InvalidValueFields, why);
}

}  // namespace

void validate(const ValueFields& v) {
  if (!std::isfinite(v.condition_score) || v.condition_score < 0.0 ||
      v.condition_score > 1.0) {
    invalid("condition_score must be within [0, 1]");
  }
  if (!std::isfinite(v.age_years) || v.age_years < 0.0 || v.age_years > 200.0) {
    invalid("age_years must be within [0, 200]");
  }
  if (!std::isfinite(v.expected_lifecycle_years) || v.expected_lifecycle_years <= 0.0) {
    invalid("expected_lifecycle_years must be positive");
  }
}

void validate(const ReuseThresholds& t) {
  if (!(t.weak >= 0.0 && t.weak < t.strong && t.strong <= 1.0)) {
    throw Error(ErrorCode::ConfigError,
                "thresholds must satisfy 0 <= theta_weak < theta_strong <= 1");
  }
}

void validate(const ScoreWeights& w) {
  for (double x : {w.condition, w.lifecycle, w.damage_penalty}) {
    if (!std::isfinite(x) || x < 0.0) {
      throw Error(ErrorCode::ConfigError, "score weights must be non-negative");
    }
  }
}

Json to_json(const ValueFields& v) {
  return Json{{"material", v.material},
              {"condition_score", v.condition_score},
              {"age_years", v.age_years},
              {"expected_lifecycle_years", v.expected_lifecycle_years},
              {"usage_history", v.usage_history},
              {"damage_flags", v.damage_flags}};
}

ValueFields value_fields_from_json(const Json& j) {
  try {
    ValueFields v;
    v.material = j.value("material", std::string{});
    v.condition_score = j.at("condition_score").get<double>();
    v.age_years = j.at("age_years").get<double>();
    v.expected_lifecycle_years = j.at("expected_lifecycle_years").get<double>();
    v.usage_history = j.value("usage_history", std::string{});
    if (j.contains("damage_flags")) {
      v.damage_flags = j.at("damage_flags").get<std::set<std::string>>();
    }
    return v;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidValueFields, std::string("bad value fields: ") + e.what());
  }
}

std::string_view to_string(ReuseCategory c) noexcept {
  switch (c) {
    case ReuseCategory::Strong: return "strong";
    case ReuseCategory::Weak: return "weak";
    case ReuseCategory::None: return "none";
  }
  return "?";
}

std::string_view to_string(Disposition d) noexcept {
  switch (d) {
    case Disposition::List: return "List";
    case Disposition::Repair: return "Repair";
    case Disposition::RecycleOrLandfill: return "RecycleOrLandfill";
  }
  return "?";
}

double score(const ValueFields& v, const ScoreWeights& w) {
  validate(v);
  const double remaining =
      std::max(0.0, 1.0 - v.age_years / v.expected_lifecycle_years);
  const double raw = w.condition * v.condition_score + w.lifecycle * remaining -
                     w.damage_penalty * static_cast<double>(v.damage_flags.size());
  const double clamped = std::clamp(raw, 0.0, 1.0);
  return std::round(clamped * 1e9) / 1e9;
}

ReuseCategory category_for_score(double s, const ReuseThresholds& t) {
  if (s >= t.strong) return ReuseCategory::Strong;
  if (s >= t.weak) return ReuseCategory::Weak;
  return ReuseCategory::None;
}

ReuseCategory categorize(const ValueFields& v, const ReuseThresholds& t,
                         const ScoreWeights& w) {
  return category_for_score(score(v, w), t);
}

int listing_status(ReuseCategory c) noexcept {
  return c == ReuseCategory::Strong ? 1 : 0;
}

Disposition disposition(ReuseCategory c) noexcept {
  switch (c) {
    case ReuseCategory::Strong: return Disposition::List;
    case ReuseCategory::Weak: return Disposition::Repair;
    case ReuseCategory::None: return Disposition::RecycleOrLandfill;
  }
  return Disposition::RecycleOrLandfill;
}

Assessment assess(const ValueFields& v, const ReuseThresholds& t, const ScoreWeights& w) {
  Assessment a;
  a.score = score(v, w);
  a.category = category_for_score(a.score, t);
  a.listing_status = listing_status(a.category);
  a.disposition = disposition(a.category);
  return a;
}

Json to_json(const Assessment& a) {
  return Json{{"score", a.score},
              {"category", std::string(to_string(a.category))},
              {"listing_status", a.listing_status},
              {"disposition", std::string(to_string(a.disposition))}};
}

}  // namespace market::ccpo
