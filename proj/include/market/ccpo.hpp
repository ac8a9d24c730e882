#pragma once

// Reuse assessment: value fields -> score -> reuse category -> listing
// status and disposition.

#include <set>
#include <string>
#include <string_view>

#include "market/canonical_json.hpp"

namespace market::ccpo {

struct ValueFields {
  std::string material;
  double condition_score = 0.0;  // [0, 1]
  double age_years = 0.0;        // [0, 200]
  double expected_lifecycle_years = 1.0;  // > 0
  std::string usage_history;
  std::set<std::string> damage_flags;
};

/// Throws InvalidValueFields when an invariant does not hold.
void validate(const ValueFields& values);

canonical::Json to_json(const ValueFields& values);
ValueFields value_fields_from_json(const canonical::Json& j);

struct ScoreWeights {
  double condition = 0.6;
  double lifecycle = 0.4;
  double damage_penalty = 0.1;
};

struct ReuseThresholds {
  double strong = 0.70;
  double weak = 0.40;
};

/// Throws ConfigError unless 0 <= weak < strong <= 1.
void validate(const ReuseThresholds& thresholds);
/// Throws ConfigError on negative or non-finite weights.
void validate(const ScoreWeights& weights);

enum class ReuseCategory { None = 0, Weak = 1, Strong = 2 };
enum class Disposition { List, Repair, RecycleOrLandfill };

std::string_view to_string(ReuseCategory c) noexcept;
std::string_view to_string(Disposition d) noexcept;

/// clamp(w_c * condition + w_l * max(0, 1 - age / lifecycle)
///       - w_d * |damage_flags|, 0, 1), rounded to 1e-9 so that
/// hand-evaluated inputs compare exactly against thresholds.
double score(const ValueFields& values, const ScoreWeights& weights = {});

ReuseCategory category_for_score(double s, const ReuseThresholds& thresholds);
ReuseCategory categorize(const ValueFields& values,
                         const ReuseThresholds& thresholds = {},
                         const ScoreWeights& weights = {});

int listing_status(ReuseCategory c) noexcept;
Disposition disposition(ReuseCategory c) noexcept;

struct Assessment {
  double score = 0.0;
  ReuseCategory category = ReuseCategory::None;
  int listing_status = 0;
  Disposition disposition = Disposition::RecycleOrLandfill;
};

Assessment assess(const ValueFields& values, const ReuseThresholds& thresholds = {},
                  const ScoreWeights& weights = {});
canonical::Json to_json(const Assessment& a);

}  // namespace market::ccpo
