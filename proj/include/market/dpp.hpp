#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "market/canonical_json.hpp"
#include "market/cas.hpp"
#include "market/ccpo.hpp"
#include "market/time.hpp"

namespace market::dpp {

/// The seven passport sections, in canonical (sorted) order.
inline constexpr std::array<std::string_view, 7> kSectionNames = {
    "design_manufacturing", "end_of_life",        "identification",
    "maintenance_repair",   "material_composition", "regulatory_compliance",
    "usage_information",
};

bool is_section_name(std::string_view name) noexcept;

struct OwnershipEntry {
  std::string owner_id;
  Timestamp at;

  bool operator==(const OwnershipEntry&) const = default;
};

struct Ownership {
  std::string current_owner;
  std::vector<OwnershipEntry> history;

  bool operator==(const Ownership&) const = default;
};

struct DigitalProductPassport {
  std::string product_id;
  int version = 1;
  /// Always holds all seven sections; each value is a JSON object.
  std::map<std::string, canonical::Json, std::less<>> sections;
  std::vector<ContentAddress> attachments;
  Ownership ownership;
  Timestamp created_at;
  Timestamp updated_at;

  bool operator==(const DigitalProductPassport&) const = default;
};

/// A v1 passport with seven empty sections owned by `owner` since `at`.
DigitalProductPassport empty_passport(std::string product_id, std::string owner, Timestamp at);

/// Replaces one section. Throws ValidationError for unknown names or
/// non-object content.
void set_section(DigitalProductPassport& dpp, std::string_view name, canonical::Json content);

canonical::Json to_json(const DigitalProductPassport& dpp);
/// Validates every passport invariant; missing sections are treated as empty.
DigitalProductPassport from_json(const canonical::Json& j);

std::string canonical_bytes(const DigitalProductPassport& dpp);
DigitalProductPassport parse(std::string_view bytes);

/// True when two passports describe the same product content, ignoring
/// version, ownership and timestamps.
bool same_content(const DigitalProductPassport& a, const DigitalProductPassport& b);

struct Dimension {
  double value = 0.0;
  std::string unit;
};

/// Simplified product description standing in for an IFC element.
struct IfcLiteProduct {
  std::string product_id;
  std::string name;
  std::string material;
  std::map<std::string, Dimension> dimensions;
  std::string manufacturer;
  std::optional<int> year_installed;
  std::string condition_notes;
  std::vector<std::string> compliance_tags;
  // Marketplace facets.
  std::string category;
  std::string location;
  /// Pre-extracted inputs for the reuse assessment, when supplied.
  std::optional<ccpo::ValueFields> value_fields;
};

IfcLiteProduct ifc_product_from_json(const canonical::Json& j);
canonical::Json to_json(const IfcLiteProduct& p);

/// Parses an IFC-lite file: either {"products": [...]} or a bare array.
/// Product ids must be non-empty and unique; violations raise MalformedInput.
std::vector<IfcLiteProduct> parse_ifc_lite(std::string_view text);

DigitalProductPassport create_dpp(const IfcLiteProduct& product, std::string owner, Timestamp at);

/// Pure derivation: returns version+1 owned by `buyer`. The input is not
/// modified. Throws SelfTransfer, or ValidationError if `at` does not
/// come strictly after the last ownership entry.
DigitalProductPassport update_dpp_owner(const DigitalProductPassport& dpp,
                                        std::string_view buyer, Timestamp at);

}  // namespace market::dpp
