#include "market/dpp.hpp"

#include <algorithm>
#include <set>

#include "market/error.hpp"

using market::canonical::Json;

namespace market::dpp {

namespace {

[[noreturn]] void invalid(const std::string& why) {
  throw Error(ErrorCode::ValidationError, "invalid DPP: " + why);
}

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorCode::MalformedInput, "malformed IFC-lite product: " + why);
}

void fill_missing_sections(DigitalProductPassport& dpp) {
  for (auto name : kSectionNames) {
    if (dpp.sections.find(name) == dpp.sections.end()) {
      dpp.sections.emplace(std::string(name), Json::object());
    }
  }
}

}  // namespace

bool is_section_name(std::string_view name) noexcept {
  return std::find(kSectionNames.begin(), kSectionNames.end(), name) != kSectionNames.end();
}

DigitalProductPassport empty_passport(std::string product_id, std::string owner, Timestamp at) {
  if (product_id.empty()) invalid("empty product_id");
  if (owner.empty()) invalid("empty owner");
  DigitalProductPassport dpp;
  dpp.product_id = std::move(product_id);
  dpp.ownership.current_owner = owner;
  dpp.ownership.history.push_back({std::move(owner), at});
  dpp.created_at = at;
  dpp.updated_at = at;
  fill_missing_sections(dpp);
  return dpp;
}

void set_section(DigitalProductPassport& dpp, std::string_view name, Json content) {
  if (!is_section_name(name)) invalid("unknown section '" + std::string(name) + "'");
  if (!content.is_object()) invalid("section '" + std::string(name) + "' must be an object");
  dpp.sections[std::string(name)] = std::move(content);
}

Json to_json(const DigitalProductPassport& dpp) {
  Json history = Json::array();
  for (const auto& e : dpp.ownership.history) {
    history.push_back({{"owner_id", e.owner_id}, {"at", e.at.rfc3339()}});
  }
  Json attachments = Json::array();
  for (const auto& a : dpp.attachments) attachments.push_back(a.hex());
  Json sections = Json::object();
  for (auto name : kSectionNames) {
    auto it = dpp.sections.find(name);
    sections[std::string(name)] = it == dpp.sections.end() ? Json::object() : it->second;
  }
  return Json{{"product_id", dpp.product_id},
              {"version", dpp.version},
              {"sections", std::move(sections)},
              {"attachments", std::move(attachments)},
              {"ownership",
               {{"current_owner", dpp.ownership.current_owner}, {"history", std::move(history)}}},
              {"created_at", dpp.created_at.rfc3339()},
              {"updated_at", dpp.updated_at.rfc3339()}};
}

DigitalProductPassport from_json(const Json& j) {
  DigitalProductPassport dpp;
  try {
    if (!j.is_object()) invalid("not an object");
    dpp.product_id = j.at("product_id").get<std::string>();
    dpp.version = j.at("version").get<int>();
    for (const auto& [name, content] : j.at("sections").items()) {
      set_section(dpp, name, content);
    }
    fill_missing_sections(dpp);
    for (const auto& a : j.value("attachments", Json::array())) {
      dpp.attachments.push_back(ContentAddress::parse(a.get<std::string>()));
    }
    const auto& own = j.at("ownership");
    dpp.ownership.current_owner = own.at("current_owner").get<std::string>();
    for (const auto& e : own.at("history")) {
      dpp.ownership.history.push_back(
          {e.at("owner_id").get<std::string>(), Timestamp::parse(e.at("at").get<std::string>())});
    }
    dpp.created_at = Timestamp::parse(j.at("created_at").get<std::string>());
    dpp.updated_at = Timestamp::parse(j.at("updated_at").get<std::string>());
  } catch (const Json::exception& e) {
    invalid(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ValidationError) throw;
    invalid(e.what());
  }

  if (dpp.product_id.empty()) invalid("empty product_id");
  if (dpp.version < 1) invalid("version must be >= 1");
  const auto& hist = dpp.ownership.history;
  if (hist.empty()) invalid("empty ownership history");
  if (hist.back().owner_id != dpp.ownership.current_owner) {
    invalid("current owner differs from last history entry");
  }
  for (std::size_t i = 1; i < hist.size(); ++i) {
    if (hist[i].at < hist[i - 1].at) invalid("ownership history out of order");
  }
  if (static_cast<std::size_t>(dpp.version) != hist.size()) {
    invalid("version must equal 1 + number of ownership transfers");
  }
  return dpp;
}

std::string canonical_bytes(const DigitalProductPassport& dpp) {
  return canonical::dump(to_json(dpp));
}

DigitalProductPassport parse(std::string_view bytes) {
  return from_json(canonical::parse(bytes));
}

bool same_content(const DigitalProductPassport& a, const DigitalProductPassport& b) {
  return a.product_id == b.product_id && a.sections == b.sections &&
         a.attachments == b.attachments;
}

IfcLiteProduct ifc_product_from_json(const Json& j) {
  if (!j.is_object()) malformed("product entry is not an object");
  IfcLiteProduct p;
  try {
    if (!j.contains("product_id")) malformed("missing product_id");
    p.product_id = j.at("product_id").get<std::string>();
    if (p.product_id.empty()) malformed("empty product_id");
    p.name = j.value("name", std::string{});
    p.material = j.value("material", std::string{});
    p.manufacturer = j.value("manufacturer", std::string{});
    p.condition_notes = j.value("condition_notes", std::string{});
    p.category = j.value("category", std::string{});
    p.location = j.value("location", std::string{});
    if (j.contains("year_installed") && !j.at("year_installed").is_null()) {
      p.year_installed = j.at("year_installed").get<int>();
    }
    if (j.contains("dimensions")) {
      for (const auto& [key, dim] : j.at("dimensions").items()) {
        p.dimensions[key] = Dimension{dim.at("value").get<double>(),
                                      dim.value("unit", std::string{})};
      }
    }
    if (j.contains("compliance_tags")) {
      p.compliance_tags = j.at("compliance_tags").get<std::vector<std::string>>();
    }
    if (j.contains("value_fields")) {
      p.value_fields = ccpo::value_fields_from_json(j.at("value_fields"));
    }
  } catch (const Json::exception& e) {
    malformed(e.what());
  }
  return p;
}

Json to_json(const IfcLiteProduct& p) {
  Json j{{"product_id", p.product_id}, {"name", p.name}};
  if (!p.material.empty()) j["material"] = p.material;
  if (!p.manufacturer.empty()) j["manufacturer"] = p.manufacturer;
  if (!p.condition_notes.empty()) j["condition_notes"] = p.condition_notes;
  if (!p.category.empty()) j["category"] = p.category;
  if (!p.location.empty()) j["location"] = p.location;
  if (p.year_installed) j["year_installed"] = *p.year_installed;
  if (!p.dimensions.empty()) {
    Json dims = Json::object();
    for (const auto& [k, d] : p.dimensions) dims[k] = {{"value", d.value}, {"unit", d.unit}};
    j["dimensions"] = dims;
  }
  if (!p.compliance_tags.empty()) j["compliance_tags"] = p.compliance_tags;
  if (p.value_fields) j["value_fields"] = ccpo::to_json(*p.value_fields);
  return j;
}

std::vector<IfcLiteProduct> parse_ifc_lite(std::string_view text) {
  const Json doc = canonical::parse(text);
  const Json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("products")) {
      throw Error(ErrorCode::MalformedInput, "IFC-lite file has no 'products' list");
    }
    list = &doc.at("products");
  }
  if (!list->is_array()) {
    throw Error(ErrorCode::MalformedInput, "IFC-lite products must be a list");
  }
  std::vector<IfcLiteProduct> out;
  std::set<std::string> seen;
  for (const auto& entry : *list) {
    auto p = ifc_product_from_json(entry);
    if (!seen.insert(p.product_id).second) {
      throw Error(ErrorCode::MalformedInput,
                  "duplicate product_id '" + p.product_id + "' in IFC-lite file");
    }
    out.push_back(std::move(p));
  }
  return out;
}

DigitalProductPassport create_dpp(const IfcLiteProduct& p, std::string owner, Timestamp at) {
  if (p.product_id.empty()) malformed("missing product_id");
  auto dpp = empty_passport(p.product_id, std::move(owner), at);

  Json ident{{"product_id", p.product_id}, {"name", p.name}};
  if (!p.manufacturer.empty()) ident["manufacturer"] = p.manufacturer;
  if (!p.category.empty()) ident["category"] = p.category;
  set_section(dpp, "identification", std::move(ident));

  if (!p.material.empty()) {
    set_section(dpp, "material_composition", {{"primary_material", p.material}});
  }
  if (!p.dimensions.empty()) {
    Json dims = Json::object();
    for (const auto& [k, d] : p.dimensions) dims[k] = {{"value", d.value}, {"unit", d.unit}};
    set_section(dpp, "design_manufacturing", {{"dimensions", std::move(dims)}});
  }
  Json usage = Json::object();
  if (p.year_installed) usage["year_installed"] = *p.year_installed;
  if (!p.location.empty()) usage["location"] = p.location;
  if (p.value_fields && !p.value_fields->usage_history.empty()) {
    usage["usage_history"] = p.value_fields->usage_history;
  }
  set_section(dpp, "usage_information", std::move(usage));

  Json maintenance = Json::object();
  if (!p.condition_notes.empty()) maintenance["condition_notes"] = p.condition_notes;
  if (p.value_fields && !p.value_fields->damage_flags.empty()) {
    maintenance["damage_flags"] = p.value_fields->damage_flags;
  }
  set_section(dpp, "maintenance_repair", std::move(maintenance));

  if (!p.compliance_tags.empty()) {
    set_section(dpp, "regulatory_compliance", {{"compliance_tags", p.compliance_tags}});
  }
  return dpp;
}

DigitalProductPassport update_dpp_owner(const DigitalProductPassport& dpp,
                                        std::string_view buyer, Timestamp at) {
  if (buyer.empty()) invalid("empty buyer id");
  if (buyer == dpp.ownership.current_owner) {
    throw Error(ErrorCode::SelfTransfer,
                "'" + std::string(buyer) + "' already owns " + dpp.product_id);
  }
  if (!dpp.ownership.history.empty() && at <= dpp.ownership.history.back().at) {
    invalid("transfer time must follow the previous ownership entry");
  }
  auto next = dpp;
  next.version += 1;
  next.ownership.current_owner = std::string(buyer);
  next.ownership.history.push_back({std::string(buyer), at});
  next.updated_at = at;
  return next;
}

}  // namespace market::dpp
