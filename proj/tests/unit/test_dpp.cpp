#include <random>
#include <set>

#include "fileio.hpp"
#include "market/dpp.hpp"
#include "market/error.hpp"
#include "support.hpp"

using namespace market::dpp;
using market::ErrorCode;
using market::Timestamp;
using market::canonical::Json;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const market::Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

Timestamp at(int s) { return Timestamp{test::t0().millis + s * 1000LL}; }

}  // namespace

TEST_CASE("minimal product yields v1 with only identification populated") {
  IfcLiteProduct p;
  p.product_id = "MIN";
  p.name = "Minimal";
  const auto d = create_dpp(p, "S", at(0));
  CHECK(d.version == 1);
  CHECK(d.sections.size() == 7);
  CHECK(d.sections.at("identification") == Json{{"product_id", "MIN"}, {"name", "Minimal"}});
  for (const auto& name : kSectionNames) {
    if (name != "identification") CHECK(d.sections.at(std::string(name)).empty());
  }
  CHECK(d.ownership.current_owner == "S");
  CHECK(d.ownership.history.size() == 1);
}

TEST_CASE("fields are routed into their sections") {
  const auto p = test::product("P1");
  const auto d = create_dpp(p, "S", at(0));
  CHECK(d.sections.at("regulatory_compliance").at("compliance_tags") == Json::array({"CE"}));
  CHECK(d.sections.at("material_composition").at("primary_material") == "steel");
  CHECK(d.sections.at("identification").at("manufacturer") == "Acme");
  CHECK(d.sections.at("usage_information").at("year_installed") == 2010);
  CHECK(d.sections.at("maintenance_repair").at("condition_notes") == "good");
}

TEST_CASE("IFC-lite fixture parses and ids are unique") {
  const auto products = parse_ifc_lite(market::detail::read_file(test::fixture("products.ifc.json")));
  REQUIRE(products.size() == 4);
  CHECK(products[0].dimensions.at("height").unit == "mm");
  CHECK(products[1].value_fields->damage_flags == std::set<std::string>{"rust"});
  CHECK_FALSE(products[3].value_fields.has_value());

  CHECK(code_of([] { parse_ifc_lite(R"([{"product_id":"A"},{"product_id":"A"}])"); }) ==
        ErrorCode::MalformedInput);
  CHECK(code_of([] { parse_ifc_lite(R"([{"name":"no id"}])"); }) == ErrorCode::MalformedInput);
  CHECK(code_of([] { parse_ifc_lite("not json"); }) == ErrorCode::MalformedInput);
}

TEST_CASE("a batch of 20 products gives 20 distinct passports") {
  Json file = {{"products", Json::array()}};
  for (int i = 0; i < 20; ++i) {
    file["products"].push_back(to_json(test::product("BATCH-" + std::to_string(i))));
  }
  const auto products = parse_ifc_lite(file.dump());
  std::set<std::string> ids;
  std::set<std::string> bytes;
  for (const auto& p : products) {
    const auto d = create_dpp(p, "S", at(0));
    ids.insert(d.product_id);
    bytes.insert(canonical_bytes(d));
  }
  CHECK(ids.size() == 20);
  CHECK(bytes.size() == 20);
}

TEST_CASE("canonical bytes ignore construction order and round-trip") {
  std::mt19937 rng(17);
  const Json contents[] = {{{"a", 1}}, {{"b", "two"}, {"c", {1, 2}}}, {{"d", nullptr}}, {{"e", 2.5}}};
  std::vector<std::string> names(kSectionNames.begin(), kSectionNames.end());
  std::set<std::string> outputs;
  for (int trial = 0; trial < 1000; ++trial) {
    std::shuffle(names.begin(), names.end(), rng);
    auto d = empty_passport("P", "S", at(0));
    for (std::size_t i = 0; i < names.size(); ++i) {
      // Content is keyed by section name, so only insertion order varies.
      const auto idx = std::find(kSectionNames.begin(), kSectionNames.end(), names[i]) - kSectionNames.begin();
      set_section(d, names[i], contents[idx % 4]);
    }
    outputs.insert(canonical_bytes(d));
  }
  REQUIRE(outputs.size() == 1);
  const auto& b = *outputs.begin();
  CHECK(canonical_bytes(parse(b)) == b);
}

TEST_CASE("version changes alter the bytes") {
  auto d = empty_passport("P", "S", at(0));
  const auto v2 = update_dpp_owner(d, "B", at(1));
  CHECK(canonical_bytes(d) != canonical_bytes(v2));
  CHECK(same_content(d, v2));
}

TEST_CASE("unknown sections and non-object content are rejected") {
  auto d = empty_passport("P", "S", at(0));
  CHECK(code_of([&] { set_section(d, "marketing", Json::object()); }) == ErrorCode::ValidationError);
  CHECK(code_of([&] { set_section(d, "end_of_life", Json::array()); }) == ErrorCode::ValidationError);
  auto j = to_json(d);
  j["sections"]["bogus"] = Json::object();
  CHECK(code_of([&] { from_json(j); }) == ErrorCode::ValidationError);
}

TEST_CASE("ownership transfer is a pure derivation") {
  const auto v1 = create_dpp(test::product("P"), "S", at(0));
  const auto before = canonical_bytes(v1);
  const auto v2 = update_dpp_owner(v1, "B", at(5));
  CHECK(canonical_bytes(v1) == before);
  CHECK(v2.version == 2);
  CHECK(v2.ownership.current_owner == "B");
  REQUIRE(v2.ownership.history.size() == 2);
  CHECK(v2.ownership.history[0].owner_id == "S");
  CHECK(v2.ownership.history[1].owner_id == "B");
  CHECK(code_of([&] { update_dpp_owner(v2, "B", at(6)); }) == ErrorCode::SelfTransfer);
  CHECK(code_of([&] { update_dpp_owner(v2, "C", at(5)); }) == ErrorCode::ValidationError);
}

TEST_CASE("sequential transfers replay to version 1 + transfers") {
  const std::vector<std::string> owners = {"S", "B", "C", "D", "E"};
  auto d = create_dpp(test::product("P"), owners[0], at(0));
  for (std::size_t i = 1; i < owners.size(); ++i) {
    d = update_dpp_owner(d, owners[i], at(static_cast<int>(i) * 10));
    CHECK(d.version == static_cast<int>(i) + 1);
  }
  CHECK(d.version == 1 + static_cast<int>(d.ownership.history.size()) - 1);
  for (std::size_t i = 0; i < owners.size(); ++i) CHECK(d.ownership.history[i].owner_id == owners[i]);
  for (std::size_t i = 1; i < d.ownership.history.size(); ++i) {
    CHECK(d.ownership.history[i - 1].at < d.ownership.history[i].at);
  }
  // S -> B -> C: v3, three history entries.
  auto e = create_dpp(test::product("Q"), "S", at(0));
  e = update_dpp_owner(update_dpp_owner(e, "B", at(1)), "C", at(2));
  CHECK(e.version == 3);
  CHECK(e.ownership.history.size() == 3);
}

TEST_CASE("parse rejects incoherent passports") {
  auto j = to_json(create_dpp(test::product("P"), "S", at(0)));
  auto bad_version = j;
  bad_version["version"] = 2;
  CHECK(code_of([&] { from_json(bad_version); }) == ErrorCode::ValidationError);
  auto bad_owner = j;
  bad_owner["ownership"]["current_owner"] = "X";
  CHECK(code_of([&] { from_json(bad_owner); }) == ErrorCode::ValidationError);
  CHECK(from_json(j) == create_dpp(test::product("P"), "S", at(0)));
}
