#include "market/fraud.hpp"

#include <array>

#include "market/error.hpp"
#include "market/tamper.hpp"

using market::canonical::Json;

namespace market::fraud {

namespace {

constexpr std::array kSellerStates = {"P_init", "P_sell", "P_fault", "P_verify", "P_resolve", "P_fraud"};
constexpr std::array kSellerEvents = {"list_dpp", "discover_fault", "verify_dpp", "match", "mismatch"};

// Hides the recorded damage, the attack the seller scenario stages.
const Json& concealment() {
  static const Json sections = {
      {"maintenance_repair", {{"condition_notes", "as new, no defects"}, {"damage_flags", Json::array()}}}};
  return sections;
}

dpp::IfcLiteProduct demo_product(const std::string& id) {
  dpp::IfcLiteProduct p;
  p.product_id = id;
  p.name = "Reclaimed oak door " + id;
  p.material = "timber";
  p.category = "door";
  p.location = "Leeds";
  p.manufacturer = "Joinery Ltd";
  p.dimensions["height"] = {2040.0, "mm"};
  p.dimensions["width"] = {826.0, "mm"};
  p.year_installed = 2012;
  p.condition_notes = "hairline crack on lower rail";
  p.compliance_tags = {"FD30"};
  ccpo::ValueFields v;
  v.material = "timber";
  v.condition_score = 0.95;
  v.age_years = 5;
  v.expected_lifecycle_years = 60;
  v.usage_history = "interior, domestic";
  v.damage_flags = {"crack"};
  p.value_fields = v;
  return p;
}

class SellerRun {
 public:
  explicit SellerRun(Clock& clock) : clock_(clock) {}

  void step(SellerEvent e) {
    const auto next = seller_machine_step(state_, e);
    trace_.push_back({std::string(to_string(state_)), std::string(to_string(e)),
                      std::string(to_string(next)), clock_.now()});
    state_ = next;
  }
  SellerState state() const { return state_; }
  std::vector<TraceEntry>& trace() { return trace_; }

 private:
  Clock& clock_;
  SellerState state_ = SellerState::P_init;
  std::vector<TraceEntry> trace_;
};

SystemClock& trace_clock() {
  static SystemClock clock;
  return clock;
}

struct Verdict {
  bool match = false;
  std::string message;
};

// Compares the DPP the buyer received (anchored by the ownership record at
// claimed_tid) with the DPP anchored for the listing when the sale happened.
Verdict arbitrate(const Marketplace& m, std::string_view pid, const TransactionId& claimed_tid) {
  const auto sold = m.ledger().get_record(claimed_tid);
  if (sold.product_id != pid || sold.kind != RecordKind::OwnershipTransferred) {
    throw Error(ErrorCode::ValidationError, claimed_tid.str() + " is not a sale of " + std::string(pid));
  }
  std::optional<TransactionId> advertised_tid;
  for (const auto& tid : m.ledger().history_for(pid)) {
    if (tid < claimed_tid) advertised_tid = tid;
  }
  if (!advertised_tid) return {false, std::string(kDppMismatch)};
  const auto advertised = m.ledger().get_record(*advertised_tid);
  try {
    const auto delivered = dpp::parse(m.cas().retrieve(sold.ipfs_ref));
    const auto listed = dpp::parse(m.cas().retrieve(advertised.ipfs_ref));
    if (dpp::same_content(delivered, listed)) return {true, std::string(kVerificationSuccessful)};
  } catch (const Error&) {
  }
  return {false, std::string(kDppMismatch)};
}

void register_parties(Marketplace& m) {
  m.register_participant("seller-1", false, true);
  m.register_participant("buyer-1", true, true);
  m.register_participant("buyer-2", true, false);
}

}  // namespace

std::string_view to_string(SellerState s) noexcept { return kSellerStates[static_cast<int>(s)]; }
std::string_view to_string(SellerEvent e) noexcept { return kSellerEvents[static_cast<int>(e)]; }

SellerState seller_state_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kSellerStates.size(); ++i) {
    if (s == kSellerStates[i]) return static_cast<SellerState>(i);
  }
  throw Error(ErrorCode::ValidationError, "unknown seller state '" + std::string(s) + "'");
}

SellerEvent seller_event_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kSellerEvents.size(); ++i) {
    if (s == kSellerEvents[i]) return static_cast<SellerEvent>(i);
  }
  throw Error(ErrorCode::ValidationError, "unknown seller event '" + std::string(s) + "'");
}

SellerState seller_machine_step(SellerState state, SellerEvent event) {
  using S = SellerState;
  using E = SellerEvent;
  if (state == S::P_init && event == E::list_dpp) return S::P_sell;
  if (state == S::P_sell && event == E::discover_fault) return S::P_fault;
  if (state == S::P_fault && event == E::verify_dpp) return S::P_verify;
  if (state == S::P_verify && event == E::match) return S::P_resolve;
  if (state == S::P_verify && event == E::mismatch) return S::P_fraud;
  throw Error(ErrorCode::IllegalTransition, "no transition (" + std::string(to_string(state)) + ", " +
                                                std::string(to_string(event)) + ")");
}

bool is_terminal(SellerState s) noexcept {
  return s == SellerState::P_resolve || s == SellerState::P_fraud;
}

std::string_view to_string(PriceState s) noexcept {
  switch (s) {
    case PriceState::Listed: return "Listed";
    case PriceState::Checking: return "Checking";
    case PriceState::Verified: return "Verified";
    case PriceState::FraudDetected: return "FraudDetected";
  }
  return "?";
}

std::string_view to_string(PriceEvent e) noexcept {
  switch (e) {
    case PriceEvent::verify_price: return "verify_price";
    case PriceEvent::match: return "match";
    case PriceEvent::mismatch: return "mismatch";
    case PriceEvent::flag_penalty: return "flag_penalty";
  }
  return "?";
}

PriceState price_machine_step(PriceState state, PriceEvent event) {
  using S = PriceState;
  using E = PriceEvent;
  if (state == S::Listed && event == E::verify_price) return S::Checking;
  if (state == S::Checking && event == E::match) return S::Verified;
  if (state == S::Checking && event == E::mismatch) return S::FraudDetected;
  if (state == S::FraudDetected && event == E::flag_penalty) return S::FraudDetected;
  throw Error(ErrorCode::IllegalTransition, "no transition (" + std::string(to_string(state)) + ", " +
                                                std::string(to_string(event)) + ")");
}

std::string_view to_string(SellerVariant v) noexcept {
  switch (v) {
    case SellerVariant::Tamper: return "tamper";
    case SellerVariant::CorruptInPlace: return "corrupt_in_place";
    case SellerVariant::Control: return "control";
    case SellerVariant::Reanchor: return "reanchor";
  }
  return "?";
}

std::string_view to_string(BuyerVariant v) noexcept {
  switch (v) {
    case BuyerVariant::FalseClaim: return "false_claim";
    case BuyerVariant::GenuineClaim: return "genuine_claim";
    case BuyerVariant::MultiTransfer: return "multi_transfer";
  }
  return "?";
}

std::string_view to_string(MarketplaceVariant v) noexcept {
  switch (v) {
    case MarketplaceVariant::Inflate: return "inflate";
    case MarketplaceVariant::Deflate: return "deflate";
    case MarketplaceVariant::LawfulUpdate: return "lawful_update";
  }
  return "?";
}

Json to_json(const ScenarioOutcome& o) {
  Json trace = Json::array();
  for (const auto& t : o.trace) {
    trace.push_back({{"from", t.from}, {"event", t.event}, {"to", t.to}, {"at", t.at.rfc3339()}});
  }
  return Json{{"scenario", o.scenario},
              {"variant", o.variant},
              {"final_state", o.final_state},
              {"detected", o.detected},
              {"expected_detection", o.expected_detection},
              {"as_expected", o.as_expected()},
              {"message", o.message},
              {"flags", o.flags},
              {"evidence_tid", o.evidence_tid},
              {"trace", std::move(trace)}};
}

std::string replay_trace(std::string_view scenario, const std::vector<TraceEntry>& trace) {
  if (scenario == "seller" || scenario == "buyer") {
    auto s = SellerState::P_init;
    for (const auto& t : trace) {
      if (t.from != to_string(s)) {
        throw Error(ErrorCode::IllegalTransition, "trace entry starts at " + t.from);
      }
      s = seller_machine_step(s, seller_event_from_string(t.event));
    }
    return std::string(to_string(s));
  }
  if (scenario == "marketplace") {
    auto s = PriceState::Listed;
    for (const auto& t : trace) {
      if (t.from != to_string(s)) {
        throw Error(ErrorCode::IllegalTransition, "trace entry starts at " + t.from);
      }
      PriceEvent e;
      if (t.event == "verify_price") e = PriceEvent::verify_price;
      else if (t.event == "match") e = PriceEvent::match;
      else if (t.event == "mismatch") e = PriceEvent::mismatch;
      else if (t.event == "flag_penalty") e = PriceEvent::flag_penalty;
      else throw Error(ErrorCode::ValidationError, "unknown price event '" + t.event + "'");
      s = price_machine_step(s, e);
    }
    return std::string(to_string(s));
  }
  throw Error(ErrorCode::ValidationError, "scenario '" + std::string(scenario) + "' has no machine");
}

Fixture::Fixture(const std::filesystem::path& dir)
    : clock(Timestamp::parse("2025-01-01T09:00:00.000Z")) {
  MarketplaceConfig config;
  config.data_dir = dir;
  config.fsync = false;
  market = std::make_unique<Marketplace>(config, clock, payments);
}

ScenarioOutcome run_malicious_seller_scenario(Marketplace& m, SellerVariant variant) {
  register_parties(m);
  SellerRun run(trace_clock());
  ScenarioOutcome out;
  out.scenario = "seller";
  out.variant = std::string(to_string(variant));
  out.expected_detection = variant == SellerVariant::Tamper || variant == SellerVariant::CorruptInPlace;

  const auto product = demo_product("SELL-" + out.variant);
  auto listing = m.add_product(product, "seller-1", Money::parse("250.00"));
  run.step(SellerEvent::list_dpp);

  switch (variant) {
    case SellerVariant::Tamper:
      TamperHooks::store_altered_dpp(m, listing.listing_id, concealment());
      break;
    case SellerVariant::CorruptInPlace:
      TamperHooks::corrupt_cas_object(m, listing.dpp_address,
                                      m.cas().retrieve(listing.dpp_address).size() / 2, 0x20);
      break;
    case SellerVariant::Reanchor: {
      TamperHooks::store_altered_dpp(m, listing.listing_id, concealment());
      listing = m.revise_dpp(listing.listing_id, "seller-1", concealment());
      const auto anchored = m.ledger().get_record(listing.anchor_tid).ipfs_ref;
      if (anchored != m.get_listing(listing.listing_id).dpp_address) {
        out.flags.push_back("addresses_diverged");
      }
      break;
    }
    case SellerVariant::Control:
      break;
  }

  // The buyer checks the listing against the ledger record it advertises.
  run.step(SellerEvent::discover_fault);
  run.step(SellerEvent::verify_dpp);
  const auto advertised = m.get_listing(listing.listing_id);
  const auto report = m.verify_product(product.product_id, advertised.anchor_tid);
  run.step(report.v_i == 1 ? SellerEvent::match : SellerEvent::mismatch);

  out.final_state = std::string(to_string(run.state()));
  out.detected = run.state() == SellerState::P_fraud;
  out.message = report.message;
  out.evidence_tid = advertised.anchor_tid.str();
  if (out.detected) out.flags.push_back("penalty_flagged");
  out.trace = std::move(run.trace());
  return out;
}

ScenarioOutcome run_malicious_buyer_scenario(Marketplace& m, BuyerVariant variant) {
  register_parties(m);
  SellerRun run(trace_clock());
  ScenarioOutcome out;
  out.scenario = "buyer";
  out.variant = std::string(to_string(variant));
  out.expected_detection = variant == BuyerVariant::GenuineClaim;

  const auto product = demo_product("BUY-" + out.variant);
  const auto listing = m.add_product(product, "seller-1", Money::parse("180.00"));
  run.step(SellerEvent::list_dpp);

  const auto order = m.place_order("buyer-1", listing.listing_id);
  if (variant == BuyerVariant::GenuineClaim) {
    // The seller swaps the passport after the buyer's pre-order check.
    TamperHooks::store_altered_dpp(m, listing.listing_id, concealment());
  }
  const auto receipt = m.pay(order.order_id, "OK-card-1");
  if (receipt.t_status != 1 || !receipt.ownership_tid) {
    throw Error(ErrorCode::ValidationError, "fixture sale failed: " + receipt.message);
  }
  const auto claimed_tid = *receipt.ownership_tid;

  if (variant == BuyerVariant::MultiTransfer) {
    const auto relisted = m.relist(product.product_id, "buyer-1", Money::parse("210.00"));
    const auto revised = m.revise_dpp(
        relisted.listing_id, "buyer-1",
        Json{{"maintenance_repair", {{"condition_notes", "crack repaired and refinished"},
                                     {"damage_flags", Json::array()}}}});
    const auto second = m.place_order("buyer-2", revised.listing_id);
    const auto r2 = m.pay(second.order_id, "OK-card-2");
    if (r2.t_status != 1) throw Error(ErrorCode::ValidationError, "fixture resale failed");
  }

  // The buyer of claimed_tid says the delivered product differs from the listing.
  run.step(SellerEvent::discover_fault);
  run.step(SellerEvent::verify_dpp);
  const auto verdict = arbitrate(m, product.product_id, claimed_tid);
  run.step(verdict.match ? SellerEvent::match : SellerEvent::mismatch);

  out.final_state = std::string(to_string(run.state()));
  out.detected = run.state() == SellerState::P_fraud;
  out.message = verdict.match ? "Claim refuted. " + verdict.message
                              : "Claim upheld. " + verdict.message;
  out.evidence_tid = claimed_tid.str();
  if (out.detected) out.flags.push_back("penalty_flagged");
  out.trace = std::move(run.trace());
  return out;
}

ScenarioOutcome run_malicious_marketplace_scenario(Marketplace& m, MarketplaceVariant variant) {
  register_parties(m);
  ScenarioOutcome out;
  out.scenario = "marketplace";
  out.variant = std::string(to_string(variant));
  out.expected_detection = variant != MarketplaceVariant::LawfulUpdate;

  const auto product = demo_product("MKT-" + out.variant);
  const auto listing = m.add_product(product, "seller-1", Money::parse("400.00"));

  switch (variant) {
    case MarketplaceVariant::Inflate:
      TamperHooks::set_listing_price(m, listing.listing_id, Money::parse("460.00"));
      break;
    case MarketplaceVariant::Deflate:
      TamperHooks::set_listing_price(m, listing.listing_id, Money::parse("399.99"));
      break;
    case MarketplaceVariant::LawfulUpdate:
      m.update_price(listing.listing_id, "seller-1", Money::parse("425.00"));
      break;
  }

  auto state = PriceState::Listed;
  auto step = [&](PriceEvent e) {
    const auto next = price_machine_step(state, e);
    out.trace.push_back({std::string(to_string(state)), std::string(to_string(e)),
                         std::string(to_string(next)), trace_clock().now()});
    state = next;
  };
  step(PriceEvent::verify_price);
  const auto advertised = m.get_listing(listing.listing_id);
  const auto report = m.verify_product(product.product_id, advertised.anchor_tid);
  step(report.price_match ? PriceEvent::match : PriceEvent::mismatch);
  if (state == PriceState::FraudDetected) {
    step(PriceEvent::flag_penalty);
    out.flags.push_back("alert_penalty");
  }

  out.final_state = std::string(to_string(state));
  out.detected = state == PriceState::FraudDetected;
  out.message = report.message;
  out.evidence_tid = advertised.anchor_tid.str();
  return out;
}

ScenarioOutcome run_honest_run(Marketplace& m, std::mt19937_64& rng, int run) {
  register_parties(m);
  ScenarioOutcome out;
  out.scenario = "honest";
  out.variant = "run-" + std::to_string(run);
  out.expected_detection = false;

  auto price = [&] {
    return Money::from_cents(std::uniform_int_distribution<std::int64_t>(100, 500000)(rng));
  };
  std::vector<std::string> problems;
  const int products = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int k = 0; k < products; ++k) {
    auto product = demo_product("H" + std::to_string(run) + "-" + std::to_string(k));
    product.value_fields->condition_score = std::uniform_real_distribution<double>(0.9, 1.0)(rng);
    product.value_fields->age_years = std::uniform_int_distribution<int>(0, 10)(rng);
    if (rng() % 2) product.value_fields->damage_flags.clear();
    auto listing = m.add_product(product, "seller-1", price());

    std::optional<TransactionId> sale;
    switch (rng() % 4) {
      case 0:
        break;
      case 1:
        listing = m.update_price(listing.listing_id, "seller-1", price());
        break;
      case 2:
        listing = m.revise_dpp(listing.listing_id, "seller-1",
                               Json{{"end_of_life", {{"route", "reuse"}, {"note", std::to_string(rng() % 1000)}}}});
        break;
      case 3: {
        const auto order = m.place_order("buyer-1", listing.listing_id);
        const auto receipt = m.pay(order.order_id, "OK-card");
        if (receipt.t_status != 1) problems.push_back("honest sale declined");
        sale = receipt.ownership_tid;
        if (rng() % 2) listing = m.relist(product.product_id, "buyer-1", price());
        break;
      }
    }
    const auto current = m.get_listing(listing.listing_id);
    const auto report = m.verify_product(product.product_id, current.anchor_tid);
    if (!report.successful()) problems.push_back(product.product_id + ": " + report.message);
    if (sale && !arbitrate(m, product.product_id, *sale).match) {
      problems.push_back(product.product_id + ": honest sale failed arbitration");
    }
  }
  for (const auto& v : m.check_invariants()) problems.push_back(v);

  out.detected = !problems.empty();
  out.final_state = out.detected ? "detected" : "clean";
  out.message = out.detected ? problems.front() : std::string(kVerificationSuccessful);
  return out;
}

std::vector<ScenarioOutcome> run_suite(std::string_view scenario,
                                       const std::filesystem::path& base_dir) {
  const bool all = scenario == "all";
  if (!all && scenario != "seller" && scenario != "buyer" && scenario != "marketplace") {
    throw Error(ErrorCode::ValidationError, "unknown scenario '" + std::string(scenario) + "'");
  }
  std::vector<ScenarioOutcome> outcomes;
  auto fresh = [&](const std::string& name) {
    const auto dir = base_dir / name;
    std::filesystem::remove_all(dir);
    return std::make_unique<Fixture>(dir);
  };
  if (all || scenario == "seller") {
    for (auto v : {SellerVariant::Tamper, SellerVariant::CorruptInPlace, SellerVariant::Control,
                   SellerVariant::Reanchor}) {
      auto f = fresh("seller-" + std::string(to_string(v)));
      outcomes.push_back(run_malicious_seller_scenario(*f->market, v));
    }
  }
  if (all || scenario == "buyer") {
    for (auto v : {BuyerVariant::FalseClaim, BuyerVariant::GenuineClaim, BuyerVariant::MultiTransfer}) {
      auto f = fresh("buyer-" + std::string(to_string(v)));
      outcomes.push_back(run_malicious_buyer_scenario(*f->market, v));
    }
  }
  if (all || scenario == "marketplace") {
    for (auto v : {MarketplaceVariant::Inflate, MarketplaceVariant::Deflate,
                   MarketplaceVariant::LawfulUpdate}) {
      auto f = fresh("marketplace-" + std::string(to_string(v)));
      outcomes.push_back(run_malicious_marketplace_scenario(*f->market, v));
    }
  }
  return outcomes;
}

}  // namespace market::fraud
