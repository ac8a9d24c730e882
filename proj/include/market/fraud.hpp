#pragma once

// Adversarial scenario engine: state machines for the malicious seller,
// buyer and marketplace cases, staged against a dedicated fixture through
// the tamper hooks.

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "market/marketplace.hpp"

namespace market::fraud {

enum class SellerState { P_init, P_sell, P_fault, P_verify, P_resolve, P_fraud };
enum class SellerEvent { list_dpp, discover_fault, verify_dpp, match, mismatch };

std::string_view to_string(SellerState s) noexcept;
std::string_view to_string(SellerEvent e) noexcept;
SellerState seller_state_from_string(std::string_view s);
SellerEvent seller_event_from_string(std::string_view s);

/// Exactly the five legal edges; anything else throws IllegalTransition.
SellerState seller_machine_step(SellerState state, SellerEvent event);
bool is_terminal(SellerState s) noexcept;

// Listing-price check run by the buyer against the marketplace.
enum class PriceState { Listed, Checking, Verified, FraudDetected };
enum class PriceEvent { verify_price, match, mismatch, flag_penalty };

std::string_view to_string(PriceState s) noexcept;
std::string_view to_string(PriceEvent e) noexcept;
PriceState price_machine_step(PriceState state, PriceEvent event);

struct TraceEntry {
  std::string from;
  std::string event;
  std::string to;
  Timestamp at;
};

struct ScenarioOutcome {
  std::string scenario;  // seller | buyer | marketplace | honest
  std::string variant;
  std::string final_state;
  bool detected = false;
  bool expected_detection = false;
  std::string message;
  std::vector<TraceEntry> trace;
  /// Penalty/alert events raised on detection.
  std::vector<std::string> flags;
  std::string evidence_tid;

  bool as_expected() const { return detected == expected_detection; }
};

canonical::Json to_json(const ScenarioOutcome& o);

/// Re-runs a recorded trace from the scenario's initial state.
std::string replay_trace(std::string_view scenario, const std::vector<TraceEntry>& trace);

/// A marketplace over a private data directory with a manual clock and
/// the payment simulator.
struct Fixture {
  explicit Fixture(const std::filesystem::path& dir);

  ManualClock clock;
  SimulatedPaymentProvider payments;
  std::unique_ptr<Marketplace> market;
};

enum class SellerVariant { Tamper, CorruptInPlace, Control, Reanchor };
enum class BuyerVariant { FalseClaim, GenuineClaim, MultiTransfer };
enum class MarketplaceVariant { Inflate, Deflate, LawfulUpdate };

std::string_view to_string(SellerVariant v) noexcept;
std::string_view to_string(BuyerVariant v) noexcept;
std::string_view to_string(MarketplaceVariant v) noexcept;

ScenarioOutcome run_malicious_seller_scenario(Marketplace& m, SellerVariant variant);
ScenarioOutcome run_malicious_buyer_scenario(Marketplace& m, BuyerVariant variant);
ScenarioOutcome run_malicious_marketplace_scenario(Marketplace& m, MarketplaceVariant variant);

/// Random products, prices and lawful updates/sales, then verification of
/// every listing. A correct system never detects anything here.
ScenarioOutcome run_honest_run(Marketplace& m, std::mt19937_64& rng, int run);

/// Runs every variant of the named scenario ("all" for every scenario),
/// each on a fresh fixture below base_dir.
std::vector<ScenarioOutcome> run_suite(std::string_view scenario,
                                       const std::filesystem::path& base_dir);

}  // namespace market::fraud
