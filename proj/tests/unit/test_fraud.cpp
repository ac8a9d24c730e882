#include "market/error.hpp"
#include "market/fraud.hpp"
#include "support.hpp"

using namespace market;
using namespace market::fraud;

TEST_CASE("seller machine has exactly the five edges") {
  int legal = 0;
  for (int s = 0; s < 6; ++s) {
    for (int e = 0; e < 5; ++e) {
      const auto state = static_cast<SellerState>(s);
      const auto event = static_cast<SellerEvent>(e);
      try {
        seller_machine_step(state, event);
        ++legal;
      } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::IllegalTransition);
      }
    }
  }
  CHECK(legal == 5);
  CHECK(seller_machine_step(SellerState::P_verify, SellerEvent::match) == SellerState::P_resolve);
  CHECK(seller_machine_step(SellerState::P_verify, SellerEvent::mismatch) == SellerState::P_fraud);
  CHECK_THROWS_AS(seller_machine_step(SellerState::P_init, SellerEvent::discover_fault), Error);
  CHECK(is_terminal(SellerState::P_fraud));
  CHECK(is_terminal(SellerState::P_resolve));
  CHECK_FALSE(is_terminal(SellerState::P_verify));
}

TEST_CASE("seller scenarios") {
  struct Case {
    SellerVariant v;
    bool detected;
    const char* message;
  };
  for (const auto& c : {Case{SellerVariant::Tamper, true, "Discrepancy found: DPP does not match."},
                        Case{SellerVariant::CorruptInPlace, true, "Discrepancy found: DPP does not match."},
                        Case{SellerVariant::Control, false, "Verification successful."},
                        Case{SellerVariant::Reanchor, false, "Verification successful."}}) {
    CAPTURE(to_string(c.v));
    test::TempDir dir;
    Fixture f(dir.path());
    const auto o = run_malicious_seller_scenario(*f.market, c.v);
    CHECK(o.detected == c.detected);
    CHECK(o.as_expected());
    CHECK(o.message == c.message);
    CHECK(o.final_state == (c.detected ? "P_fraud" : "P_resolve"));
    CHECK(o.detected == (o.final_state == "P_fraud"));
    CHECK(replay_trace("seller", o.trace) == o.final_state);
    CHECK(std::find(o.flags.begin(), o.flags.end(), "addresses_diverged") == o.flags.end());
  }
}

TEST_CASE("buyer scenarios") {
  for (auto v : {BuyerVariant::FalseClaim, BuyerVariant::GenuineClaim, BuyerVariant::MultiTransfer}) {
    CAPTURE(to_string(v));
    test::TempDir dir;
    Fixture f(dir.path());
    const auto o = run_malicious_buyer_scenario(*f.market, v);
    CHECK(o.as_expected());
    CHECK(o.detected == (v == BuyerVariant::GenuineClaim));
    CHECK(replay_trace("buyer", o.trace) == o.final_state);
    if (v == BuyerVariant::MultiTransfer) {
      // The claim is about the first sale even though a later one exists.
      const auto transfers = f.market->ledger().count(RecordKind::OwnershipTransferred);
      CHECK(transfers == 2);
      const auto claimed = TransactionId::parse(o.evidence_tid);
      CHECK(claimed != *f.market->ledger().latest_tid_for("BUY-multi_transfer"));
    }
  }
}

TEST_CASE("marketplace price scenarios") {
  for (auto v : {MarketplaceVariant::Inflate, MarketplaceVariant::Deflate, MarketplaceVariant::LawfulUpdate}) {
    CAPTURE(to_string(v));
    test::TempDir dir;
    Fixture f(dir.path());
    const auto o = run_malicious_marketplace_scenario(*f.market, v);
    CHECK(o.as_expected());
    if (v == MarketplaceVariant::LawfulUpdate) {
      CHECK(o.message == "Verification successful.");
      CHECK(o.final_state == "Verified");
      CHECK(o.flags.empty());
    } else {
      CHECK(o.message == "Verification failed: Pricing does not match.");
      CHECK(o.final_state == "FraudDetected");
      CHECK(o.trace.back().event == "flag_penalty");
    }
    CHECK(replay_trace("marketplace", o.trace) == o.final_state);
  }
}

TEST_CASE("tampered traces do not replay") {
  test::TempDir dir;
  Fixture f(dir.path());
  auto o = run_malicious_seller_scenario(*f.market, SellerVariant::Control);
  std::swap(o.trace[0], o.trace[1]);
  CHECK_THROWS_AS(replay_trace("seller", o.trace), Error);
}

TEST_CASE("100 randomized honest runs raise no detections") {
  test::TempDir dir;
  std::mt19937_64 rng(20250101);
  int false_positives = 0;
  for (int i = 0; i < 100; ++i) {
    Fixture f(dir / ("run-" + std::to_string(i)));
    const auto o = run_honest_run(*f.market, rng, i);
    if (o.detected) {
      ++false_positives;
      MESSAGE(o.variant << ": " << o.message);
    }
  }
  CHECK(false_positives == 0);
}

TEST_CASE("suite covers every scenario") {
  test::TempDir dir;
  const auto all = run_suite("all", dir.path());
  CHECK(all.size() == 10);
  for (const auto& o : all) CHECK(o.as_expected());
  CHECK(run_suite("buyer", dir.path()).size() == 3);
  CHECK_THROWS_AS(run_suite("nobody", dir.path()), Error);
}
