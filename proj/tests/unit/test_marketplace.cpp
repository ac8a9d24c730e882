#include <atomic>
#include <set>
#include <thread>

#include "market/error.hpp"
#include "market/marketplace.hpp"
#include "market/tamper.hpp"
#include "support.hpp"

using namespace market;
using canonical::Json;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("add_product anchors the DPP and publishes a valid listing") {
  test::World w;
  test::parties(w.m());
  AddProductTimings t;
  const auto l = w.m().add_product(test::product("P1"), "S", Money::parse("99.50"),
                                   test::strong_values(), &t);
  CHECK(l.listing_id == "L000001");
  CHECK(l.status == ListingStatus::Active);
  const auto rec = w.m().ledger().get_record(l.anchor_tid);
  CHECK(rec.kind == RecordKind::ProductAdded);
  CHECK(rec.ipfs_ref == l.dpp_address);
  CHECK(rec.price == Money::parse("99.50"));
  CHECK(rec.cpd.dpp_version == 1);
  CHECK(w.m().retrieve_dpp(l.listing_id).product_id == "P1");
  CHECK(t.dpp_creation_ms >= 0.0);
  CHECK(w.m().check_invariants().empty());
}

TEST_CASE("add_product gates on reuse category and identity") {
  test::World w;
  test::parties(w.m());
  auto weak = test::strong_values();
  weak.condition_score = 0.5;
  try {
    w.m().add_product(test::product("W"), "S", Money::parse("10"), weak);
    FAIL("weak product listed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotStrongReuse);
    CHECK(std::string(e.what()).find("Repair") != std::string::npos);
  }
  CHECK_FALSE(w.m().ledger().has_product("W"));
  CHECK(w.m().cas().size() == 0);

  w.m().add_product(test::product("P"), "S", Money::parse("10"));
  CHECK(code_of([&] { w.m().add_product(test::product("P"), "S", Money::parse("11")); }) ==
        ErrorCode::DuplicateProduct);
  CHECK(code_of([&] { w.m().add_product(test::product("Q"), "B", Money::parse("11")); }) ==
        ErrorCode::UnknownParticipant);
  CHECK(code_of([&] { w.m().add_product(test::product("Q"), "S", Money::from_cents(0)); }) ==
        ErrorCode::InvalidPrice);
  CHECK(w.m().listings().size() == 1);
}

TEST_CASE("listing validity truth table: v == x * y") {
  for (int x = 0; x <= 1; ++x) {
    for (int y = 0; y <= 1; ++y) {
      CAPTURE(x);
      CAPTURE(y);
      test::World w;
      test::parties(w.m());
      const auto l = w.m().add_product(test::product("P"), "S", Money::parse("10"));
      if (!y) {
        const auto other = w.m().cas().store("unanchored passport bytes");
        TamperHooks::repoint_listing_dpp(w.m(), l.listing_id, other);
      }
      if (!x) TamperHooks::unregister_participant(w.m(), "S");
      const auto v = w.m().listing_validity("P", "S", l.listing_id);
      CHECK(v.x == x);
      CHECK(v.y == y);
      CHECK(v.v == x * y);
      const auto page = w.m().search({});
      CHECK(page.total == static_cast<std::size_t>(x * y));
    }
  }
}

TEST_CASE("verification messages are bit-exact") {
  test::World w;
  test::parties(w.m());
  const auto l = w.m().add_product(test::product("P"), "S", Money::parse("10"));

  auto r = w.m().verify_product("P", l.anchor_tid.str());
  CHECK(r.message == "Verification successful.");
  CHECK(r.x_i == 1);
  CHECK(r.y_i == 1);
  CHECK(r.v_i == 1);

  TamperHooks::set_listing_price(w.m(), l.listing_id, Money::parse("12"));
  r = w.m().verify_product("P", l.anchor_tid);
  CHECK(r.message == "Verification failed: Pricing does not match.");
  CHECK(r.v_i == 1);
  CHECK_FALSE(r.price_match);

  TamperHooks::set_listing_price(w.m(), l.listing_id, Money::parse("10"));
  TamperHooks::store_altered_dpp(w.m(), l.listing_id, Json{{"end_of_life", {{"route", "landfill"}}}});
  r = w.m().verify_product("P", l.anchor_tid);
  CHECK(r.message == "Discrepancy found: DPP does not match.");
  CHECK(r.v_i == 0);

  CHECK(w.m().verify_product("P", "nonsense").message == "Discrepancy found: DPP does not match.");
  CHECK(w.m().verify_product("Other", l.anchor_tid).v_i == 0);
}

TEST_CASE("in-place corruption of the listed DPP is a mismatch") {
  test::World w;
  test::parties(w.m());
  const auto l = w.m().add_product(test::product("P"), "S", Money::parse("10"));
  TamperHooks::corrupt_cas_object(w.m(), l.dpp_address, 40);
  CHECK(code_of([&] { w.m().retrieve_dpp(l.listing_id); }) == ErrorCode::IntegrityFailure);
  CHECK(w.m().verify_product("P", l.anchor_tid).message == kDppMismatch);
}

TEST_CASE("payment truth table: t_status == x * y * z") {
  for (int mask = 0; mask < 8; ++mask) {
    const int x = (mask >> 2) & 1, y = (mask >> 1) & 1, z = mask & 1;
    CAPTURE(mask);
    test::World w;
    test::parties(w.m());
    const auto l = w.m().add_product(test::product("P"), "S", Money::parse("10"));
    const auto order = w.m().place_order("B", l.listing_id);
    if (!x) TamperHooks::unregister_participant(w.m(), "B");
    if (!y) TamperHooks::set_listing_price(w.m(), l.listing_id, Money::parse("11"));
    const auto receipt = w.m().pay(order.order_id, z ? "OK-visa" : "FAIL-visa");
    CHECK(receipt.x == x);
    CHECK(receipt.y == y);
    CHECK(receipt.z == z);
    CHECK(receipt.t_status == x * y * z);
    const auto after = w.m().get_order(order.order_id);
    if (receipt.t_status) {
      CHECK(receipt.message == "Payment successful.");
      CHECK(after.status == OrderStatus::Fulfilled);
      CHECK(w.m().get_listing(l.listing_id).status == ListingStatus::Sold);
      CHECK(w.payments.state(receipt.transaction_id) == SimulatedPaymentProvider::State::Captured);
      CHECK(w.m().check_invariants().empty());
    } else {
      CHECK(receipt.message == "Payment failed.");
      CHECK(after.status == OrderStatus::Failed);
      CHECK(w.m().get_listing(l.listing_id).status == ListingStatus::Active);
      CHECK(w.m().ledger().history_for("P").size() == 1);
      CHECK(w.payments.settled_total().is_zero());
    }
  }
}

TEST_CASE("a sale transfers ownership on the ledger and in the passport") {
  test::World w;
  test::parties(w.m());
  const auto l = w.m().add_product(test::product("P"), "S", Money::parse("25.00"));
  const auto order = w.m().place_order("B", l.listing_id);
  const auto receipt = w.m().pay(order.order_id, "OK-1");
  REQUIRE(receipt.ownership_tid);
  const auto rec = w.m().ledger().get_record(*receipt.ownership_tid);
  CHECK(rec.kind == RecordKind::OwnershipTransferred);
  CHECK(rec.owner_id == "B");
  CHECK(rec.prev_record == l.anchor_tid);
  CHECK(rec.ipfs_ref == *receipt.new_dpp_address);
  const auto passport = dpp::parse(w.m().cas().retrieve(rec.ipfs_ref));
  CHECK(passport.version == 2);
  CHECK(passport.ownership.current_owner == "B");
  CHECK(receipt.cpd->dpp_version == 2);
  CHECK(code_of([&] { w.m().pay(order.order_id, "OK-1"); }) == ErrorCode::OrderNotPayable);
  CHECK(code_of([&] { w.m().place_order("C", l.listing_id); }) == ErrorCode::ListingNotActive);
}

TEST_CASE("orders validate buyer and listing") {
  test::World w;
  test::parties(w.m());
  const auto l = w.m().add_product(test::product("P"), "C", Money::parse("5"));
  CHECK(code_of([&] { w.m().place_order("S", l.listing_id); }) == ErrorCode::UnknownParticipant);
  CHECK(code_of([&] { w.m().place_order("C", l.listing_id); }) == ErrorCode::SelfTransfer);
  CHECK(code_of([&] { w.m().place_order("B", "L999999"); }) == ErrorCode::NotFound);
  TamperHooks::set_listing_price(w.m(), l.listing_id, Money::parse("4"));
  CHECK(code_of([&] { w.m().place_order("B", l.listing_id); }) == ErrorCode::VerificationFailed);
}

TEST_CASE("lawful updates re-anchor before the listing changes") {
  test::World w;
  test::parties(w.m());
  auto l = w.m().add_product(test::product("P"), "S", Money::parse("10"));
  l = w.m().update_price(l.listing_id, "S", Money::parse("12.34"));
  CHECK(w.m().ledger().get_record(l.anchor_tid).kind == RecordKind::ProductUpdated);
  CHECK(w.m().verify_product("P", l.anchor_tid).successful());
  const auto old_address = l.dpp_address;
  l = w.m().revise_dpp(l.listing_id, "S", Json{{"end_of_life", {{"route", "reuse"}}}});
  CHECK(l.dpp_address != old_address);
  CHECK(w.m().retrieve_dpp(l.listing_id).version == 1);
  CHECK(w.m().verify_product("P", l.anchor_tid).successful());
  CHECK(code_of([&] { w.m().update_price(l.listing_id, "C", Money::parse("1")); }) ==
        ErrorCode::ValidationError);
  CHECK(w.m().check_invariants().empty());
}

TEST_CASE("the new owner can relist and sell again") {
  test::World w;
  test::parties(w.m());
  const auto l = w.m().add_product(test::product("P"), "S", Money::parse("10"));
  w.m().pay(w.m().place_order("C", l.listing_id).order_id, "OK-1");
  CHECK(code_of([&] { w.m().relist("P", "S", Money::parse("11")); }) == ErrorCode::ValidationError);
  const auto l2 = w.m().relist("P", "C", Money::parse("15"));
  CHECK(l2.dpp_address == w.m().ledger().get_record(l2.anchor_tid).ipfs_ref);
  CHECK(code_of([&] { w.m().relist("P", "C", Money::parse("16")); }) == ErrorCode::DuplicateProduct);
  const auto r = w.m().pay(w.m().place_order("B", l2.listing_id).order_id, "OK-2");
  CHECK(r.t_status == 1);
  CHECK(dpp::parse(w.m().cas().retrieve(*r.new_dpp_address)).version == 3);
  CHECK(w.m().check_invariants().empty());
}

TEST_CASE("search filters by facets and text, newest first, paginated") {
  test::World w;
  test::parties(w.m());
  w.m().add_product(test::product("A", "steel", "beam", "Leeds"), "S", Money::parse("1"));
  w.m().add_product(test::product("B", "timber", "door", "Leeds"), "S", Money::parse("2"));
  w.m().add_product(test::product("C", "steel", "column", "Bristol"), "S", Money::parse("3"));
  w.m().add_product(test::product("D", "Steel", "beam", "York"), "S", Money::parse("4"));

  SearchQuery q;
  q.facets["material"] = "steel";
  auto page = w.m().search(q);
  REQUIRE(page.total == 3);
  CHECK(page.listings[0].product_id == "D");
  CHECK(page.listings[2].product_id == "A");

  q.facets["category"] = "BEAM";
  CHECK(w.m().search(q).total == 2);

  SearchQuery text;
  text.text = "product b";
  CHECK(w.m().search(text).total == 1);

  SearchQuery paged;
  paged.page_size = 3;
  paged.page = 2;
  page = w.m().search(paged);
  CHECK(page.total == 4);
  REQUIRE(page.listings.size() == 1);
  CHECK(page.listings[0].product_id == "A");

  paged.page = 0;
  CHECK(code_of([&] { w.m().search(paged); }) == ErrorCode::InvalidPagination);
  paged.page = 1;
  paged.page_size = 101;
  CHECK(code_of([&] { w.m().search(paged); }) == ErrorCode::InvalidPagination);

  const auto sold = w.m().search({}).listings.front();
  w.m().pay(w.m().place_order("B", sold.listing_id).order_id, "OK-x");
  CHECK(w.m().search({}).total == 3);
}

TEST_CASE("state survives restart and ids keep increasing") {
  test::World w;
  test::parties(w.m());
  const auto l = w.m().add_product(test::product("P"), "S", Money::parse("10"));
  const auto o = w.m().place_order("B", l.listing_id);
  w.reopen();
  CHECK(w.m().get_listing(l.listing_id).dpp_address == l.dpp_address);
  CHECK(w.m().get_order(o.order_id).status == OrderStatus::Placed);
  CHECK(w.m().is_seller("S"));
  const auto l2 = w.m().add_product(test::product("Q"), "S", Money::parse("10"));
  CHECK(l2.listing_id == "L000002");
  CHECK(w.m().check_invariants().empty());
}

TEST_CASE("ledger outages are retried, then reported") {
  test::World w;
  test::parties(w.m());
  w.m().faults().arm(FaultPoint::AddLedgerAppend, FaultMode::Fail, 2);
  const auto l = w.m().add_product(test::product("P"), "S", Money::parse("10"));
  CHECK(w.m().ledger().has_product("P"));

  w.m().faults().arm(FaultPoint::AddLedgerAppend, FaultMode::Fail, 3);
  CHECK(code_of([&] { w.m().add_product(test::product("Q"), "S", Money::parse("10")); }) ==
        ErrorCode::LedgerUnavailable);
  CHECK_FALSE(w.m().ledger().has_product("Q"));
  CHECK(w.m().open_intents() == 0);
  CHECK(w.m().listings().size() == 1);
  CHECK(w.m().check_invariants().empty());
  (void)l;
}

TEST_CASE("concurrent adds: distinct products interleave, duplicates lose") {
  test::World w;
  test::parties(w.m());
  std::atomic<int> ok{0}, dup{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 10; ++i) {
        try {
          w.m().add_product(test::product("P" + std::to_string(t) + "-" + std::to_string(i)), "S",
                            Money::parse("10"));
          w.m().add_product(test::product("SHARED-" + std::to_string(i)), "S", Money::parse("10"));
          ++ok;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::DuplicateProduct) ++dup;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(w.m().ledger().count(RecordKind::ProductAdded) == 80 + 10);
  CHECK(ok == 10);
  CHECK(dup == 70);
  CHECK(w.m().listings().size() == 90);
  CHECK(w.m().check_invariants().empty());
}

TEST_CASE("every anchored address resolves to a version of its product's DPP") {
  test::World w(3);
  test::parties(w.m());
  for (int i = 0; i < 5; ++i) {
    auto l = w.m().add_product(test::product("P" + std::to_string(i)), "S", Money::parse("10"));
    if (i % 2) l = w.m().update_price(l.listing_id, "S", Money::parse("11"));
    if (i % 3 == 0) w.m().pay(w.m().place_order("B", l.listing_id).order_id, "OK");
  }
  for (const auto& [tid, rec] : w.m().ledger().all_records()) {
    const auto d = dpp::parse(w.m().cas().retrieve(rec.ipfs_ref));
    CHECK(d.product_id == rec.product_id);
    CHECK(d.version == rec.cpd.dpp_version);
  }
  CHECK(w.m().check_invariants().empty());
}
