#include <fstream>
#include <random>

#include "fileio.hpp"
#include "market/error.hpp"
#include "market/ledger.hpp"
#include "support.hpp"

using market::ContentAddress;
using market::ErrorCode;
using market::Ledger;
using market::LedgerConfig;
using market::LedgerRecord;
using market::Money;
using market::RecordKind;
using market::TransactionId;

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

LedgerRecord rec(RecordKind kind, const std::string& pid, const std::string& owner = "S",
                 const std::string& price = "10.00", int version = 1) {
  const auto p = Money::parse(price);
  return {kind, pid, ContentAddress::of(pid + owner + price + std::to_string(version)),
          {pid, "beam", p, version, "summary of " + pid}, p, owner, std::nullopt};
}

LedgerConfig cfg(const std::filesystem::path& dir, std::size_t batch = 1) { return {dir, batch, false}; }

// Byte offsets of each frame payload in chain.bin.
std::vector<std::pair<std::size_t, std::size_t>> frames(const std::filesystem::path& chain) {
  const auto bytes = market::detail::read_file(chain);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t pos = 0;
  while (pos + 4 <= bytes.size()) {
    const std::size_t len = (std::size_t(std::uint8_t(bytes[pos])) << 24) |
                            (std::size_t(std::uint8_t(bytes[pos + 1])) << 16) |
                            (std::size_t(std::uint8_t(bytes[pos + 2])) << 8) |
                            std::size_t(std::uint8_t(bytes[pos + 3]));
    out.emplace_back(pos + 4, len);
    pos += 4 + len;
  }
  return out;
}

void flip(const std::filesystem::path& path, std::size_t offset, char mask) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.get(c);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(static_cast<char>(c ^ mask));
}

}  // namespace

TEST_CASE("genesis-only chain is valid") {
  test::TempDir dir;
  Ledger ledger(cfg(dir.path()));
  CHECK(ledger.block_count() == 1);
  CHECK(ledger.record_count() == 0);
  const auto r = ledger.verify_chain();
  CHECK(r.valid);
  CHECK(r.blocks_checked == 1);
  CHECK(ledger.next_tid() == TransactionId{1, 0});
}

TEST_CASE("record enforces product identity rules") {
  test::TempDir dir;
  Ledger ledger(cfg(dir.path()));
  const auto t1 = ledger.record(rec(RecordKind::ProductAdded, "P1"));
  CHECK(t1.str() == "1:0");
  CHECK(code_of([&] { ledger.record(rec(RecordKind::ProductAdded, "P1")); }) == ErrorCode::DuplicateProduct);
  const auto t2 = ledger.record(rec(RecordKind::ProductUpdated, "P1", "S", "12.00"));
  CHECK(ledger.get_record(t1).price == Money::parse("10.00"));
  CHECK(ledger.get_record(t2).prev_record == t1);
  CHECK(code_of([&] { ledger.record(rec(RecordKind::OwnershipTransferred, "P-unknown")); }) ==
        ErrorCode::UnknownProduct);

  auto mismatched = rec(RecordKind::ProductUpdated, "P1");
  mismatched.cpd.product_id = "P2";
  CHECK(code_of([&] { ledger.record(mismatched); }) == ErrorCode::ValidationError);
  auto stale = rec(RecordKind::ProductUpdated, "P1");
  stale.prev_record = t1;
  CHECK(code_of([&] { ledger.record(stale); }) == ErrorCode::ValidationError);
}

TEST_CASE("get_record returns exact records and survives restart") {
  test::TempDir dir;
  std::vector<std::pair<TransactionId, LedgerRecord>> written;
  {
    Ledger ledger(cfg(dir.path()));
    for (int i = 0; i < 5; ++i) {
      auto r = rec(RecordKind::ProductAdded, "P" + std::to_string(i));
      const auto tid = ledger.record(r);
      written.emplace_back(tid, ledger.get_record(tid));
      CHECK(written.back().second.cpd == r.cpd);
    }
    CHECK(code_of([&] { ledger.get_record(TransactionId::parse("999:0")); }) == ErrorCode::NotFound);
  }
  Ledger reopened(cfg(dir.path()));
  for (const auto& [tid, r] : written) CHECK(reopened.get_record(tid) == r);
  CHECK(reopened.verify_chain().valid);
}

TEST_CASE("latest_record_for tracks each product independently") {
  test::TempDir dir;
  Ledger ledger(cfg(dir.path(), 3));
  std::mt19937 rng(5);
  std::map<std::string, LedgerRecord> oracle;
  std::vector<std::string> pids = {"A", "B", "C"};
  for (int i = 0; i < 60; ++i) {
    const auto& pid = pids[rng() % pids.size()];
    const auto price = std::to_string(1 + rng() % 90) + ".00";
    const auto kind = oracle.count(pid) ? (rng() % 2 ? RecordKind::ProductUpdated : RecordKind::OwnershipTransferred)
                                        : RecordKind::ProductAdded;
    auto r = rec(kind, pid, "O" + std::to_string(i), price, i + 1);
    ledger.record(r);
    oracle[pid] = r;
  }
  // Brute-force replay of everything appended.
  std::map<std::string, LedgerRecord> replayed;
  for (const auto& [tid, r] : ledger.all_records()) replayed[r.product_id] = r;
  for (const auto& [pid, r] : oracle) {
    CHECK(ledger.latest_record_for(pid).owner_id == r.owner_id);
    CHECK(replayed.at(pid).owner_id == r.owner_id);
    CHECK(ledger.latest_record_for(pid).product_id == pid);
  }
  CHECK(code_of([&] { ledger.latest_record_for("Z"); }) == ErrorCode::UnknownProduct);
}

TEST_CASE("prev_record pointers form one chain per product") {
  test::TempDir dir;
  Ledger ledger(cfg(dir.path()));
  ledger.record(rec(RecordKind::ProductAdded, "A"));
  ledger.record(rec(RecordKind::ProductAdded, "B"));
  ledger.record(rec(RecordKind::ProductUpdated, "A", "S", "11.00"));
  ledger.record(rec(RecordKind::OwnershipTransferred, "A", "B", "11.00", 2));
  ledger.record(rec(RecordKind::ProductUpdated, "B", "S", "9.00"));
  for (const char* pid : {"A", "B"}) {
    auto tid = ledger.latest_tid_for(pid);
    std::size_t steps = 0;
    RecordKind last = RecordKind::ProductUpdated;
    while (tid) {
      const auto r = ledger.get_record(*tid);
      CHECK(r.product_id == pid);
      last = r.kind;
      tid = r.prev_record;
      ++steps;
    }
    CHECK(last == RecordKind::ProductAdded);
    CHECK(steps == ledger.history_for(pid).size());
  }
}

TEST_CASE("batched appends seal blocks and survive restart") {
  test::TempDir dir;
  {
    Ledger ledger(cfg(dir.path(), 4));
    for (int i = 0; i < 6; ++i) ledger.record(rec(RecordKind::ProductAdded, "P" + std::to_string(i)));
    CHECK(ledger.block_count() == 2);  // genesis + one sealed block of 4
    CHECK(ledger.get_record(TransactionId{2, 1}).product_id == "P5");
  }
  Ledger reopened(cfg(dir.path(), 4));
  CHECK(reopened.record_count() == 6);
  CHECK(reopened.get_record(TransactionId{2, 1}).product_id == "P5");
  reopened.flush();
  CHECK(reopened.block_count() == 3);
  CHECK(reopened.verify_chain().valid);
}

TEST_CASE("flipping a byte in block 3's records reports height 3") {
  test::TempDir dir;
  Ledger ledger(cfg(dir.path()));
  for (int i = 0; i < 5; ++i) ledger.record(rec(RecordKind::ProductAdded, "P" + std::to_string(i)));
  const auto f = frames(ledger.chain_path());
  REQUIRE(f.size() == 6);
  const auto payload = market::detail::read_file(ledger.chain_path()).substr(f[3].first, f[3].second);
  const auto at = payload.find("\"owner_id\":\"S\"");
  REQUIRE(at != std::string::npos);
  flip(ledger.chain_path(), f[3].first + at + 12, 0x01);  // 'S' -> 'R'

  const auto r = ledger.verify_chain();
  CHECK_FALSE(r.valid);
  REQUIRE(r.corrupt_height.has_value());
  CHECK(*r.corrupt_height == 3);
  CHECK(Ledger::verify_file(ledger.chain_path()).corrupt_height == std::optional<std::uint64_t>(3));
}

TEST_CASE("torn tail from a crash mid-append is truncated on open") {
  test::TempDir dir;
  std::filesystem::path chain;
  {
    Ledger ledger(cfg(dir.path()));
    ledger.record(rec(RecordKind::ProductAdded, "P0"));
    chain = ledger.chain_path();
  }
  const auto good = std::filesystem::file_size(chain);
  market::detail::append_file(chain, std::string("\x00\x00\x01\x00{\"height\":2", 15), false);
  Ledger reopened(cfg(dir.path()));
  CHECK(std::filesystem::file_size(chain) == good);
  CHECK(reopened.verify_chain().valid);
  CHECK(reopened.record(rec(RecordKind::ProductAdded, "P1")).str() == "2:0");
}

TEST_CASE("100 random single-byte mutations of the chain file are all detected") {
  test::TempDir dir;
  std::filesystem::path chain;
  {
    Ledger ledger(cfg(dir.path()));
    for (int i = 0; i < 12; ++i) ledger.record(rec(RecordKind::ProductAdded, "P" + std::to_string(i)));
    chain = ledger.chain_path();
  }
  const auto original = market::detail::read_file(chain);
  std::mt19937_64 rng(99);
  int detected = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::filesystem::remove(chain);
    market::detail::write_new_file(chain, original, false);
    flip(chain, rng() % original.size(), static_cast<char>(1 + rng() % 255));
    if (!Ledger::verify_file(chain).valid) ++detected;
  }
  CHECK(detected == 100);
}
