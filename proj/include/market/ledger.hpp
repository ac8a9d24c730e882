#pragma once

// Single-node hash-chained ledger.
//
// The chain file is an append-only sequence of frames
//   [u32 big-endian length][canonical JSON block]
// where each block is {"block_hash","height","prev_hash","records"} and
// block_hash = SHA-256(canonical {"height","prev_hash","records"}).
// Block 0 is a fixed genesis block with an all-zero prev_hash.
//
// With batch_size > 1 records accumulate in a pending block that is
// journaled line-by-line to pending.log and sealed once it is full (or on
// flush()), so every append is durable before record() returns.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "market/canonical_json.hpp"
#include "market/cas.hpp"
#include "market/hash.hpp"
#include "market/money.hpp"

namespace market {

enum class RecordKind { ProductAdded, ProductUpdated, OwnershipTransferred };

std::string_view to_string(RecordKind kind) noexcept;
RecordKind record_kind_from_string(std::string_view s);

struct CriticalProductDetails {
  std::string product_id;
  std::string category;
  Money listed_price;
  int dpp_version = 1;
  std::string summary;

  bool operator==(const CriticalProductDetails&) const = default;
};

canonical::Json to_json(const CriticalProductDetails& cpd);
CriticalProductDetails cpd_from_json(const canonical::Json& j);

/// "height:index" handle for one ledger record.
struct TransactionId {
  std::uint64_t height = 0;
  std::uint32_t index = 0;

  std::string str() const;
  /// Throws ValidationError on anything but "<digits>:<digits>".
  static TransactionId parse(std::string_view text);

  friend constexpr auto operator<=>(const TransactionId&, const TransactionId&) = default;
};

struct LedgerRecord {
  RecordKind kind = RecordKind::ProductAdded;
  std::string product_id;
  ContentAddress ipfs_ref;
  CriticalProductDetails cpd;
  Money price;
  std::string owner_id;
  std::optional<TransactionId> prev_record;

  bool operator==(const LedgerRecord&) const = default;
};

canonical::Json to_json(const LedgerRecord& record);
LedgerRecord record_from_json(const canonical::Json& j);

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash{};
  std::vector<LedgerRecord> records;
  Digest block_hash{};

  Digest compute_hash() const;
  /// Full stored form including block_hash.
  std::string canonical_bytes() const;
};

struct ChainReport {
  bool valid = true;
  std::optional<std::uint64_t> corrupt_height;
  std::string reason;
  std::uint64_t blocks_checked = 0;
};

struct LedgerConfig {
  std::filesystem::path dir;
  std::size_t batch_size = 1;
  bool fsync = true;
};

class Ledger {
 public:
  /// Opens or creates the chain under config.dir. A torn trailing frame
  /// (crash mid-append) is truncated; any other unreadable frame makes
  /// the constructor throw IntegrityFailure.
  explicit Ledger(LedgerConfig config);
  ~Ledger();

  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  /// Validates and appends. prev_record is filled in by the ledger; a caller
  /// supplied value must equal the product's current latest record.
  TransactionId record(LedgerRecord record);

  LedgerRecord get_record(const TransactionId& tid) const;
  LedgerRecord latest_record_for(std::string_view product_id) const;
  std::optional<TransactionId> latest_tid_for(std::string_view product_id) const;
  /// Transaction ids for the product in append order.
  std::vector<TransactionId> history_for(std::string_view product_id) const;
  bool has_product(std::string_view product_id) const;

  /// The id the next successful record() would be assigned.
  TransactionId next_tid() const;

  /// Re-reads the persisted chain and checks framing, canonical form,
  /// heights, hash links and record-level invariants.
  ChainReport verify_chain() const;
  static ChainReport verify_file(const std::filesystem::path& chain_file);

  /// Seals a partially filled pending block.
  void flush();

  std::size_t block_count() const;
  std::size_t record_count() const;
  std::size_t count(RecordKind kind) const;
  std::vector<std::pair<TransactionId, LedgerRecord>> all_records() const;

  std::filesystem::path chain_path() const { return config_.dir / "chain.bin"; }
  std::filesystem::path pending_path() const { return config_.dir / "pending.log"; }

 private:
  void load();
  void append_block_locked(Block block);
  void seal_pending_locked();
  const LedgerRecord* find_locked(const TransactionId& tid) const;
  const std::vector<TransactionId>* history_locked(std::string_view pid) const;

  LedgerConfig config_;
  mutable std::shared_mutex mutex_;
  std::vector<Block> blocks_;
  std::vector<LedgerRecord> pending_;
  std::map<std::string, std::vector<TransactionId>, std::less<>> by_product_;
};

}  // namespace market
