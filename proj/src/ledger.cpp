#include "market/ledger.hpp"

#include <charconv>
#include <mutex>
#include <set>

#include "fileio.hpp"
#include "market/error.hpp"

namespace fs = std::filesystem;
using market::canonical::Json;

namespace market {

std::string_view to_string(RecordKind kind) noexcept {
  switch (kind) {
    case RecordKind::ProductAdded: return "ProductAdded";
    case RecordKind::ProductUpdated: return "ProductUpdated";
    case RecordKind::OwnershipTransferred: return "OwnershipTransferred";
  }
  return "?";
}

RecordKind record_kind_from_string(std::string_view s) {
  if (s == "ProductAdded") return RecordKind::ProductAdded;
  if (s == "ProductUpdated") return RecordKind::ProductUpdated;
  if (s == "OwnershipTransferred") return RecordKind::OwnershipTransferred;
  throw Error(ErrorCode::ValidationError, "unknown record kind '" + std::string(s) + "'");
}

Json to_json(const CriticalProductDetails& cpd) {
  return Json{{"product_id", cpd.product_id},
              {"category", cpd.category},
              {"listed_price", cpd.listed_price.str()},
              {"dpp_version", cpd.dpp_version},
              {"summary", cpd.summary}};
}

CriticalProductDetails cpd_from_json(const Json& j) {
  try {
    CriticalProductDetails cpd;
    cpd.product_id = j.at("product_id").get<std::string>();
    cpd.category = j.at("category").get<std::string>();
    cpd.listed_price = Money::parse(j.at("listed_price").get<std::string>());
    cpd.dpp_version = j.at("dpp_version").get<int>();
    cpd.summary = j.at("summary").get<std::string>();
    return cpd;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("bad CPD: ") + e.what());
  }
}

std::string TransactionId::str() const {
  return std::to_string(height) + ":" + std::to_string(index);
}

TransactionId TransactionId::parse(std::string_view text) {
  const auto colon = text.find(':');
  auto fail = [&]() -> TransactionId {
    throw Error(ErrorCode::ValidationError,
                "bad transaction id '" + std::string(text) + "'");
  };
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    return fail();
  }
  TransactionId tid;
  const char* end = text.data() + text.size();
  auto r1 = std::from_chars(text.data(), text.data() + colon, tid.height);
  auto r2 = std::from_chars(text.data() + colon + 1, end, tid.index);
  if (r1.ec != std::errc{} || r1.ptr != text.data() + colon ||
      r2.ec != std::errc{} || r2.ptr != end) {
    return fail();
  }
  return tid;
}

Json to_json(const LedgerRecord& r) {
  return Json{{"kind", std::string(to_string(r.kind))},
              {"product_id", r.product_id},
              {"ipfs_ref", r.ipfs_ref.hex()},
              {"cpd", to_json(r.cpd)},
              {"price", r.price.str()},
              {"owner_id", r.owner_id},
              {"prev_record", r.prev_record ? Json(r.prev_record->str()) : Json(nullptr)}};
}

LedgerRecord record_from_json(const Json& j) {
  try {
    LedgerRecord r;
    r.kind = record_kind_from_string(j.at("kind").get<std::string>());
    r.product_id = j.at("product_id").get<std::string>();
    r.ipfs_ref = ContentAddress::parse(j.at("ipfs_ref").get<std::string>());
    r.cpd = cpd_from_json(j.at("cpd"));
    r.price = Money::parse(j.at("price").get<std::string>());
    r.owner_id = j.at("owner_id").get<std::string>();
    const auto& prev = j.at("prev_record");
    if (!prev.is_null()) r.prev_record = TransactionId::parse(prev.get<std::string>());
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("bad ledger record: ") + e.what());
  }
}

namespace {

Json records_json(const std::vector<LedgerRecord>& records) {
  Json arr = Json::array();
  for (const auto& r : records) arr.push_back(to_json(r));
  return arr;
}

Json hashed_part(const Block& b) {
  return Json{{"height", b.height},
              {"prev_hash", to_hex(b.prev_hash)},
              {"records", records_json(b.records)}};
}

Block block_from_json(const Json& j) {
  Block b;
  try {
    b.height = j.at("height").get<std::uint64_t>();
    if (!from_hex(j.at("prev_hash").get<std::string>(), b.prev_hash) ||
        !from_hex(j.at("block_hash").get<std::string>(), b.block_hash)) {
      throw Error(ErrorCode::ValidationError, "bad hash field");
    }
    for (const auto& r : j.at("records")) b.records.push_back(record_from_json(r));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("bad block: ") + e.what());
  }
  return b;
}

Block genesis_block() {
  Block g;
  g.block_hash = g.compute_hash();
  return g;
}

std::string frame(std::string_view payload) {
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(payload.size() + 4);
  out.push_back(static_cast<char>(n >> 24));
  out.push_back(static_cast<char>(n >> 16));
  out.push_back(static_cast<char>(n >> 8));
  out.push_back(static_cast<char>(n));
  out.append(payload);
  return out;
}

std::uint32_t read_u32(std::string_view s) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) << 24 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[3]));
}

// Splits raw chain bytes into frames. Stops at the first frame whose header
// or payload runs past the end and reports its offset in `tail_offset`.
std::vector<std::string_view> split_frames(std::string_view bytes,
                                           std::optional<std::size_t>& tail_offset) {
  std::vector<std::string_view> frames;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 4) {
      tail_offset = pos;
      break;
    }
    const auto len = read_u32(bytes.substr(pos, 4));
    if (len > bytes.size() - pos - 4) {
      tail_offset = pos;
      break;
    }
    frames.push_back(bytes.substr(pos + 4, len));
    pos += 4 + len;
  }
  return frames;
}

// Tracks record-level invariants while replaying the chain in order.
class RecordReplay {
 public:
  // Returns an empty string on success, else the violated invariant.
  std::string apply(const LedgerRecord& r, const TransactionId& tid) {
    if (r.cpd.product_id != r.product_id) return "CPD product_id mismatch";
    auto it = latest_.find(r.product_id);
    if (r.kind == RecordKind::ProductAdded) {
      if (it != latest_.end()) return "duplicate ProductAdded for " + r.product_id;
      if (r.prev_record) return "ProductAdded with prev_record";
    } else {
      if (it == latest_.end()) return "record for unknown product " + r.product_id;
      if (r.prev_record != it->second) return "broken prev_record link for " + r.product_id;
    }
    latest_[r.product_id] = tid;
    return {};
  }

 private:
  std::map<std::string, TransactionId> latest_;
};

}  // namespace

Digest Block::compute_hash() const { return sha256(canonical::dump(hashed_part(*this))); }

std::string Block::canonical_bytes() const {
  Json j = hashed_part(*this);
  j["block_hash"] = to_hex(block_hash);
  return canonical::dump(j);
}

Ledger::Ledger(LedgerConfig config) : config_(std::move(config)) {
  if (config_.batch_size == 0) {
    throw Error(ErrorCode::ConfigError, "ledger batch size must be positive");
  }
  std::error_code ec;
  fs::create_directories(config_.dir, ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "cannot create ledger directory '" + config_.dir.string() + "'");
  }
  load();
}

Ledger::~Ledger() {
  try {
    flush();
  } catch (...) {
  }
}

void Ledger::load() {
  const auto chain = chain_path();
  if (!fs::exists(chain) || fs::file_size(chain) == 0) {
    const auto g = genesis_block();
    detail::append_file(chain, frame(g.canonical_bytes()), config_.fsync);
    blocks_.push_back(g);
  } else {
    const auto bytes = detail::read_file(chain);
    std::optional<std::size_t> tail;
    const auto frames = split_frames(bytes, tail);
    for (std::size_t k = 0; k < frames.size(); ++k) {
      try {
        blocks_.push_back(block_from_json(canonical::parse(frames[k])));
      } catch (const Error& e) {
        throw Error(ErrorCode::IntegrityFailure,
                    "ledger block " + std::to_string(k) + " unreadable: " + e.what());
      }
    }
    if (tail) {
      // A crash mid-append leaves a strict prefix of a frame. If the tail
      // nevertheless holds a complete block, the length header was altered.
      const auto rest = std::string_view(bytes).substr(*tail + std::min<std::size_t>(4, bytes.size() - *tail));
      bool complete = false;
      try {
        block_from_json(canonical::parse(rest));
        complete = true;
      } catch (const Error&) {
      }
      if (complete) {
        throw Error(ErrorCode::IntegrityFailure,
                    "ledger frame at offset " + std::to_string(*tail) + " has a corrupt length");
      }
      detail::truncate_file(chain, *tail);
    }
    if (blocks_.empty()) {
      const auto g = genesis_block();
      detail::append_file(chain, frame(g.canonical_bytes()), config_.fsync);
      blocks_.push_back(g);
    }
  }

  const auto pending = pending_path();
  if (fs::exists(pending)) {
    const auto text = detail::read_file(pending);
    std::size_t pos = 0;
    std::size_t good_end = 0;
    while (true) {
      const auto nl = text.find('\n', pos);
      if (nl == std::string::npos) break;
      const auto line = std::string_view(text).substr(pos, nl - pos);
      const auto j = canonical::parse(line);
      if (j.at("height").get<std::uint64_t>() == blocks_.size()) {
        pending_.push_back(record_from_json(j.at("record")));
      }
      pos = nl + 1;
      good_end = pos;
    }
    if (good_end != text.size()) detail::truncate_file(pending, good_end);
  }

  for (const auto& b : blocks_) {
    for (std::uint32_t i = 0; i < b.records.size(); ++i) {
      by_product_[b.records[i].product_id].push_back({b.height, i});
    }
  }
  for (std::uint32_t i = 0; i < pending_.size(); ++i) {
    by_product_[pending_[i].product_id].push_back({blocks_.size(), i});
  }
  if (pending_.size() >= config_.batch_size) seal_pending_locked();
}

TransactionId Ledger::record(LedgerRecord r) {
  std::unique_lock lock(mutex_);
  if (r.product_id.empty()) throw Error(ErrorCode::ValidationError, "empty product id");
  if (r.owner_id.empty()) throw Error(ErrorCode::ValidationError, "empty owner id");
  if (r.ipfs_ref.empty()) throw Error(ErrorCode::ValidationError, "empty DPP address");
  if (r.cpd.product_id != r.product_id) {
    throw Error(ErrorCode::ValidationError, "CPD product_id does not match record");
  }
  if (r.cpd.dpp_version < 1) throw Error(ErrorCode::ValidationError, "dpp_version must be >= 1");

  const auto* history = history_locked(r.product_id);
  if (r.kind == RecordKind::ProductAdded) {
    if (history) {
      throw Error(ErrorCode::DuplicateProduct,
                  "product '" + r.product_id + "' is already on the ledger");
    }
    if (r.prev_record) {
      throw Error(ErrorCode::ValidationError, "ProductAdded cannot link a previous record");
    }
  } else {
    if (!history) {
      throw Error(ErrorCode::UnknownProduct,
                  "product '" + r.product_id + "' is not on the ledger");
    }
    if (r.prev_record && *r.prev_record != history->back()) {
      throw Error(ErrorCode::ValidationError,
                  "stale prev_record " + r.prev_record->str() + " for '" + r.product_id + "'");
    }
    r.prev_record = history->back();
  }

  const TransactionId tid{blocks_.size(), static_cast<std::uint32_t>(pending_.size())};
  if (config_.batch_size == 1) {
    Block b;
    b.height = blocks_.size();
    b.prev_hash = blocks_.back().block_hash;
    b.records.push_back(r);
    b.block_hash = b.compute_hash();
    append_block_locked(std::move(b));
  } else {
    const Json line{{"height", tid.height}, {"record", to_json(r)}};
    detail::append_file(pending_path(), canonical::dump(line) + "\n", config_.fsync);
    pending_.push_back(r);
  }
  by_product_[r.product_id].push_back(tid);
  if (pending_.size() >= config_.batch_size) seal_pending_locked();
  return tid;
}

void Ledger::append_block_locked(Block block) {
  detail::append_file(chain_path(), frame(block.canonical_bytes()), config_.fsync);
  blocks_.push_back(std::move(block));
}

void Ledger::seal_pending_locked() {
  if (pending_.empty()) return;
  Block b;
  b.height = blocks_.size();
  b.prev_hash = blocks_.back().block_hash;
  b.records = std::move(pending_);
  pending_.clear();
  b.block_hash = b.compute_hash();
  append_block_locked(std::move(b));
  // Lines tagged with the sealed height are ignored on reload, so a crash
  // before this truncation is harmless.
  detail::truncate_file(pending_path(), 0);
}

void Ledger::flush() {
  std::unique_lock lock(mutex_);
  seal_pending_locked();
}

const LedgerRecord* Ledger::find_locked(const TransactionId& tid) const {
  if (tid.height < blocks_.size()) {
    const auto& recs = blocks_[tid.height].records;
    return tid.index < recs.size() ? &recs[tid.index] : nullptr;
  }
  if (tid.height == blocks_.size() && tid.index < pending_.size()) {
    return &pending_[tid.index];
  }
  return nullptr;
}

const std::vector<TransactionId>* Ledger::history_locked(std::string_view pid) const {
  auto it = by_product_.find(pid);
  return it == by_product_.end() ? nullptr : &it->second;
}

LedgerRecord Ledger::get_record(const TransactionId& tid) const {
  std::shared_lock lock(mutex_);
  if (const auto* r = find_locked(tid)) return *r;
  throw Error(ErrorCode::NotFound, "no ledger record at " + tid.str());
}

LedgerRecord Ledger::latest_record_for(std::string_view product_id) const {
  std::shared_lock lock(mutex_);
  const auto* h = history_locked(product_id);
  if (!h) {
    throw Error(ErrorCode::UnknownProduct,
                "product '" + std::string(product_id) + "' is not on the ledger");
  }
  return *find_locked(h->back());
}

std::optional<TransactionId> Ledger::latest_tid_for(std::string_view product_id) const {
  std::shared_lock lock(mutex_);
  const auto* h = history_locked(product_id);
  if (!h) return std::nullopt;
  return h->back();
}

std::vector<TransactionId> Ledger::history_for(std::string_view product_id) const {
  std::shared_lock lock(mutex_);
  const auto* h = history_locked(product_id);
  return h ? *h : std::vector<TransactionId>{};
}

bool Ledger::has_product(std::string_view product_id) const {
  std::shared_lock lock(mutex_);
  return history_locked(product_id) != nullptr;
}

TransactionId Ledger::next_tid() const {
  std::shared_lock lock(mutex_);
  return {blocks_.size(), static_cast<std::uint32_t>(pending_.size())};
}

std::size_t Ledger::block_count() const {
  std::shared_lock lock(mutex_);
  return blocks_.size();
}

std::size_t Ledger::record_count() const {
  std::shared_lock lock(mutex_);
  std::size_t n = pending_.size();
  for (const auto& b : blocks_) n += b.records.size();
  return n;
}

std::size_t Ledger::count(RecordKind kind) const {
  std::size_t n = 0;
  for (const auto& [tid, r] : all_records()) n += r.kind == kind;
  return n;
}

std::vector<std::pair<TransactionId, LedgerRecord>> Ledger::all_records() const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<TransactionId, LedgerRecord>> out;
  for (const auto& b : blocks_) {
    for (std::uint32_t i = 0; i < b.records.size(); ++i) {
      out.emplace_back(TransactionId{b.height, i}, b.records[i]);
    }
  }
  for (std::uint32_t i = 0; i < pending_.size(); ++i) {
    out.emplace_back(TransactionId{blocks_.size(), i}, pending_[i]);
  }
  return out;
}

ChainReport Ledger::verify_chain() const {
  std::shared_lock lock(mutex_);
  auto report = verify_file(chain_path());
  if (report.valid && report.blocks_checked < blocks_.size()) {
    report.valid = false;
    report.corrupt_height = report.blocks_checked;
    report.reason = "block missing from persisted chain";
  }
  return report;
}

ChainReport Ledger::verify_file(const fs::path& chain_file) {
  ChainReport report;
  auto corrupt = [&](std::uint64_t height, std::string reason) {
    report.valid = false;
    report.corrupt_height = height;
    report.reason = std::move(reason);
    return report;
  };

  std::string bytes;
  try {
    bytes = detail::read_file(chain_file);
  } catch (const Error& e) {
    return corrupt(0, e.what());
  }
  std::optional<std::size_t> tail;
  const auto frames = split_frames(bytes, tail);
  if (frames.empty()) return corrupt(0, "no genesis block");

  const auto genesis = genesis_block().canonical_bytes();
  Digest prev{};
  RecordReplay replay;
  for (std::uint64_t k = 0; k < frames.size(); ++k) {
    Block b;
    try {
      const auto j = canonical::parse(frames[k]);
      if (canonical::dump(j) != frames[k]) return corrupt(k, "block is not in canonical form");
      b = block_from_json(j);
    } catch (const Error& e) {
      return corrupt(k, std::string("unparseable block: ") + e.what());
    }
    if (k == 0 && frames[k] != genesis) return corrupt(0, "genesis block altered");
    if (b.height != k) return corrupt(k, "height field does not match position");
    if (b.prev_hash != prev) return corrupt(k, "prev_hash does not link to previous block");
    if (b.compute_hash() != b.block_hash) return corrupt(k, "block_hash does not match contents");
    for (std::uint32_t i = 0; i < b.records.size(); ++i) {
      auto violation = replay.apply(b.records[i], {k, i});
      if (!violation.empty()) return corrupt(k, violation);
    }
    prev = b.block_hash;
    report.blocks_checked = k + 1;
  }
  if (tail) return corrupt(frames.size(), "truncated or mis-sized trailing frame");
  return report;
}

}  // namespace market
