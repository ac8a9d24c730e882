#include "market/marketplace.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <set>

#include "market/error.hpp"

using market::canonical::Json;

namespace market {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Json optional_str(const std::optional<std::string>& s) {
  return s ? Json(*s) : Json(nullptr);
}

ListingStatus listing_status_from(std::string_view s) {
  if (s == "Active") return ListingStatus::Active;
  if (s == "Sold") return ListingStatus::Sold;
  if (s == "Withdrawn") return ListingStatus::Withdrawn;
  throw Error(ErrorCode::ValidationError, "unknown listing status '" + std::string(s) + "'");
}

OrderStatus order_status_from(std::string_view s) {
  if (s == "Placed") return OrderStatus::Placed;
  if (s == "Paid") return OrderStatus::Paid;
  if (s == "Failed") return OrderStatus::Failed;
  if (s == "Fulfilled") return OrderStatus::Fulfilled;
  throw Error(ErrorCode::ValidationError, "unknown order status '" + std::string(s) + "'");
}

unsigned long id_sequence(std::string_view id) {
  unsigned long n = 0;
  for (std::size_t i = 1; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return 0;
    n = n * 10 + static_cast<unsigned long>(id[i] - '0');
  }
  return n;
}

}  // namespace

std::string_view to_string(ListingStatus s) noexcept {
  switch (s) {
    case ListingStatus::Active: return "Active";
    case ListingStatus::Sold: return "Sold";
    case ListingStatus::Withdrawn: return "Withdrawn";
  }
  return "?";
}

std::string_view to_string(OrderStatus s) noexcept {
  switch (s) {
    case OrderStatus::Placed: return "Placed";
    case OrderStatus::Paid: return "Paid";
    case OrderStatus::Failed: return "Failed";
    case OrderStatus::Fulfilled: return "Fulfilled";
  }
  return "?";
}

std::string_view to_string(FaultPoint p) noexcept {
  switch (p) {
    case FaultPoint::AddAfterDppCreate: return "add.after_dpp_create";
    case FaultPoint::AddAfterCasStore: return "add.after_cas_store";
    case FaultPoint::AddAfterIntent: return "add.after_intent";
    case FaultPoint::AddLedgerAppend: return "add.ledger_append";
    case FaultPoint::AddAfterLedgerRecord: return "add.after_ledger_record";
    case FaultPoint::AddAfterCommit: return "add.after_commit";
    case FaultPoint::UpdateLedgerAppend: return "update.ledger_append";
    case FaultPoint::UpdateAfterLedgerRecord: return "update.after_ledger_record";
    case FaultPoint::PayAfterIntent: return "pay.after_intent";
    case FaultPoint::PayAfterCapture: return "pay.after_capture";
    case FaultPoint::PayAfterDppUpdate: return "pay.after_dpp_update";
    case FaultPoint::PayAfterCasStore: return "pay.after_cas_store";
    case FaultPoint::PayLedgerAppend: return "pay.ledger_append";
    case FaultPoint::PayAfterLedgerRecord: return "pay.after_ledger_record";
    case FaultPoint::PayAfterCommit: return "pay.after_commit";
  }
  return "?";
}

// --- JSON forms ------------------------------------------------------------

Json to_json(const Listing& l) {
  return Json{{"listing_id", l.listing_id},
              {"product_id", l.product_id},
              {"seller_id", l.seller_id},
              {"price", l.price.str()},
              {"dpp_address", l.dpp_address.hex()},
              {"anchor_tid", l.anchor_tid.str()},
              {"cpd", to_json(l.cpd)},
              {"status", std::string(to_string(l.status))},
              {"listed_at", l.listed_at.rfc3339()},
              {"name", l.name},
              {"category", l.category},
              {"material", l.material},
              {"location", l.location}};
}

Listing listing_from_json(const Json& j) {
  try {
    Listing l;
    l.listing_id = j.at("listing_id").get<std::string>();
    l.product_id = j.at("product_id").get<std::string>();
    l.seller_id = j.at("seller_id").get<std::string>();
    l.price = Money::parse(j.at("price").get<std::string>());
    l.dpp_address = ContentAddress::parse(j.at("dpp_address").get<std::string>());
    l.anchor_tid = TransactionId::parse(j.at("anchor_tid").get<std::string>());
    l.cpd = cpd_from_json(j.at("cpd"));
    l.status = listing_status_from(j.at("status").get<std::string>());
    l.listed_at = Timestamp::parse(j.at("listed_at").get<std::string>());
    l.name = j.value("name", std::string{});
    l.category = j.value("category", std::string{});
    l.material = j.value("material", std::string{});
    l.location = j.value("location", std::string{});
    return l;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("bad listing: ") + e.what());
  }
}

Json to_json(const VerificationReport& r) {
  return Json{{"product_id", r.product_id},
              {"tid", r.tid},
              {"x_i", r.x_i},
              {"y_i", r.y_i},
              {"v_i", r.v_i},
              {"price_match", r.price_match},
              {"message", r.message},
              {"marketplace_dpp_address", r.marketplace_dpp_address.hex()},
              {"ledger_dpp_address", r.ledger_dpp_address.hex()},
              {"marketplace_price",
               optional_str(r.marketplace_price ? std::optional(r.marketplace_price->str())
                                                : std::nullopt)},
              {"ledger_price", optional_str(r.ledger_price ? std::optional(r.ledger_price->str())
                                                           : std::nullopt)}};
}

Json to_json(const Order& o) {
  return Json{{"order_id", o.order_id},
              {"buyer_id", o.buyer_id},
              {"listing_id", o.listing_id},
              {"amount", o.amount.str()},
              {"status", std::string(to_string(o.status))},
              {"placed_at", o.placed_at.rfc3339()},
              {"payment_tid", o.payment_tid},
              {"ownership_tid", o.ownership_tid ? Json(o.ownership_tid->str()) : Json(nullptr)},
              {"new_dpp_address",
               o.new_dpp_address ? Json(o.new_dpp_address->hex()) : Json(nullptr)}};
}

Order order_from_json(const Json& j) {
  try {
    Order o;
    o.order_id = j.at("order_id").get<std::string>();
    o.buyer_id = j.at("buyer_id").get<std::string>();
    o.listing_id = j.at("listing_id").get<std::string>();
    o.amount = Money::parse(j.at("amount").get<std::string>());
    o.status = order_status_from(j.at("status").get<std::string>());
    o.placed_at = Timestamp::parse(j.at("placed_at").get<std::string>());
    o.payment_tid = j.value("payment_tid", std::string{});
    if (j.contains("ownership_tid") && !j.at("ownership_tid").is_null()) {
      o.ownership_tid = TransactionId::parse(j.at("ownership_tid").get<std::string>());
    }
    if (j.contains("new_dpp_address") && !j.at("new_dpp_address").is_null()) {
      o.new_dpp_address = ContentAddress::parse(j.at("new_dpp_address").get<std::string>());
    }
    return o;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("bad order: ") + e.what());
  }
}

Json to_json(const PaymentReceipt& r) {
  return Json{{"transaction_id", r.transaction_id},
              {"order_id", r.order_id},
              {"x", r.x},
              {"y", r.y},
              {"z", r.z},
              {"t_status", r.t_status},
              {"message", r.message},
              {"new_dpp_address",
               r.new_dpp_address ? Json(r.new_dpp_address->hex()) : Json(nullptr)},
              {"ownership_tid", r.ownership_tid ? Json(r.ownership_tid->str()) : Json(nullptr)},
              {"cpd", r.cpd ? to_json(*r.cpd) : Json(nullptr)}};
}

// --- Fault injection ---------------------------------------------------------

void FaultInjector::arm(FaultPoint point, FaultMode mode, int times) {
  std::lock_guard lock(mutex_);
  armed_[point] = Armed{mode, times};
}

void FaultInjector::clear() {
  std::lock_guard lock(mutex_);
  armed_.clear();
}

void FaultInjector::hit(FaultPoint point) {
  FaultMode mode;
  {
    std::lock_guard lock(mutex_);
    auto it = armed_.find(point);
    if (it == armed_.end() || it->second.remaining <= 0) return;
    mode = it->second.mode;
    if (--it->second.remaining == 0) armed_.erase(it);
  }
  if (mode == FaultMode::Crash) throw SimulatedCrash(point);
  const bool ledger_point = point == FaultPoint::AddLedgerAppend ||
                            point == FaultPoint::UpdateLedgerAppend ||
                            point == FaultPoint::PayLedgerAppend;
  throw Error(ledger_point ? ErrorCode::LedgerUnavailable : ErrorCode::IoError,
              "injected failure at " + std::string(to_string(point)));
}

// --- Construction and journal replay -----------------------------------------

class Marketplace::ProductLock {
 public:
  ProductLock(Marketplace& m, std::string_view product_id)
      : mutex_(m.product_mutex(product_id)), lock_(*mutex_) {}

 private:
  std::shared_ptr<std::mutex> mutex_;
  std::unique_lock<std::mutex> lock_;
};

namespace {

Json intent_to_json(const std::string& id, const std::string& op, const std::string& pid,
                    const TransactionId& mark, RecordKind kind,
                    const std::optional<ContentAddress>& ipfs_ref, const Money& price,
                    const std::string& owner, const std::optional<Listing>& listing,
                    const std::optional<Order>& order) {
  return Json{{"id", id},
              {"op", op},
              {"product_id", pid},
              {"ledger_mark", mark.str()},
              {"expected",
               {{"kind", std::string(to_string(kind))},
                {"ipfs_ref", ipfs_ref ? Json(ipfs_ref->hex()) : Json(nullptr)},
                {"price", price.str()},
                {"owner_id", owner}}},
              {"listing", listing ? to_json(*listing) : Json(nullptr)},
              {"order", order ? to_json(*order) : Json(nullptr)}};
}

}  // namespace

Marketplace::Marketplace(MarketplaceConfig config, Clock& clock, PaymentProvider& payments)
    : config_(std::move(config)),
      clock_(clock),
      payments_(payments),
      cas_(config_.data_dir / "cas", clock_, config_.fsync),
      ledger_(LedgerConfig{config_.data_dir / "ledger", config_.ledger_batch_size, config_.fsync}),
      journal_(config_.data_dir / "market" / "journal.log", config_.fsync) {
  ccpo::validate(config_.thresholds);
  ccpo::validate(config_.weights);
  if (config_.ledger_attempts < 1) {
    throw Error(ErrorCode::ConfigError, "ledger_attempts must be positive");
  }
  replay_journal();
}

Marketplace::Marketplace(MarketplaceConfig config)
    : config_(std::move(config)),
      owned_clock_(std::make_unique<SystemClock>()),
      owned_payments_(std::make_unique<SimulatedPaymentProvider>()),
      clock_(*owned_clock_),
      payments_(*owned_payments_),
      cas_(config_.data_dir / "cas", clock_, config_.fsync),
      ledger_(LedgerConfig{config_.data_dir / "ledger", config_.ledger_batch_size, config_.fsync}),
      journal_(config_.data_dir / "market" / "journal.log", config_.fsync) {
  ccpo::validate(config_.thresholds);
  ccpo::validate(config_.weights);
  if (config_.ledger_attempts < 1) {
    throw Error(ErrorCode::ConfigError, "ledger_attempts must be positive");
  }
  replay_journal();
}

Marketplace::~Marketplace() = default;

void Marketplace::replay_journal() {
  auto bump = [this](std::string_view id) {
    if (id.empty()) return;
    auto& c = counters_[id[0]];
    c = std::max(c, id_sequence(id));
  };

  for (const auto& ev : journal_.replay()) {
    const auto type = ev.at("type").get<std::string>();
    if (type == "participant") {
      Participant p{ev.at("id").get<std::string>(), ev.at("buyer").get<bool>(),
                    ev.at("seller").get<bool>()};
      participants_[p.id] = p;
    } else if (type == "participant_removed") {
      participants_.erase(ev.at("id").get<std::string>());
    } else if (type == "listing") {
      auto l = listing_from_json(ev.at("listing"));
      bump(l.listing_id);
      listings_[l.listing_id] = std::move(l);
    } else if (type == "order") {
      auto o = order_from_json(ev.at("order"));
      bump(o.order_id);
      orders_[o.order_id] = std::move(o);
    } else if (type == "intent") {
      const auto& j = ev.at("intent");
      Intent in;
      in.id = j.at("id").get<std::string>();
      in.op = j.at("op").get<std::string>();
      in.product_id = j.at("product_id").get<std::string>();
      in.ledger_mark = TransactionId::parse(j.at("ledger_mark").get<std::string>());
      const auto& ex = j.at("expected");
      in.expected.kind = record_kind_from_string(ex.at("kind").get<std::string>());
      if (!ex.at("ipfs_ref").is_null()) {
        in.expected.ipfs_ref = ContentAddress::parse(ex.at("ipfs_ref").get<std::string>());
      }
      in.expected.price = Money::parse(ex.at("price").get<std::string>());
      in.expected.owner_id = ex.at("owner_id").get<std::string>();
      if (!j.at("listing").is_null()) {
        in.listing = listing_from_json(j.at("listing"));
        bump(in.listing->listing_id);
      }
      if (!j.at("order").is_null()) in.order = order_from_json(j.at("order"));
      bump(in.id);
      intents_[in.id] = std::move(in);
    } else if (type == "intent_done") {
      intents_.erase(ev.at("id").get<std::string>());
      if (!ev.at("listing").is_null()) {
        auto l = listing_from_json(ev.at("listing"));
        listings_[l.listing_id] = std::move(l);
      }
      if (!ev.at("order").is_null()) {
        auto o = order_from_json(ev.at("order"));
        orders_[o.order_id] = std::move(o);
      }
    } else {
      throw Error(ErrorCode::IntegrityFailure, "unknown journal event '" + type + "'");
    }
  }

  std::vector<Intent> open;
  for (const auto& [id, in] : intents_) open.push_back(in);
  for (const auto& in : open) recover_intent(in);
}

std::shared_ptr<std::mutex> Marketplace::product_mutex(std::string_view product_id) {
  std::lock_guard lock(product_locks_mutex_);
  auto it = product_locks_.find(product_id);
  if (it == product_locks_.end()) {
    it = product_locks_.emplace(std::string(product_id), std::make_shared<std::mutex>()).first;
  }
  return it->second;
}

std::string Marketplace::next_id(char prefix) {
  std::unique_lock lock(state_mutex_);
  const auto n = ++counters_[prefix];
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06lu", prefix, n);
  return buf;
}

// --- Intents -----------------------------------------------------------------

void Marketplace::begin_intent(const Intent& in) {
  std::unique_lock lock(state_mutex_);
  journal_.append(Json{{"type", "intent"},
                       {"intent", intent_to_json(in.id, in.op, in.product_id, in.ledger_mark,
                                                 in.expected.kind, in.expected.ipfs_ref,
                                                 in.expected.price, in.expected.owner_id,
                                                 in.listing, in.order)}});
  intents_[in.id] = in;
}

void Marketplace::commit_intent(const Intent& in, const std::optional<Listing>& listing,
                                const std::optional<Order>& order) {
  std::unique_lock lock(state_mutex_);
  journal_.append(Json{{"type", "intent_done"},
                       {"id", in.id},
                       {"outcome", "commit"},
                       {"listing", listing ? to_json(*listing) : Json(nullptr)},
                       {"order", order ? to_json(*order) : Json(nullptr)}});
  intents_.erase(in.id);
  if (listing) listings_[listing->listing_id] = *listing;
  if (order) orders_[order->order_id] = *order;
}

void Marketplace::abort_intent(const Intent& in, const std::optional<Order>& order) {
  std::unique_lock lock(state_mutex_);
  journal_.append(Json{{"type", "intent_done"},
                       {"id", in.id},
                       {"outcome", "abort"},
                       {"listing", nullptr},
                       {"order", order ? to_json(*order) : Json(nullptr)}});
  intents_.erase(in.id);
  if (order) orders_[order->order_id] = *order;
}

std::optional<TransactionId> Marketplace::find_committed(const Intent& in) const {
  for (const auto& tid : ledger_.history_for(in.product_id)) {
    if (tid < in.ledger_mark) continue;
    const auto rec = ledger_.get_record(tid);
    if (rec.kind == in.expected.kind && rec.price == in.expected.price &&
        rec.owner_id == in.expected.owner_id &&
        (!in.expected.ipfs_ref || rec.ipfs_ref == *in.expected.ipfs_ref)) {
      return tid;
    }
  }
  return std::nullopt;
}

void Marketplace::recover_intent(const Intent& in) {
  const auto tid = find_committed(in);
  if (in.op == "pay") {
    Order order = *in.order;
    if (!tid) {
      payments_.refund(order.payment_tid);
      order.status = OrderStatus::Placed;
      abort_intent(in, order);
      return;
    }
    const auto rec = ledger_.get_record(*tid);
    std::optional<Listing> listing = find_listing(order.listing_id);
    if (listing) listing->status = ListingStatus::Sold;
    order.status = OrderStatus::Fulfilled;
    order.ownership_tid = *tid;
    order.new_dpp_address = rec.ipfs_ref;
    commit_intent(in, listing, order);
    return;
  }
  if (!tid) {
    abort_intent(in, std::nullopt);
    return;
  }
  Listing listing = *in.listing;
  listing.anchor_tid = *tid;
  commit_intent(in, listing, std::nullopt);
}

std::size_t Marketplace::open_intents() const {
  std::shared_lock lock(state_mutex_);
  return intents_.size();
}

TransactionId Marketplace::record_with_retries(const LedgerRecord& record, FaultPoint point) {
  std::string last_error;
  for (int attempt = 1; attempt <= config_.ledger_attempts; ++attempt) {
    try {
      faults_.hit(point);
      return ledger_.record(record);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::LedgerUnavailable) throw;
      last_error = e.what();
    }
  }
  throw Error(ErrorCode::LedgerUnavailable,
              "ledger unavailable after " + std::to_string(config_.ledger_attempts) +
                  " attempts: " + last_error);
}

// --- Participants --------------------------------------------------------------

void Marketplace::register_participant(const std::string& id, bool buyer, bool seller) {
  if (id.empty()) throw Error(ErrorCode::ValidationError, "participant id must not be empty");
  if (!buyer && !seller) {
    throw Error(ErrorCode::ValidationError, "participant needs the buyer or seller role");
  }
  std::unique_lock lock(state_mutex_);
  auto& p = participants_[id];
  p.id = id;
  p.buyer = p.buyer || buyer;
  p.seller = p.seller || seller;
  journal_.append(Json{{"type", "participant"}, {"id", id}, {"buyer", p.buyer}, {"seller", p.seller}});
}

std::optional<Participant> Marketplace::participant(std::string_view id) const {
  std::shared_lock lock(state_mutex_);
  auto it = participants_.find(id);
  if (it == participants_.end()) return std::nullopt;
  return it->second;
}

bool Marketplace::is_buyer(std::string_view id) const {
  auto p = participant(id);
  return p && p->buyer;
}

bool Marketplace::is_seller(std::string_view id) const {
  auto p = participant(id);
  return p && p->seller;
}

// --- Listing lifecycle -----------------------------------------------------------

Listing Marketplace::add_product(const dpp::IfcLiteProduct& product, const std::string& seller,
                                 Money price) {
  if (!product.value_fields) {
    throw Error(ErrorCode::InvalidValueFields,
                "product '" + product.product_id + "' carries no value_fields");
  }
  return add_product(product, seller, price, *product.value_fields);
}

Listing Marketplace::add_product(const dpp::IfcLiteProduct& product, const std::string& seller,
                                 Money price, const ccpo::ValueFields& values,
                                 AddProductTimings* timings) {
  if (product.product_id.empty()) {
    throw Error(ErrorCode::MalformedInput, "product has no product_id");
  }
  if (!is_seller(seller)) {
    throw Error(ErrorCode::UnknownParticipant, "'" + seller + "' is not a registered seller");
  }
  if (price.is_zero()) throw Error(ErrorCode::InvalidPrice, "price must be positive");
  const auto assessment = ccpo::assess(values, config_.thresholds, config_.weights);
  if (assessment.listing_status != 1) {
    char score[32];
    std::snprintf(score, sizeof score, "%.3f", assessment.score);
    throw Error(ErrorCode::NotStrongReuse,
                "product '" + product.product_id + "' scored " + score + " (" +
                    std::string(ccpo::to_string(assessment.category)) +
                    " reuse); disposition: " +
                    std::string(ccpo::to_string(assessment.disposition)));
  }

  ProductLock lock(*this, product.product_id);
  if (ledger_.has_product(product.product_id)) {
    throw Error(ErrorCode::DuplicateProduct,
                "product '" + product.product_id + "' is already on the ledger");
  }

  const auto now = clock_.now();
  auto t = std::chrono::steady_clock::now();
  const auto passport = dpp::create_dpp(product, seller, now);
  const auto bytes = dpp::canonical_bytes(passport);
  const double dpp_ms = elapsed_ms(t);
  faults_.hit(FaultPoint::AddAfterDppCreate);

  t = std::chrono::steady_clock::now();
  const auto address = cas_.store(bytes);
  const double cas_ms = elapsed_ms(t);
  faults_.hit(FaultPoint::AddAfterCasStore);

  Listing listing;
  listing.listing_id = next_id('L');
  listing.product_id = product.product_id;
  listing.seller_id = seller;
  listing.price = price;
  listing.dpp_address = address;
  listing.cpd = {product.product_id, product.category, price, passport.version, product.name};
  listing.status = ListingStatus::Active;
  listing.listed_at = now;
  listing.name = product.name;
  listing.category = product.category;
  listing.material = product.material.empty() ? values.material : product.material;
  listing.location = product.location;

  Intent intent{next_id('I'), "add", product.product_id, ledger_.next_tid(),
                {RecordKind::ProductAdded, address, price, seller}, listing, std::nullopt};
  begin_intent(intent);
  try {
    faults_.hit(FaultPoint::AddAfterIntent);
  } catch (const Error&) {
    abort_intent(intent, std::nullopt);
    throw;
  }

  t = std::chrono::steady_clock::now();
  const LedgerRecord record{RecordKind::ProductAdded, product.product_id, address, listing.cpd,
                            price, seller, std::nullopt};
  try {
    listing.anchor_tid = record_with_retries(record, FaultPoint::AddLedgerAppend);
  } catch (const Error&) {
    abort_intent(intent, std::nullopt);
    throw;
  }
  const double ledger_ms = elapsed_ms(t);

  try {
    faults_.hit(FaultPoint::AddAfterLedgerRecord);
    commit_intent(intent, listing, std::nullopt);
  } catch (const Error&) {
    // The ledger append is the commit point: roll forward.
    recover_intent(intent);
  }
  try {
    faults_.hit(FaultPoint::AddAfterCommit);
  } catch (const Error&) {
  }

  if (timings) *timings = {dpp_ms, cas_ms, ledger_ms};
  return listing;
}

Listing Marketplace::anchor_listing_change(Listing listing, const std::string& op,
                                           RecordKind kind, FaultPoint append_point,
                                           FaultPoint after_point) {
  Intent intent{next_id('I'), op, listing.product_id, ledger_.next_tid(),
                {kind, listing.dpp_address, listing.price, listing.seller_id}, listing,
                std::nullopt};
  begin_intent(intent);
  const LedgerRecord record{kind, listing.product_id, listing.dpp_address, listing.cpd,
                            listing.price, listing.seller_id, std::nullopt};
  try {
    listing.anchor_tid = record_with_retries(record, append_point);
  } catch (const Error&) {
    abort_intent(intent, std::nullopt);
    throw;
  }
  try {
    faults_.hit(after_point);
    commit_intent(intent, listing, std::nullopt);
  } catch (const Error&) {
    recover_intent(intent);
  }
  return listing;
}

Listing Marketplace::update_price(const std::string& listing_id, const std::string& seller,
                                  Money price) {
  if (price.is_zero()) throw Error(ErrorCode::InvalidPrice, "price must be positive");
  const auto pid = get_listing(listing_id).product_id;
  ProductLock lock(*this, pid);
  auto listing = get_listing(listing_id);
  if (listing.status != ListingStatus::Active) {
    throw Error(ErrorCode::ListingNotActive, "listing " + listing_id + " is not active");
  }
  if (listing.seller_id != seller) {
    throw Error(ErrorCode::ValidationError, "'" + seller + "' does not own listing " + listing_id);
  }
  listing.price = price;
  listing.cpd.listed_price = price;
  return anchor_listing_change(std::move(listing), "update", RecordKind::ProductUpdated,
                               FaultPoint::UpdateLedgerAppend,
                               FaultPoint::UpdateAfterLedgerRecord);
}

Listing Marketplace::revise_dpp(const std::string& listing_id, const std::string& seller,
                                const Json& sections) {
  if (!sections.is_object() || sections.empty()) {
    throw Error(ErrorCode::ValidationError, "sections must be a non-empty object");
  }
  const auto pid = get_listing(listing_id).product_id;
  ProductLock lock(*this, pid);
  auto listing = get_listing(listing_id);
  if (listing.status != ListingStatus::Active) {
    throw Error(ErrorCode::ListingNotActive, "listing " + listing_id + " is not active");
  }
  if (listing.seller_id != seller) {
    throw Error(ErrorCode::ValidationError, "'" + seller + "' does not own listing " + listing_id);
  }
  auto passport = dpp::parse(cas_.retrieve(listing.dpp_address));
  for (const auto& [name, content] : sections.items()) {
    dpp::set_section(passport, name, content);
  }
  passport.updated_at = std::max(clock_.now(), passport.updated_at);
  listing.dpp_address = cas_.store(dpp::canonical_bytes(passport));
  return anchor_listing_change(std::move(listing), "update", RecordKind::ProductUpdated,
                               FaultPoint::UpdateLedgerAppend,
                               FaultPoint::UpdateAfterLedgerRecord);
}

Listing Marketplace::relist(const std::string& product_id, const std::string& seller,
                            Money price) {
  if (!is_seller(seller)) {
    throw Error(ErrorCode::UnknownParticipant, "'" + seller + "' is not a registered seller");
  }
  if (price.is_zero()) throw Error(ErrorCode::InvalidPrice, "price must be positive");
  ProductLock lock(*this, product_id);
  const auto latest = ledger_.latest_record_for(product_id);
  if (latest.owner_id != seller) {
    throw Error(ErrorCode::ValidationError,
                "'" + seller + "' is not the current owner of " + product_id);
  }
  std::optional<Listing> previous;
  {
    std::shared_lock state(state_mutex_);
    for (const auto& [id, l] : listings_) {
      if (l.product_id != product_id) continue;
      if (l.status == ListingStatus::Active) {
        throw Error(ErrorCode::DuplicateProduct,
                    "product '" + product_id + "' already has an active listing");
      }
      if (!previous || previous->listed_at < l.listed_at) previous = l;
    }
  }
  const auto passport = dpp::parse(cas_.retrieve(latest.ipfs_ref));

  Listing listing;
  listing.listing_id = next_id('L');
  listing.product_id = product_id;
  listing.seller_id = seller;
  listing.price = price;
  listing.dpp_address = latest.ipfs_ref;
  listing.cpd = latest.cpd;
  listing.cpd.listed_price = price;
  listing.cpd.dpp_version = passport.version;
  listing.status = ListingStatus::Active;
  listing.listed_at = clock_.now();
  if (previous) {
    listing.name = previous->name;
    listing.category = previous->category;
    listing.material = previous->material;
    listing.location = previous->location;
  }
  return anchor_listing_change(std::move(listing), "relist", RecordKind::ProductUpdated,
                               FaultPoint::UpdateLedgerAppend,
                               FaultPoint::UpdateAfterLedgerRecord);
}

void Marketplace::withdraw(const std::string& listing_id, const std::string& seller) {
  const auto pid = get_listing(listing_id).product_id;
  ProductLock lock(*this, pid);
  auto listing = get_listing(listing_id);
  if (listing.seller_id != seller) {
    throw Error(ErrorCode::ValidationError, "'" + seller + "' does not own listing " + listing_id);
  }
  if (listing.status != ListingStatus::Active) {
    throw Error(ErrorCode::ListingNotActive, "listing " + listing_id + " is not active");
  }
  listing.status = ListingStatus::Withdrawn;
  std::unique_lock state(state_mutex_);
  put_listing_locked(listing);
}

void Marketplace::put_listing_locked(const Listing& l) {
  journal_.append(Json{{"type", "listing"}, {"listing", to_json(l)}});
  listings_[l.listing_id] = l;
}

// --- Queries -------------------------------------------------------------------------

std::optional<Listing> Marketplace::find_listing(std::string_view listing_id) const {
  std::shared_lock lock(state_mutex_);
  auto it = listings_.find(listing_id);
  if (it == listings_.end()) return std::nullopt;
  return it->second;
}

Listing Marketplace::get_listing(std::string_view listing_id) const {
  if (auto l = find_listing(listing_id)) return *l;
  throw Error(ErrorCode::NotFound, "no listing '" + std::string(listing_id) + "'");
}

std::vector<Listing> Marketplace::listings() const {
  std::shared_lock lock(state_mutex_);
  std::vector<Listing> out;
  for (const auto& [id, l] : listings_) out.push_back(l);
  return out;
}

std::optional<Listing> Marketplace::listing_for_product(std::string_view product_id) const {
  std::shared_lock lock(state_mutex_);
  std::optional<Listing> best;
  for (const auto& [id, l] : listings_) {
    if (l.product_id != product_id) continue;
    if (l.status == ListingStatus::Active) return l;
    if (!best || best->listed_at < l.listed_at ||
        (best->listed_at == l.listed_at && best->listing_id < l.listing_id)) {
      best = l;
    }
  }
  return best;
}

ListingValidity Marketplace::listing_validity(std::string_view pid, std::string_view mid,
                                              std::string_view lid) const {
  std::shared_lock lock(state_mutex_);
  return listing_validity_locked(pid, mid, lid);
}

ListingValidity Marketplace::listing_validity_locked(std::string_view pid, std::string_view mid,
                                                     std::string_view lid) const {
  ListingValidity v;
  auto p = participants_.find(mid);
  v.x = ledger_.has_product(pid) && p != participants_.end() && p->second.seller ? 1 : 0;

  auto it = listings_.find(lid);
  if (it != listings_.end()) {
    const auto& l = it->second;
    bool ok = l.product_id == pid && l.seller_id == mid && cas_.contains(l.dpp_address);
    if (ok) {
      try {
        const auto anchor = ledger_.get_record(l.anchor_tid);
        ok = anchor.product_id == pid && anchor.owner_id == mid &&
             anchor.ipfs_ref == l.dpp_address;
      } catch (const Error&) {
        ok = false;
      }
    }
    v.y = ok ? 1 : 0;
  }
  v.v = v.x * v.y;
  return v;
}

SearchPage Marketplace::search(const SearchQuery& query) const {
  if (query.page < 1 || query.page_size < 1 || query.page_size > 100) {
    throw Error(ErrorCode::InvalidPagination, "page must be >= 1 and page_size within [1, 100]");
  }
  for (const auto& [key, value] : query.facets) {
    if (key != "category" && key != "material" && key != "location") {
      throw Error(ErrorCode::ValidationError, "unknown search facet '" + key + "'");
    }
  }
  const std::string needle = query.text ? lower(*query.text) : std::string{};

  std::vector<Listing> hits;
  {
    std::shared_lock lock(state_mutex_);
    for (const auto& [id, l] : listings_) {
      if (l.status != ListingStatus::Active) continue;
      bool match = true;
      for (const auto& [key, value] : query.facets) {
        const auto& field = key == "category" ? l.category
                            : key == "material" ? l.material
                                                : l.location;
        if (lower(field) != lower(value)) match = false;
      }
      if (match && !needle.empty()) {
        const auto hay = lower(l.name + "\n" + l.product_id + "\n" + l.category + "\n" +
                               l.material + "\n" + l.location + "\n" + l.cpd.summary);
        match = hay.find(needle) != std::string::npos;
      }
      if (match && listing_validity_locked(l.product_id, l.seller_id, l.listing_id).v == 1) {
        hits.push_back(l);
      }
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Listing& a, const Listing& b) {
    if (a.listed_at != b.listed_at) return a.listed_at > b.listed_at;
    return a.listing_id < b.listing_id;
  });

  SearchPage page;
  page.total = hits.size();
  page.page = query.page;
  page.page_size = query.page_size;
  const auto begin = static_cast<std::size_t>(query.page - 1) * query.page_size;
  for (std::size_t i = begin; i < hits.size() && i < begin + query.page_size; ++i) {
    page.listings.push_back(hits[i]);
  }
  return page;
}

dpp::DigitalProductPassport Marketplace::retrieve_dpp(std::string_view listing_id) const {
  const auto listing = get_listing(listing_id);
  return dpp::parse(cas_.retrieve(listing.dpp_address));
}

VerificationReport Marketplace::verify_product(std::string_view pid, std::string_view tid) const {
  try {
    return verify_product(pid, TransactionId::parse(tid));
  } catch (const Error&) {
    VerificationReport r;
    r.product_id = std::string(pid);
    r.tid = std::string(tid);
    r.message = std::string(kDppMismatch);
    if (auto l = listing_for_product(pid)) {
      r.marketplace_dpp_address = l->dpp_address;
      r.marketplace_price = l->price;
    }
    return r;
  }
}

VerificationReport Marketplace::verify_product(std::string_view pid,
                                               const TransactionId& tid) const {
  VerificationReport r;
  r.product_id = std::string(pid);
  r.tid = tid.str();

  // GetMarketPlaceDPP(p_id)
  const auto listing = listing_for_product(pid);
  bool listed = false;
  bool marketplace_dpp_ok = false;
  if (listing) {
    listed = true;
    r.marketplace_dpp_address = listing->dpp_address;
    r.marketplace_price = listing->price;
    try {
      marketplace_dpp_ok = dpp::parse(cas_.retrieve(listing->dpp_address)).product_id == pid;
    } catch (const Error&) {
      marketplace_dpp_ok = false;
    }
  }

  // GetDPP(T_id, p_id) / GetBlockchainPrice(T_id, p_id)
  std::optional<LedgerRecord> anchored;
  try {
    auto rec = ledger_.get_record(tid);
    if (rec.product_id == pid) anchored = std::move(rec);
  } catch (const Error&) {
  }
  if (anchored) {
    r.ledger_dpp_address = anchored->ipfs_ref;
    r.ledger_price = anchored->price;
  }

  r.y_i = listed && anchored && marketplace_dpp_ok &&
                  listing->dpp_address == anchored->ipfs_ref
              ? 1
              : 0;
  r.x_i = listed && r.y_i == 1 ? 1 : 0;
  r.v_i = r.x_i * r.y_i;
  r.price_match = listing && anchored && listing->price == anchored->price;

  if (r.v_i == 0) {
    r.message = std::string(kDppMismatch);
  } else if (!r.price_match) {
    r.message = std::string(kPriceMismatch);
  } else {
    r.message = std::string(kVerificationSuccessful);
  }
  return r;
}

// --- Orders and payment ----------------------------------------------------------

Order Marketplace::place_order(const std::string& buyer, const std::string& listing_id) {
  if (!is_buyer(buyer)) {
    throw Error(ErrorCode::UnknownParticipant, "'" + buyer + "' is not a registered buyer");
  }
  const auto listing = get_listing(listing_id);
  if (listing.status != ListingStatus::Active) {
    throw Error(ErrorCode::ListingNotActive, "listing " + listing_id + " is not active");
  }
  if (listing.seller_id == buyer) {
    throw Error(ErrorCode::SelfTransfer, "'" + buyer + "' cannot buy their own listing");
  }
  if (listing_validity(listing.product_id, listing.seller_id, listing_id).v != 1) {
    throw Error(ErrorCode::VerificationFailed, "listing " + listing_id + " is not valid");
  }
  const auto report = verify_product(listing.product_id, listing.anchor_tid);
  if (!report.successful()) {
    throw Error(ErrorCode::VerificationFailed, report.message);
  }

  Order order;
  order.order_id = next_id('O');
  order.buyer_id = buyer;
  order.listing_id = listing_id;
  order.amount = listing.price;
  order.status = OrderStatus::Placed;
  order.placed_at = clock_.now();
  std::unique_lock lock(state_mutex_);
  journal_.append(Json{{"type", "order"}, {"order", to_json(order)}});
  orders_[order.order_id] = order;
  return order;
}

Order Marketplace::get_order(std::string_view order_id) const {
  std::shared_lock lock(state_mutex_);
  auto it = orders_.find(order_id);
  if (it == orders_.end()) {
    throw Error(ErrorCode::NotFound, "no order '" + std::string(order_id) + "'");
  }
  return it->second;
}

std::vector<Order> Marketplace::orders() const {
  std::shared_lock lock(state_mutex_);
  std::vector<Order> out;
  for (const auto& [id, o] : orders_) out.push_back(o);
  return out;
}

PaymentReceipt Marketplace::pay(const std::string& order_id, const std::string& instrument) {
  const auto first_look = get_order(order_id);
  const auto listing_guess = find_listing(first_look.listing_id);
  ProductLock lock(*this, listing_guess ? listing_guess->product_id : "order:" + order_id);

  Order order = get_order(order_id);
  if (order.status != OrderStatus::Placed) {
    throw Error(ErrorCode::OrderNotPayable,
                "order " + order_id + " is " + std::string(to_string(order.status)));
  }
  const auto listing = find_listing(order.listing_id);

  PaymentReceipt receipt;
  receipt.order_id = order_id;
  receipt.x = is_buyer(order.buyer_id) ? 1 : 0;
  receipt.y = listing && listing->status == ListingStatus::Active &&
                      listing->price == order.amount
                  ? 1
                  : 0;

  // MakePayment(B_info, S_info, p_id, Pr): authorization first, capture
  // only once every other condition holds.
  const auto auth = payments_.authorize(
      {order.buyer_id, listing ? listing->seller_id : std::string{},
       listing ? listing->product_id : std::string{}, order.amount, instrument});
  receipt.transaction_id = auth.transaction_id;
  receipt.z = auth.approved ? 1 : 0;
  receipt.t_status = receipt.x * receipt.y * receipt.z;
  order.payment_tid = auth.transaction_id;

  if (receipt.t_status == 0) {
    payments_.release(auth.transaction_id);
    order.status = OrderStatus::Failed;
    {
      std::unique_lock state(state_mutex_);
      journal_.append(Json{{"type", "order"}, {"order", to_json(order)}});
      orders_[order.order_id] = order;
    }
    receipt.message = std::string(kPaymentFailed);
    return receipt;
  }

  Intent intent{next_id('I'), "pay", listing->product_id, ledger_.next_tid(),
                {RecordKind::OwnershipTransferred, std::nullopt, listing->price, order.buyer_id},
                std::nullopt, order};
  begin_intent(intent);

  auto roll_back = [&] {
    payments_.refund(auth.transaction_id);
    Order reverted = order;
    reverted.status = OrderStatus::Placed;
    abort_intent(intent, reverted);
  };

  dpp::DigitalProductPassport next;
  ContentAddress new_address;
  try {
    faults_.hit(FaultPoint::PayAfterIntent);
    payments_.capture(auth.transaction_id);
    {
      Order paid = order;
      paid.status = OrderStatus::Paid;
      std::unique_lock state(state_mutex_);
      journal_.append(Json{{"type", "order"}, {"order", to_json(paid)}});
      orders_[paid.order_id] = paid;
    }
    faults_.hit(FaultPoint::PayAfterCapture);
    // UpdateDPP(B_info)
    const auto current = dpp::parse(cas_.retrieve(listing->dpp_address));
    next = dpp::update_dpp_owner(current, order.buyer_id, clock_.now());
    faults_.hit(FaultPoint::PayAfterDppUpdate);
    // StoreInIPFS(DPP)
    new_address = cas_.store(dpp::canonical_bytes(next));
    faults_.hit(FaultPoint::PayAfterCasStore);
  } catch (const Error&) {
    roll_back();
    throw;
  }

  // ChangeOfOwnership(Info, B_info)
  auto cpd = listing->cpd;
  cpd.dpp_version = next.version;
  const LedgerRecord record{RecordKind::OwnershipTransferred, listing->product_id, new_address,
                            cpd, listing->price, order.buyer_id, std::nullopt};
  TransactionId ownership_tid;
  try {
    ownership_tid = record_with_retries(record, FaultPoint::PayLedgerAppend);
  } catch (const Error&) {
    roll_back();
    throw;
  }

  Listing sold = *listing;
  sold.status = ListingStatus::Sold;
  Order done = order;
  done.status = OrderStatus::Fulfilled;
  done.ownership_tid = ownership_tid;
  done.new_dpp_address = new_address;
  try {
    faults_.hit(FaultPoint::PayAfterLedgerRecord);
    commit_intent(intent, sold, done);
  } catch (const Error&) {
    recover_intent(intent);
  }
  try {
    faults_.hit(FaultPoint::PayAfterCommit);
  } catch (const Error&) {
  }

  // SendToBuyer(A_IPFS, T_id, CPD)
  receipt.message = std::string(kPaymentSuccessful);
  receipt.new_dpp_address = new_address;
  receipt.ownership_tid = ownership_tid;
  receipt.cpd = cpd;
  return receipt;
}

// --- Invariant scan ----------------------------------------------------------------

std::vector<std::string> Marketplace::check_invariants() const {
  std::vector<std::string> bad;
  const auto all_listings = listings();
  const auto all_orders = orders();

  if (auto n = open_intents(); n != 0) bad.push_back(std::to_string(n) + " open intents");

  std::map<std::string, int> active_per_product;
  std::map<std::string, std::vector<const Listing*>> by_product;
  for (const auto& l : all_listings) {
    by_product[l.product_id].push_back(&l);
    if (l.status == ListingStatus::Active) ++active_per_product[l.product_id];
    if (!cas_.contains(l.dpp_address)) {
      bad.push_back("listing " + l.listing_id + " DPP not in content store");
    }
    try {
      const auto anchor = ledger_.get_record(l.anchor_tid);
      if (anchor.product_id != l.product_id || anchor.ipfs_ref != l.dpp_address) {
        bad.push_back("listing " + l.listing_id + " anchor does not match its DPP");
      }
      if (anchor.price != l.price) {
        bad.push_back("listing " + l.listing_id + " price differs from ledger");
      }
    } catch (const Error&) {
      bad.push_back("listing " + l.listing_id + " anchor " + l.anchor_tid.str() + " unresolved");
    }
  }
  for (const auto& [pid, n] : active_per_product) {
    if (n > 1) bad.push_back("product " + pid + " has " + std::to_string(n) + " active listings");
  }

  std::map<std::string, const Order*> fulfilled_by_listing;
  for (const auto& o : all_orders) {
    if (o.status != OrderStatus::Fulfilled) continue;
    if (fulfilled_by_listing.count(o.listing_id)) {
      bad.push_back("listing " + o.listing_id + " sold twice");
    }
    fulfilled_by_listing[o.listing_id] = &o;
    const auto l = find_listing(o.listing_id);
    if (!l || l->status != ListingStatus::Sold) {
      bad.push_back("order " + o.order_id + " fulfilled but listing not sold");
    }
    if (!o.ownership_tid) {
      bad.push_back("order " + o.order_id + " fulfilled without ownership record");
      continue;
    }
    try {
      const auto rec = ledger_.get_record(*o.ownership_tid);
      if (rec.kind != RecordKind::OwnershipTransferred || rec.owner_id != o.buyer_id) {
        bad.push_back("order " + o.order_id + " ownership record mismatch");
      }
    } catch (const Error&) {
      bad.push_back("order " + o.order_id + " ownership record missing");
    }
  }
  for (const auto& l : all_listings) {
    if (l.status == ListingStatus::Sold && !fulfilled_by_listing.count(l.listing_id)) {
      bad.push_back("listing " + l.listing_id + " sold without a fulfilled order");
    }
  }

  std::set<std::string> ledger_products;
  for (const auto& [tid, rec] : ledger_.all_records()) {
    ledger_products.insert(rec.product_id);
    try {
      const auto passport = dpp::parse(cas_.retrieve(rec.ipfs_ref));
      if (passport.product_id != rec.product_id || passport.version != rec.cpd.dpp_version) {
        bad.push_back("record " + tid.str() + " anchors a DPP of another product/version");
      }
    } catch (const Error& e) {
      bad.push_back("record " + tid.str() + " DPP unavailable: " + e.what());
    }
  }
  for (const auto& pid : ledger_products) {
    auto it = by_product.find(pid);
    if (it == by_product.end()) {
      bad.push_back("product " + pid + " on ledger without any listing");
      continue;
    }
    const auto latest_tid = *ledger_.latest_tid_for(pid);
    const auto latest = ledger_.get_record(latest_tid);
    bool explained = false;
    for (const auto* l : it->second) {
      if (l->status == ListingStatus::Active && l->anchor_tid == latest_tid) explained = true;
      if (l->status == ListingStatus::Withdrawn && l->anchor_tid == latest_tid) explained = true;
    }
    if (latest.kind == RecordKind::OwnershipTransferred) {
      for (const auto& o : all_orders) {
        if (o.ownership_tid == latest_tid && o.status == OrderStatus::Fulfilled) explained = true;
      }
    }
    if (!explained) {
      bad.push_back("latest ledger record " + latest_tid.str() + " for " + pid +
                    " not reflected in marketplace state");
    }
  }

  const auto chain = ledger_.verify_chain();
  if (!chain.valid) bad.push_back("ledger chain invalid: " + chain.reason);
  return bad;
}

}  // namespace market
