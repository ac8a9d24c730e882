#pragma once

// Marketplace core: listing lifecycle, search, DPP retrieval, provenance
// verification and the order/payment/ownership-transfer flow, layered on
// the content store, the ledger, the reuse assessment and the DPP model.
//
// Every mutation that touches the ledger is bracketed by an intent in the
// marketplace journal. The ledger append is the commit point: on open, any
// intent left behind by a crash is rolled forward if its ledger record
// exists and rolled back otherwise.

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "market/cas.hpp"
#include "market/ccpo.hpp"
#include "market/dpp.hpp"
#include "market/journal.hpp"
#include "market/ledger.hpp"
#include "market/money.hpp"
#include "market/payment.hpp"
#include "market/time.hpp"

namespace market {

inline constexpr std::string_view kVerificationSuccessful = "Verification successful.";
inline constexpr std::string_view kDppMismatch = "Discrepancy found: DPP does not match.";
inline constexpr std::string_view kPriceMismatch = "Verification failed: Pricing does not match.";
inline constexpr std::string_view kPaymentFailed = "Payment failed.";
inline constexpr std::string_view kPaymentSuccessful = "Payment successful.";

struct Participant {
  std::string id;
  bool buyer = false;
  bool seller = false;
};

enum class ListingStatus { Active, Sold, Withdrawn };
std::string_view to_string(ListingStatus s) noexcept;

struct Listing {
  std::string listing_id;
  std::string product_id;
  std::string seller_id;
  Money price;
  ContentAddress dpp_address;
  TransactionId anchor_tid;
  CriticalProductDetails cpd;
  ListingStatus status = ListingStatus::Active;
  Timestamp listed_at;
  // Search facets.
  std::string name;
  std::string category;
  std::string material;
  std::string location;
};

canonical::Json to_json(const Listing& l);
Listing listing_from_json(const canonical::Json& j);

struct ListingValidity {
  int x = 0;
  int y = 0;
  int v = 0;
};

struct VerificationReport {
  std::string product_id;
  std::string tid;
  int x_i = 0;
  int y_i = 0;
  int v_i = 0;
  bool price_match = false;
  std::string message;
  ContentAddress marketplace_dpp_address;
  ContentAddress ledger_dpp_address;
  std::optional<Money> marketplace_price;
  std::optional<Money> ledger_price;

  bool successful() const { return message == kVerificationSuccessful; }
};

canonical::Json to_json(const VerificationReport& r);

enum class OrderStatus { Placed, Paid, Failed, Fulfilled };
std::string_view to_string(OrderStatus s) noexcept;

struct Order {
  std::string order_id;
  std::string buyer_id;
  std::string listing_id;
  Money amount;
  OrderStatus status = OrderStatus::Placed;
  Timestamp placed_at;
  std::string payment_tid;
  std::optional<TransactionId> ownership_tid;
  std::optional<ContentAddress> new_dpp_address;
};

canonical::Json to_json(const Order& o);
Order order_from_json(const canonical::Json& j);

struct PaymentReceipt {
  std::string transaction_id;
  std::string order_id;
  int x = 0;
  int y = 0;
  int z = 0;
  int t_status = 0;
  std::string message;
  std::optional<ContentAddress> new_dpp_address;
  std::optional<TransactionId> ownership_tid;
  std::optional<CriticalProductDetails> cpd;
};

canonical::Json to_json(const PaymentReceipt& r);

struct SearchQuery {
  /// Conjunctive equality filters over "category", "material", "location"
  /// (case-insensitive).
  std::map<std::string, std::string> facets;
  std::optional<std::string> text;
  int page = 1;
  int page_size = 20;
};

struct SearchPage {
  std::vector<Listing> listings;
  std::size_t total = 0;
  int page = 1;
  int page_size = 20;
};

struct MarketplaceConfig {
  std::filesystem::path data_dir;
  ccpo::ReuseThresholds thresholds;
  ccpo::ScoreWeights weights;
  std::string currency = "GBP";
  std::size_t ledger_batch_size = 1;
  /// Attempts for each ledger append before giving up.
  int ledger_attempts = 3;
  bool fsync = true;
};

struct AddProductTimings {
  double dpp_creation_ms = 0.0;
  double cas_store_ms = 0.0;
  double ledger_record_ms = 0.0;
};

/// Step boundaries where a failure or crash can be injected.
enum class FaultPoint {
  AddAfterDppCreate,
  AddAfterCasStore,
  AddAfterIntent,
  AddLedgerAppend,
  AddAfterLedgerRecord,
  AddAfterCommit,
  UpdateLedgerAppend,
  UpdateAfterLedgerRecord,
  PayAfterIntent,
  PayAfterCapture,
  PayAfterDppUpdate,
  PayAfterCasStore,
  PayLedgerAppend,
  PayAfterLedgerRecord,
  PayAfterCommit,
};

inline constexpr std::array kAddFaultPoints = {
    FaultPoint::AddAfterDppCreate, FaultPoint::AddAfterCasStore,
    FaultPoint::AddAfterIntent,    FaultPoint::AddLedgerAppend,
    FaultPoint::AddAfterLedgerRecord, FaultPoint::AddAfterCommit,
};
inline constexpr std::array kPayFaultPoints = {
    FaultPoint::PayAfterIntent,   FaultPoint::PayAfterCapture,
    FaultPoint::PayAfterDppUpdate, FaultPoint::PayAfterCasStore,
    FaultPoint::PayLedgerAppend,  FaultPoint::PayAfterLedgerRecord,
    FaultPoint::PayAfterCommit,
};

std::string_view to_string(FaultPoint p) noexcept;

enum class FaultMode {
  /// The step raises an ordinary Error (LedgerUnavailable at ledger
  /// points); the marketplace's own recovery runs.
  Fail,
  /// Throws SimulatedCrash, which no marketplace code catches; the
  /// instance must be discarded and the data directory reopened.
  Crash,
};

struct SimulatedCrash : std::exception {
  explicit SimulatedCrash(FaultPoint p) : point(p) {}
  const char* what() const noexcept override { return "simulated crash"; }
  FaultPoint point;
};

class FaultInjector {
 public:
  void arm(FaultPoint point, FaultMode mode, int times = 1);
  void clear();
  void hit(FaultPoint point);

 private:
  struct Armed {
    FaultMode mode;
    int remaining;
  };
  std::mutex mutex_;
  std::map<FaultPoint, Armed> armed_;
};

class Marketplace {
 public:
  Marketplace(MarketplaceConfig config, Clock& clock, PaymentProvider& payments);
  /// Uses a SystemClock and a SimulatedPaymentProvider owned by the instance.
  explicit Marketplace(MarketplaceConfig config);
  ~Marketplace();

  Marketplace(const Marketplace&) = delete;
  Marketplace& operator=(const Marketplace&) = delete;

  void register_participant(const std::string& id, bool buyer, bool seller);
  std::optional<Participant> participant(std::string_view id) const;
  bool is_buyer(std::string_view id) const;
  bool is_seller(std::string_view id) const;

  /// Create DPP, store it, anchor (address, CPD) on the ledger, publish the
  /// listing. Only Strong-reuse products pass; ledger appends are retried
  /// up to ledger_attempts times.
  Listing add_product(const dpp::IfcLiteProduct& product, const std::string& seller,
                      Money price, const ccpo::ValueFields& values,
                      AddProductTimings* timings = nullptr);
  /// Same, taking the value fields carried by the product description.
  Listing add_product(const dpp::IfcLiteProduct& product, const std::string& seller,
                      Money price);

  /// Lawful price change: ledger first (ProductUpdated), then listing.
  Listing update_price(const std::string& listing_id, const std::string& seller, Money price);
  /// Lawful DPP revision: replaces the given sections, stores the new
  /// passport and re-anchors it with ProductUpdated.
  Listing revise_dpp(const std::string& listing_id, const std::string& seller,
                     const canonical::Json& sections);
  /// Lists a product again for its current owner (after a purchase).
  Listing relist(const std::string& product_id, const std::string& seller, Money price);
  void withdraw(const std::string& listing_id, const std::string& seller);

  ListingValidity listing_validity(std::string_view pid, std::string_view mid,
                                   std::string_view lid) const;
  SearchPage search(const SearchQuery& query) const;

  std::optional<Listing> find_listing(std::string_view listing_id) const;
  Listing get_listing(std::string_view listing_id) const;
  std::vector<Listing> listings() const;
  /// Active listing for the product if any, else the most recent one.
  std::optional<Listing> listing_for_product(std::string_view product_id) const;

  dpp::DigitalProductPassport retrieve_dpp(std::string_view listing_id) const;

  VerificationReport verify_product(std::string_view pid, std::string_view tid) const;
  VerificationReport verify_product(std::string_view pid, const TransactionId& tid) const;

  Order place_order(const std::string& buyer, const std::string& listing_id);
  PaymentReceipt pay(const std::string& order_id, const std::string& instrument);
  Order get_order(std::string_view order_id) const;
  std::vector<Order> orders() const;

  /// Global consistency scan; each string names one violated invariant.
  std::vector<std::string> check_invariants() const;
  std::size_t open_intents() const;

  ContentStore& cas() noexcept { return cas_; }
  const ContentStore& cas() const noexcept { return cas_; }
  Ledger& ledger() noexcept { return ledger_; }
  const Ledger& ledger() const noexcept { return ledger_; }
  FaultInjector& faults() noexcept { return faults_; }
  const MarketplaceConfig& config() const noexcept { return config_; }

 private:
  friend class TamperHooks;

  // Identifies the ledger record that commits an intent.
  struct Expectation {
    RecordKind kind = RecordKind::ProductAdded;
    std::optional<ContentAddress> ipfs_ref;
    Money price;
    std::string owner_id;
  };

  struct Intent {
    std::string id;
    std::string op;  // add | update | relist | pay
    std::string product_id;
    TransactionId ledger_mark;
    Expectation expected;
    std::optional<Listing> listing;
    std::optional<Order> order;
  };

  class ProductLock;

  std::shared_ptr<std::mutex> product_mutex(std::string_view product_id);
  void replay_journal();
  void recover_intent(const Intent& intent);
  std::optional<TransactionId> find_committed(const Intent& intent) const;
  void begin_intent(const Intent& intent);
  void commit_intent(const Intent& intent, const std::optional<Listing>& listing,
                     const std::optional<Order>& order);
  void abort_intent(const Intent& intent, const std::optional<Order>& order);
  TransactionId record_with_retries(const LedgerRecord& record, FaultPoint point);
  Listing anchor_listing_change(Listing listing, const std::string& op, RecordKind kind,
                                FaultPoint append_point, FaultPoint after_point);
  std::string next_id(char prefix);
  ListingValidity listing_validity_locked(std::string_view pid, std::string_view mid,
                                          std::string_view lid) const;
  void put_listing_locked(const Listing& l);

  MarketplaceConfig config_;
  std::unique_ptr<Clock> owned_clock_;
  std::unique_ptr<PaymentProvider> owned_payments_;
  Clock& clock_;
  PaymentProvider& payments_;
  ContentStore cas_;
  Ledger ledger_;
  Journal journal_;
  FaultInjector faults_;

  mutable std::shared_mutex state_mutex_;
  std::map<std::string, Participant, std::less<>> participants_;
  std::map<std::string, Listing, std::less<>> listings_;
  std::map<std::string, Order, std::less<>> orders_;
  std::map<std::string, Intent, std::less<>> intents_;
  std::map<char, unsigned long> counters_;

  std::mutex product_locks_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>, std::less<>> product_locks_;
};

}  // namespace market
