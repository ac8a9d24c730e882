#include "market/load.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <set>
#include <thread>

#include "market/error.hpp"

using market::canonical::Json;

namespace market {

Json to_json(const LoadReport& r) {
  Json errors = Json::array();
  for (const auto& e : r.errors) errors.push_back(e);
  return Json{{"n_products", r.n_products},
              {"successes", r.successes},
              {"failures", r.failures},
              {"stages_ms",
               {{"dpp_creation", r.dpp_creation_ms},
                {"cas_store", r.cas_store_ms},
                {"ledger_record", r.ledger_record_ms}}},
              {"wall_ms", r.wall_ms},
              {"errors", std::move(errors)},
              {"listings", r.listings},
              {"ledger_adds", r.ledger_adds},
              {"anchored_dpps", r.anchored_dpps},
              {"chain_valid", r.chain_valid},
              {"coherent", r.coherent()}};
}

dpp::IfcLiteProduct synthetic_product(std::size_t i, const std::string& id_prefix) {
  static constexpr const char* kMaterials[] = {"steel", "timber", "glass", "aluminium", "brick"};
  static constexpr const char* kCategories[] = {"beam", "door", "window", "panel", "column"};
  static constexpr const char* kLocations[] = {"Leeds", "Bristol", "Glasgow", "Cardiff"};
  char id[64];
  std::snprintf(id, sizeof id, "%s-%06zu", id_prefix.c_str(), i + 1);

  dpp::IfcLiteProduct p;
  p.product_id = id;
  p.material = kMaterials[i % 5];
  p.category = kCategories[(i / 5) % 5];
  p.location = kLocations[i % 4];
  p.name = std::string("Reclaimed ") + p.material + " " + p.category + " " + std::to_string(i + 1);
  p.manufacturer = "Synthetic Works";
  p.dimensions["length"] = {1000.0 + static_cast<double>(i % 17) * 10.0, "mm"};
  p.dimensions["width"] = {200.0, "mm"};
  p.year_installed = 2000 + static_cast<int>(i % 15);
  p.condition_notes = "surface wear only";
  p.compliance_tags = {"CE"};

  ccpo::ValueFields v;
  v.material = p.material;
  v.condition_score = 0.9 + 0.01 * static_cast<double>(i % 10);
  v.age_years = static_cast<double>(i % 5);
  v.expected_lifecycle_years = 60.0;
  p.value_fields = v;
  return p;
}

LoadReport run_load(Marketplace& market, const LoadOptions& options) {
  if (options.n == 0) throw Error(ErrorCode::ValidationError, "n must be positive");
  if (options.parallelism < 1) throw Error(ErrorCode::ValidationError, "parallelism must be positive");
  market.register_participant(options.seller, false, true);

  LoadReport report;
  report.n_products = options.n;
  std::mutex mutex;
  std::atomic<std::size_t> next{0};

  const auto start = std::chrono::steady_clock::now();
  auto worker = [&] {
    for (std::size_t i = next++; i < options.n; i = next++) {
      const auto product = synthetic_product(i, options.id_prefix);
      const auto price = Money::from_cents(static_cast<std::int64_t>(5000 + (i % 50) * 125));
      AddProductTimings t;
      try {
        market.add_product(product, options.seller, price, *product.value_fields, &t);
        std::lock_guard lock(mutex);
        ++report.successes;
        report.dpp_creation_ms += t.dpp_creation_ms;
        report.cas_store_ms += t.cas_store_ms;
        report.ledger_record_ms += t.ledger_record_ms;
      } catch (const Error& e) {
        std::lock_guard lock(mutex);
        ++report.failures;
        report.errors.push_back(product.product_id + ": " + e.what());
      }
    }
  };
  std::vector<std::thread> threads;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(options.parallelism), options.n);
  for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  market.ledger().flush();
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  const auto listings = market.listings();
  std::set<ContentAddress> anchored;
  for (const auto& l : listings) {
    if (market.cas().contains(l.dpp_address)) anchored.insert(l.dpp_address);
  }
  report.listings = listings.size();
  report.anchored_dpps = anchored.size();
  report.ledger_adds = market.ledger().count(RecordKind::ProductAdded);
  report.chain_valid = market.ledger().verify_chain().valid;
  return report;
}

LoadReport run_load(const ServiceConfig& config, const LoadOptions& options) {
  Marketplace market(config.marketplace());
  return run_load(market, options);
}

}  // namespace market
