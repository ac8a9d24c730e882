#pragma once

#include <doctest.h>
#include <stdlib.h>

#include <filesystem>
#include <memory>
#include <string>

#include "market/marketplace.hpp"

namespace test {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "market-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

inline market::Timestamp t0() { return market::Timestamp::parse("2025-01-01T09:00:00.000Z"); }

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(MARKET_FIXTURE_DIR) / name;
}

// A marketplace over a temp dir with a manual clock and the payment
// simulator; reopen() simulates a process restart on the same data.
struct World {
  explicit World(std::size_t batch = 1) : batch_size(batch) { reopen(); }

  void reopen() {
    market.reset();
    market::MarketplaceConfig config;
    config.data_dir = dir.path();
    config.fsync = false;
    config.ledger_batch_size = batch_size;
    market = std::make_unique<market::Marketplace>(config, clock, payments);
  }

  market::Marketplace& m() { return *market; }

  TempDir dir;
  std::size_t batch_size;
  market::ManualClock clock{t0()};
  market::SimulatedPaymentProvider payments;
  std::unique_ptr<market::Marketplace> market;
};

inline market::ccpo::ValueFields strong_values() {
  market::ccpo::ValueFields v;
  v.material = "steel";
  v.condition_score = 0.9;
  v.age_years = 5;
  v.expected_lifecycle_years = 50;
  v.usage_history = "office";
  return v;
}

inline market::dpp::IfcLiteProduct product(const std::string& id, const std::string& material = "steel",
                                          const std::string& category = "beam",
                                          const std::string& location = "Leeds") {
  market::dpp::IfcLiteProduct p;
  p.product_id = id;
  p.name = "Product " + id;
  p.material = material;
  p.category = category;
  p.location = location;
  p.manufacturer = "Acme";
  p.year_installed = 2010;
  p.condition_notes = "good";
  p.compliance_tags = {"CE"};
  p.value_fields = strong_values();
  p.value_fields->material = material;
  return p;
}

inline void parties(market::Marketplace& m) {
  m.register_participant("S", false, true);
  m.register_participant("B", true, false);
  m.register_participant("C", true, true);
}

}  // namespace test
