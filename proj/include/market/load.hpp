#pragma once

#include <string>
#include <vector>

#include "market/config.hpp"
#include "market/marketplace.hpp"

namespace market {

struct LoadReport {
  std::size_t n_products = 0;
  std::size_t successes = 0;
  std::size_t failures = 0;
  // Summed per-stage wall clock over successful products.
  double dpp_creation_ms = 0.0;
  double cas_store_ms = 0.0;
  double ledger_record_ms = 0.0;
  double wall_ms = 0.0;
  std::vector<std::string> errors;
  // Post-run coherence.
  std::size_t listings = 0;
  std::size_t ledger_adds = 0;
  std::size_t anchored_dpps = 0;
  bool chain_valid = false;

  bool coherent() const {
    return chain_valid && listings == ledger_adds && ledger_adds == anchored_dpps;
  }
};

canonical::Json to_json(const LoadReport& r);

/// Synthetic Strong-reuse product number i (deterministic).
dpp::IfcLiteProduct synthetic_product(std::size_t i, const std::string& id_prefix);

struct LoadOptions {
  std::size_t n = 20;
  int parallelism = 4;
  std::string id_prefix = "LOAD";
  std::string seller = "load-seller";
};

LoadReport run_load(Marketplace& market, const LoadOptions& options);
/// Opens a marketplace on config.data_dir for the duration of the run.
LoadReport run_load(const ServiceConfig& config, const LoadOptions& options);

}  // namespace market
