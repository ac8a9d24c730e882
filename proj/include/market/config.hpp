#pragma once

#include <filesystem>
#include <string>

#include "market/ccpo.hpp"
#include "market/marketplace.hpp"

namespace market {

struct ServiceConfig {
  std::filesystem::path data_dir = "./market-data";
  int port = 8080;
  ccpo::ReuseThresholds thresholds;
  ccpo::ScoreWeights weights;
  std::string currency = "GBP";
  std::size_t ledger_batch_size = 1;
  bool fsync = true;
  /// Optional directory of static assets served at "/".
  std::filesystem::path static_dir;

  MarketplaceConfig marketplace() const;
};

void validate(const ServiceConfig& config);

/// Parses "key = value" lines; '#' starts a comment. Unknown keys are errors.
ServiceConfig parse_config(std::string_view text);
ServiceConfig load_config(const std::filesystem::path& path);
/// Applies MARKET_PORT and MARKET_DATA_DIR from the environment.
void apply_env_overrides(ServiceConfig& config);

}  // namespace market
