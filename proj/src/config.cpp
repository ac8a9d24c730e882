#include "market/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include "fileio.hpp"
#include "market/error.hpp"

namespace market {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw Error(ErrorCode::ConfigError, std::string(key) + ": not a number '" + std::string(v) + "'");
  }
  return out;
}

long to_long(std::string_view key, std::string_view v) {
  long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw Error(ErrorCode::ConfigError, std::string(key) + ": not an integer '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::ConfigError, std::string(key) + ": not a boolean '" + std::string(v) + "'");
}

}  // namespace

MarketplaceConfig ServiceConfig::marketplace() const {
  MarketplaceConfig m;
  m.data_dir = data_dir;
  m.thresholds = thresholds;
  m.weights = weights;
  m.currency = currency;
  m.ledger_batch_size = ledger_batch_size;
  m.fsync = fsync;
  return m;
}

void validate(const ServiceConfig& c) {
  if (c.port < 1024 || c.port > 65535) {
    throw Error(ErrorCode::ConfigError, "port must be within [1024, 65535]");
  }
  if (c.data_dir.empty()) throw Error(ErrorCode::ConfigError, "data_dir must be set");
  if (c.ledger_batch_size < 1) throw Error(ErrorCode::ConfigError, "ledger_batch_size must be positive");
  if (c.currency.size() != 3 ||
      !std::all_of(c.currency.begin(), c.currency.end(), [](char ch) { return ch >= 'A' && ch <= 'Z'; })) {
    throw Error(ErrorCode::ConfigError, "currency must be a three-letter ISO-4217 code");
  }
  ccpo::validate(c.thresholds);
  ccpo::validate(c.weights);
}

ServiceConfig parse_config(std::string_view text) {
  ServiceConfig c;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "data_dir") c.data_dir = std::string(value);
    else if (key == "port") c.port = static_cast<int>(to_long(key, value));
    else if (key == "theta_strong") c.thresholds.strong = to_double(key, value);
    else if (key == "theta_weak") c.thresholds.weak = to_double(key, value);
    else if (key == "weight_condition") c.weights.condition = to_double(key, value);
    else if (key == "weight_lifecycle") c.weights.lifecycle = to_double(key, value);
    else if (key == "weight_damage") c.weights.damage_penalty = to_double(key, value);
    else if (key == "currency") c.currency = std::string(value);
    else if (key == "ledger_batch_size") {
      const auto n = to_long(key, value);
      if (n < 1) throw Error(ErrorCode::ConfigError, "ledger_batch_size must be positive");
      c.ledger_batch_size = static_cast<std::size_t>(n);
    } else if (key == "fsync") c.fsync = to_bool(key, value);
    else if (key == "static_dir") c.static_dir = std::string(value);
    else {
      throw Error(ErrorCode::ConfigError, "unknown config key '" + std::string(key) + "'");
    }
  }
  validate(c);
  return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(detail::read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, "cannot read config '" + path.string() + "': " + e.what());
  }
}

void apply_env_overrides(ServiceConfig& c) {
  if (const char* port = std::getenv("MARKET_PORT"); port && *port) {
    c.port = static_cast<int>(to_long("MARKET_PORT", port));
  }
  if (const char* dir = std::getenv("MARKET_DATA_DIR"); dir && *dir) c.data_dir = dir;
  validate(c);
}

}  // namespace market
