#include "market/api.hpp"

#include <charconv>
#include <chrono>
#include <vector>

#include "fileio.hpp"
#include "market/error.hpp"

using market::canonical::Json;

namespace market::api {

namespace {

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    if (path.front() == '/') {
      path.remove_prefix(1);
      continue;
    }
    const auto slash = path.find('/');
    parts.push_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash);
  }
  return parts;
}

Json parse_body(const Request& r) {
  if (r.body.empty()) throw Error(ErrorCode::MalformedInput, "request body required");
  auto j = canonical::parse(r.body);
  if (!j.is_object()) throw Error(ErrorCode::MalformedInput, "request body must be an object");
  return j;
}

std::string need_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw Error(ErrorCode::ValidationError, std::string("field '") + key + "' must be a non-empty string");
  }
  return it->get<std::string>();
}

Money need_money(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::InvalidPrice, std::string("field '") + key + "' missing");
  if (it->is_string()) return Money::parse(it->get<std::string>());
  if (it->is_number_integer() && it->get<long long>() >= 0) {
    return Money::from_cents(it->get<long long>() * 100);
  }
  throw Error(ErrorCode::InvalidPrice, std::string("field '") + key + "' must be a decimal string");
}

int query_int(const Request& r, const char* key, int fallback) {
  auto it = r.query.find(key);
  if (it == r.query.end()) return fallback;
  int v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidPagination, std::string(key) + " must be an integer");
  }
  return v;
}

Response not_found(const Request& r) {
  return {404, error_body(ErrorCode::NotFound, "no route for " + r.method + " " + r.path)};
}

}  // namespace

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::UnknownProduct:
      return 404;
    case ErrorCode::DuplicateProduct:
    case ErrorCode::ListingNotActive:
    case ErrorCode::OrderNotPayable:
    case ErrorCode::VerificationFailed:
    case ErrorCode::IllegalTransition:
      return 409;
    case ErrorCode::NotStrongReuse:
      return 422;
    case ErrorCode::LedgerUnavailable:
      return 503;
    case ErrorCode::IoError:
    case ErrorCode::IntegrityFailure:
      return 500;
    default:
      return 400;
  }
}

Json error_body(ErrorCode code, std::string_view message, Json details) {
  return Json{{"code", std::string(to_string(code))},
              {"message", std::string(message)},
              {"details", std::move(details)}};
}

Json to_json(const ChainReport& r) {
  return Json{{"valid", r.valid},
              {"corrupt_height", r.corrupt_height ? Json(*r.corrupt_height) : Json(nullptr)},
              {"reason", r.reason},
              {"blocks_checked", r.blocks_checked}};
}

Router::Router(Marketplace& market, std::filesystem::path log_path)
    : market_(market), log_path_(std::move(log_path)) {}

Response Router::handle(const Request& request) {
  const auto start = std::chrono::steady_clock::now();
  Response response;
  try {
    response = dispatch(request);
  } catch (const Error& e) {
    response = {http_status(e.code()), error_body(e.code(), e.what())};
  } catch (const Json::exception& e) {
    response = {400, error_body(ErrorCode::MalformedInput, e.what())};
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  log_call(request, response.status, ms);
  return response;
}

void Router::log_call(const Request& request, int status, double ms) {
  if (log_path_.empty()) return;
  const Json line{{"at", SystemClock{}.now().rfc3339()},
                  {"method", request.method},
                  {"path", request.path},
                  {"status", status},
                  {"duration_ms", ms}};
  std::lock_guard lock(log_mutex_);
  try {
    detail::append_file(log_path_, canonical::dump(line) + "\n", false);
  } catch (const Error&) {
    // Logging must never fail a request.
  }
}

Response Router::dispatch(const Request& r) {
  const auto parts = split_path(r.path);
  const bool get = r.method == "GET";
  const bool post = r.method == "POST";

  if (parts.size() == 1 && parts[0] == "health" && get) {
    return {200, Json{{"status", "ok"}}};
  }

  if (parts.size() == 1 && parts[0] == "participants" && post) {
    const auto body = parse_body(r);
    const auto id = need_string(body, "id");
    bool buyer = body.value("buyer", false);
    bool seller = body.value("seller", false);
    if (auto roles = body.find("roles"); roles != body.end() && roles->is_array()) {
      for (const auto& role : *roles) {
        if (role == "buyer") buyer = true;
        else if (role == "seller") seller = true;
        else throw Error(ErrorCode::ValidationError, "unknown role " + role.dump());
      }
    }
    market_.register_participant(id, buyer, seller);
    const auto p = *market_.participant(id);
    return {201, Json{{"id", p.id}, {"buyer", p.buyer}, {"seller", p.seller}}};
  }

  if (parts.size() == 1 && parts[0] == "products" && post) {
    const auto body = parse_body(r);
    const auto seller = need_string(body, "seller");
    const auto price = need_money(body, "price");
    if (!body.contains("product")) throw Error(ErrorCode::MalformedInput, "field 'product' missing");
    auto product = dpp::ifc_product_from_json(body.at("product"));
    if (body.contains("value_fields")) {
      product.value_fields = ccpo::value_fields_from_json(body.at("value_fields"));
    }
    if (!product.value_fields) {
      throw Error(ErrorCode::InvalidValueFields, "value_fields are required");
    }
    const auto& cfg = market_.config();
    const auto assessment = ccpo::assess(*product.value_fields, cfg.thresholds, cfg.weights);
    try {
      const auto listing = market_.add_product(product, seller, price, *product.value_fields);
      return {201, Json{{"listing", to_json(listing)}, {"assessment", ccpo::to_json(assessment)}}};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotStrongReuse) throw;
      return {422, error_body(e.code(), e.what(), ccpo::to_json(assessment))};
    }
  }

  if (parts.size() == 1 && parts[0] == "listings" && get) {
    SearchQuery q;
    for (const char* facet : {"category", "material", "location"}) {
      if (auto it = r.query.find(facet); it != r.query.end() && !it->second.empty()) {
        q.facets[facet] = it->second;
      }
    }
    if (auto it = r.query.find("q"); it != r.query.end() && !it->second.empty()) q.text = it->second;
    q.page = query_int(r, "page", 1);
    q.page_size = query_int(r, "page_size", 20);
    const auto page = market_.search(q);
    Json listings = Json::array();
    for (const auto& l : page.listings) listings.push_back(to_json(l));
    return {200, Json{{"listings", std::move(listings)},
                      {"total", page.total},
                      {"page", page.page},
                      {"page_size", page.page_size}}};
  }

  if (parts.size() >= 2 && parts[0] == "listings") {
    const std::string lid(parts[1]);
    if (parts.size() == 2 && get) return {200, to_json(market_.get_listing(lid))};
    if (parts.size() == 3 && parts[2] == "dpp" && get) {
      const auto listing = market_.get_listing(lid);
      const auto passport = dpp::parse(market_.cas().retrieve(listing.dpp_address));
      return {200, Json{{"listing_id", lid},
                        {"address", listing.dpp_address.hex()},
                        {"dpp", dpp::to_json(passport)}}};
    }
    if (parts.size() == 3 && parts[2] == "price" && post) {
      const auto body = parse_body(r);
      const auto listing =
          market_.update_price(lid, need_string(body, "seller"), need_money(body, "price"));
      return {200, to_json(listing)};
    }
  }

  if (parts.size() == 1 && parts[0] == "verify" && get) {
    auto pid = r.query.find("pid");
    auto tid = r.query.find("tid");
    if (pid == r.query.end() || pid->second.empty() || tid == r.query.end() || tid->second.empty()) {
      throw Error(ErrorCode::ValidationError, "query parameters pid and tid are required");
    }
    return {200, to_json(market_.verify_product(pid->second, std::string_view(tid->second)))};
  }

  if (parts.size() == 1 && parts[0] == "orders" && post) {
    const auto body = parse_body(r);
    const auto order = market_.place_order(need_string(body, "buyer"), need_string(body, "listing_id"));
    return {201, to_json(order)};
  }

  if (parts.size() >= 2 && parts[0] == "orders") {
    const std::string oid(parts[1]);
    if (parts.size() == 2 && get) return {200, to_json(market_.get_order(oid))};
    if (parts.size() == 3 && parts[2] == "pay" && post) {
      const auto body = parse_body(r);
      const auto receipt = market_.pay(oid, need_string(body, "instrument"));
      return {receipt.t_status == 1 ? 200 : 402, to_json(receipt)};
    }
  }

  if (parts.size() == 3 && parts[0] == "ledger" && parts[1] == "records" && get) {
    const auto tid = TransactionId::parse(parts[2]);
    return {200, Json{{"tid", tid.str()}, {"record", to_json(market_.ledger().get_record(tid))}}};
  }

  if (parts.size() == 2 && parts[0] == "ledger" && parts[1] == "verify" && get) {
    return {200, to_json(market_.ledger().verify_chain())};
  }

  return not_found(r);
}

}  // namespace market::api
