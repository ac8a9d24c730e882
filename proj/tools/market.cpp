// market: command-line front end. Commands run in-process against the data
// directory unless --server points at a running `market serve`.

#include <httplib.h>

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "market/api.hpp"
#include "market/config.hpp"
#include "market/error.hpp"
#include "market/fraud.hpp"
#include "market/load.hpp"
#include "market/server.hpp"
#include "fileio.hpp"

using market::canonical::Json;

namespace {

struct Globals {
  std::string config_file;
  std::string data_dir;
  std::string server;
};

market::ServiceConfig make_config(const Globals& g) {
  auto config = g.config_file.empty() ? market::ServiceConfig{} : market::load_config(g.config_file);
  market::apply_env_overrides(config);
  if (!g.data_dir.empty()) config.data_dir = g.data_dir;
  return config;
}

class Client {
 public:
  explicit Client(const Globals& g) : globals_(g) {}

  market::api::Response call(const std::string& method, const std::string& path,
                             std::map<std::string, std::string> query = {}, const Json& body = nullptr) {
    market::api::Request req{method, path, std::move(query), body.is_null() ? "" : body.dump()};
    if (!globals_.server.empty()) return remote(req);
    if (!router_) {
      config_ = make_config(globals_);
      market_ = std::make_unique<market::Marketplace>(config_.marketplace());
      router_ = std::make_unique<market::api::Router>(*market_, config_.data_dir / "api.log");
    }
    return router_->handle(req);
  }

 private:
  market::api::Response remote(const market::api::Request& req) {
    httplib::Client cli(globals_.server);
    httplib::Params params(req.query.begin(), req.query.end());
    httplib::Result res = req.method == "GET"
                              ? cli.Get(httplib::append_query_params(req.path, params))
                              : cli.Post(httplib::append_query_params(req.path, params), req.body,
                                         "application/json");
    if (!res) {
      throw market::Error(market::ErrorCode::IoError,
                          "cannot reach " + globals_.server + ": " + httplib::to_string(res.error()));
    }
    return {res->status, market::canonical::parse(res->body)};
  }

  const Globals& globals_;
  market::ServiceConfig config_;
  std::unique_ptr<market::Marketplace> market_;
  std::unique_ptr<market::api::Router> router_;
};

int emit(const market::api::Response& r) {
  std::cout << r.body.dump() << "\n";
  return r.status < 300 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Circular-economy marketplace with content-addressed DPPs and a hash-chained ledger"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "key = value config file");
  app.add_option("--data-dir", g.data_dir, "data directory (overrides config)");
  app.add_option("--server", g.server, "talk to a running server, e.g. http://127.0.0.1:8080");

  std::string id, seller, buyer, price, file, pid, tid, listing, instrument, only;
  bool as_buyer = false, as_seller = false;

  auto* reg = app.add_subcommand("register", "register a participant");
  reg->add_option("--id", id)->required();
  reg->add_flag("--buyer", as_buyer);
  reg->add_flag("--seller", as_seller);

  auto* add = app.add_subcommand("add", "add products from an IFC-lite file");
  add->add_option("--seller", seller)->required();
  add->add_option("--price", price)->required();
  add->add_option("--file", file, "IFC-lite JSON file")->required()->check(CLI::ExistingFile);
  add->add_option("--product-id", only, "add only this product");

  std::map<std::string, std::string> search_query;
  std::string category, material, location, text;
  int page = 1, page_size = 20;
  auto* search = app.add_subcommand("search", "search active listings");
  search->add_option("--category", category);
  search->add_option("--material", material);
  search->add_option("--location", location);
  search->add_option("--q", text, "free text");
  search->add_option("--page", page);
  search->add_option("--page-size", page_size);

  auto* verify = app.add_subcommand("verify", "verify a product against a ledger transaction");
  verify->add_option("--pid", pid)->required();
  verify->add_option("--tid", tid)->required();

  auto* buy = app.add_subcommand("buy", "order a listing and pay for it");
  buy->add_option("--buyer", buyer)->required();
  buy->add_option("--listing", listing)->required();
  buy->add_option("--instrument", instrument)->required();

  auto* ledger_verify = app.add_subcommand("ledger-verify", "re-verify the whole chain");

  auto* ccpo_eval = app.add_subcommand("ccpo-eval", "score the products in an IFC-lite file");
  ccpo_eval->add_option("--file", file)->required()->check(CLI::ExistingFile);

  std::string scenario = "all", work_dir;
  int honest = 0;
  auto* fraud_sim = app.add_subcommand("fraud-sim", "run the adversarial scenarios");
  fraud_sim->add_option("--scenario", scenario)
      ->check(CLI::IsMember({"seller", "buyer", "marketplace", "all"}));
  fraud_sim->add_option("--honest", honest, "also run N randomized honest runs");
  fraud_sim->add_option("--work-dir", work_dir, "fixture directory (default: <data-dir>/fraud-sim)");

  auto* serve = app.add_subcommand("serve", "serve the HTTP API");

  market::LoadOptions load_opts;
  auto* load = app.add_subcommand("load", "push N synthetic products through add_product");
  load->add_option("--n", load_opts.n)->required()->check(CLI::PositiveNumber);
  load->add_option("--parallelism", load_opts.parallelism)->check(CLI::PositiveNumber);
  load->add_option("--prefix", load_opts.id_prefix, "product id prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    Client client(g);
    if (*reg) {
      return emit(client.call("POST", "/participants", {},
                              Json{{"id", id}, {"buyer", as_buyer}, {"seller", as_seller}}));
    }
    if (*add) {
      const auto products = market::dpp::parse_ifc_lite(market::detail::read_file(file));
      int rc = 0;
      bool any = false;
      for (const auto& p : products) {
        if (!only.empty() && p.product_id != only) continue;
        any = true;
        rc |= emit(client.call("POST", "/products", {},
                               Json{{"seller", seller}, {"price", price},
                                    {"product", market::dpp::to_json(p)}}));
      }
      if (!any) throw market::Error(market::ErrorCode::NotFound, "no matching product in " + file);
      return rc;
    }
    if (*search) {
      if (!category.empty()) search_query["category"] = category;
      if (!material.empty()) search_query["material"] = material;
      if (!location.empty()) search_query["location"] = location;
      if (!text.empty()) search_query["q"] = text;
      search_query["page"] = std::to_string(page);
      search_query["page_size"] = std::to_string(page_size);
      return emit(client.call("GET", "/listings", search_query));
    }
    if (*verify) {
      const auto r = client.call("GET", "/verify", {{"pid", pid}, {"tid", tid}});
      emit(r);
      return r.status == 200 && r.body.value("message", "") == market::kVerificationSuccessful ? 0 : 1;
    }
    if (*buy) {
      const auto order = client.call("POST", "/orders", {}, Json{{"buyer", buyer}, {"listing_id", listing}});
      if (order.status >= 300) return emit(order);
      const auto oid = order.body.at("order_id").get<std::string>();
      return emit(client.call("POST", "/orders/" + oid + "/pay", {}, Json{{"instrument", instrument}}));
    }
    if (*ledger_verify) {
      if (!g.server.empty()) {
        const auto r = client.call("GET", "/ledger/verify");
        emit(r);
        return r.body.value("valid", false) ? 0 : 1;
      }
      const auto config = make_config(g);
      const auto report = market::Ledger::verify_file(config.data_dir / "ledger" / "chain.bin");
      std::cout << market::api::to_json(report).dump() << "\n";
      return report.valid ? 0 : 1;
    }
    if (*ccpo_eval) {
      const auto config = g.config_file.empty() ? market::ServiceConfig{} : market::load_config(g.config_file);
      int rc = 0;
      for (const auto& p : market::dpp::parse_ifc_lite(market::detail::read_file(file))) {
        if (!p.value_fields) {
          std::cout << Json{{"product_id", p.product_id}, {"error", "no value_fields"}}.dump() << "\n";
          rc = 1;
          continue;
        }
        auto j = market::ccpo::to_json(market::ccpo::assess(*p.value_fields, config.thresholds, config.weights));
        j["product_id"] = p.product_id;
        std::cout << j.dump() << "\n";
      }
      return rc;
    }
    if (*fraud_sim) {
      const auto config = make_config(g);
      const std::filesystem::path dir = work_dir.empty() ? config.data_dir / "fraud-sim" : std::filesystem::path(work_dir);
      auto outcomes = market::fraud::run_suite(scenario, dir);
      std::mt19937_64 rng(20250101);
      for (int i = 0; i < honest; ++i) {
        const auto run_dir = dir / ("honest-" + std::to_string(i));
        std::filesystem::remove_all(run_dir);
        market::fraud::Fixture f(run_dir);
        outcomes.push_back(market::fraud::run_honest_run(*f.market, rng, i));
      }
      bool ok = true;
      for (const auto& o : outcomes) {
        std::cout << market::fraud::to_json(o).dump() << "\n";
        ok = ok && o.as_expected();
      }
      return ok ? 0 : 1;
    }
    if (*serve) {
      market::run_server(make_config(g));
      return 0;
    }
    if (*load) {
      const auto report = market::run_load(make_config(g), load_opts);
      std::cout << market::to_json(report).dump() << "\n";
      return report.successes == load_opts.n && report.coherent() ? 0 : 1;
    }
  } catch (const market::Error& e) {
    std::cerr << "market: " << e.what() << "\n";
    std::cout << market::api::error_body(e.code(), e.what()).dump() << "\n";
    return 2;
  }
  return 0;
}
