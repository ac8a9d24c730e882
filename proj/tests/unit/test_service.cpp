#include <httplib.h>
#include <sys/wait.h>

#include <cstdlib>
#include <thread>

#include "fileio.hpp"
#include "market/api.hpp"
#include "market/config.hpp"
#include "market/error.hpp"
#include "market/load.hpp"
#include "market/server.hpp"
#include "support.hpp"

using namespace market;
using canonical::Json;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

api::Response call(api::Router& r, const std::string& method, const std::string& path,
                   const Json& body = nullptr, std::map<std::string, std::string> query = {}) {
  return r.handle({method, path, std::move(query), body.is_null() ? "" : body.dump()});
}

Json product_body(const std::string& id, double condition = 0.9) {
  auto p = dpp::to_json(test::product(id));
  p["value_fields"]["condition_score"] = condition;
  return Json{{"seller", "S"}, {"price", "42.00"}, {"product", p}};
}

}  // namespace

TEST_CASE("config parses key = value text") {
  const auto c = parse_config(R"(
# marketplace
data_dir = /tmp/m
port = 9090
theta_strong = 0.8
theta_weak = 0.5
weight_condition = 0.5
weight_lifecycle = 0.5
weight_damage = 0.2
currency = EUR
ledger_batch_size = 4
)");
  CHECK(c.data_dir == "/tmp/m");
  CHECK(c.port == 9090);
  CHECK(c.thresholds.strong == 0.8);
  CHECK(c.weights.damage_penalty == 0.2);
  CHECK(c.currency == "EUR");
  CHECK(c.ledger_batch_size == 4);
  CHECK(code_of([] { parse_config("port = 80"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("colour = blue"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("theta_weak = 0.9"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("weight_damage = -1"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("just words"); }) == ErrorCode::ConfigError);
}

TEST_CASE("environment overrides port and data dir") {
  ServiceConfig c;
  setenv("MARKET_PORT", "12345", 1);
  setenv("MARKET_DATA_DIR", "/tmp/elsewhere", 1);
  apply_env_overrides(c);
  unsetenv("MARKET_PORT");
  unsetenv("MARKET_DATA_DIR");
  CHECK(c.port == 12345);
  CHECK(c.data_dir == "/tmp/elsewhere");
}

TEST_CASE("router covers the marketplace API end to end") {
  test::World w;
  api::Router r(w.m(), w.dir / "api.log");

  CHECK(call(r, "GET", "/health").body.at("status") == "ok");
  CHECK(call(r, "POST", "/participants", Json{{"id", "S"}, {"roles", {"seller"}}}).status == 201);
  CHECK(call(r, "POST", "/participants", Json{{"id", "B"}, {"buyer", true}}).status == 201);

  auto res = call(r, "POST", "/products", product_body("P1"));
  REQUIRE(res.status == 201);
  const auto lid = res.body.at("listing").at("listing_id").get<std::string>();
  const auto tid = res.body.at("listing").at("anchor_tid").get<std::string>();
  CHECK(res.body.at("assessment").at("category") == "strong");

  res = call(r, "POST", "/products", product_body("P1"));
  CHECK(res.status == 409);
  CHECK(res.body.at("code") == "duplicate_product");

  res = call(r, "POST", "/products", product_body("WEAK", 0.5));
  CHECK(res.status == 422);
  CHECK(res.body.at("code") == "not_strong_reuse");
  CHECK(res.body.at("details").at("disposition") == "Repair");

  res = call(r, "GET", "/listings", nullptr, {{"material", "steel"}, {"page_size", "5"}});
  CHECK(res.status == 200);
  CHECK(res.body.at("total") == 1);
  CHECK(call(r, "GET", "/listings", nullptr, {{"page", "0"}}).body.at("code") == "invalid_pagination");

  res = call(r, "GET", "/listings/" + lid + "/dpp");
  CHECK(res.status == 200);
  CHECK(res.body.at("dpp").at("product_id") == "P1");
  CHECK(call(r, "GET", "/listings/L999/dpp").status == 404);

  res = call(r, "GET", "/verify", nullptr, {{"pid", "P1"}, {"tid", tid}});
  CHECK(res.body.at("message") == "Verification successful.");
  CHECK(call(r, "GET", "/verify").status == 400);

  res = call(r, "POST", "/orders", Json{{"buyer", "B"}, {"listing_id", lid}});
  REQUIRE(res.status == 201);
  const auto oid = res.body.at("order_id").get<std::string>();
  res = call(r, "POST", "/orders/" + oid + "/pay", Json{{"instrument", "FAIL-card"}});
  CHECK(res.status == 402);
  CHECK(res.body.at("message") == "Payment failed.");

  res = call(r, "POST", "/orders", Json{{"buyer", "B"}, {"listing_id", lid}});
  const auto oid2 = res.body.at("order_id").get<std::string>();
  res = call(r, "POST", "/orders/" + oid2 + "/pay", Json{{"instrument", "OK-card"}});
  CHECK(res.status == 200);
  CHECK(res.body.at("message") == "Payment successful.");
  const auto otid = res.body.at("ownership_tid").get<std::string>();

  res = call(r, "GET", "/ledger/records/" + otid);
  CHECK(res.body.at("record").at("kind") == "OwnershipTransferred");
  CHECK(res.body.at("record").at("owner_id") == "B");
  CHECK(call(r, "GET", "/ledger/records/99:0").status == 404);
  CHECK(call(r, "GET", "/ledger/verify").body.at("valid") == true);

  CHECK(call(r, "POST", "/products", nullptr).body.at("code") == "malformed_input");
  CHECK(call(r, "GET", "/nope").status == 404);

  const auto log = detail::read_file(w.dir / "api.log");
  CHECK(std::count(log.begin(), log.end(), '\n') >= 18);
  CHECK(canonical::parse(log.substr(0, log.find('\n'))).contains("duration_ms"));
}

TEST_CASE("HTTP server answers health and rejects a busy port") {
  test::World w;
  ServiceConfig cfg;
  cfg.data_dir = w.dir.path();
  cfg.port = 0;
  HttpServer server(w.m(), cfg);
  const int port = server.bind();
  std::thread t([&] { server.listen(); });

  httplib::Client cli("127.0.0.1", port);
  httplib::Result res;
  for (int i = 0; i < 50 && !res; ++i) {
    res = cli.Get("/health");
    if (!res) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(canonical::parse(res->body).at("status") == "ok");
  res = cli.Post("/participants", R"({"id":"S","seller":true})", "application/json");
  CHECK(res->status == 201);

  ServiceConfig busy = cfg;
  busy.port = port;
  HttpServer second(w.m(), busy);
  CHECK(code_of([&] { second.bind(); }) == ErrorCode::IoError);

  server.stop();
  t.join();
}

TEST_CASE("load harness: counts, coherence and duplicate gate") {
  test::World w;
  LoadOptions opts;
  opts.n = 20;
  const auto report = run_load(w.m(), opts);
  CHECK(report.successes == 20);
  CHECK(report.failures == 0);
  CHECK(report.successes + report.failures == report.n_products);
  CHECK(report.ledger_adds == 20);
  CHECK(w.m().cas().size() == 20);
  CHECK(report.coherent());

  LoadOptions one;
  one.n = 1;
  one.id_prefix = "ONE";
  CHECK(run_load(w.m(), one).successes == 1);
  const auto again = run_load(w.m(), one);
  CHECK(again.successes == 0);
  CHECK(again.failures == 1);
  CHECK(again.errors.front().find("already") != std::string::npos);
}

TEST_CASE("CLI round trip against a data directory") {
  const char* bin = std::getenv("MARKET_BIN");
  if (!bin) {
    MESSAGE("MARKET_BIN not set; skipping");
    return;
  }
  test::TempDir dir;
  const auto run = [&](const std::string& args) {
    const auto cmd = std::string(bin) + " --data-dir " + dir.path().string() + " " + args + " > " +
                     (dir / "out.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  const auto fixture = test::fixture("products.ifc.json").string();
  CHECK(run("register --id S --seller") == 0);
  CHECK(run("register --id B --buyer") == 0);
  CHECK(run("add --seller S --price 120.00 --file " + fixture + " --product-id DOOR-001") == 0);
  CHECK(run("add --seller S --price 80 --file " + fixture + " --product-id BEAM-002") == 1);
  CHECK(detail::read_file(dir / "out.txt").find("not_strong_reuse") != std::string::npos);
  CHECK(run("search --material timber") == 0);
  CHECK(detail::read_file(dir / "out.txt").find("DOOR-001") != std::string::npos);
  CHECK(run("verify --pid DOOR-001 --tid 1:0") == 0);
  CHECK(detail::read_file(dir / "out.txt").find("Verification successful.") != std::string::npos);
  CHECK(run("buy --buyer B --listing L000001 --instrument OK-test") == 0);
  CHECK(run("ledger-verify") == 0);
  CHECK(run("ccpo-eval --file " + fixture) == 1);  // MIN-004 has no value fields
  const auto eval = detail::read_file(dir / "out.txt");
  CHECK(eval.find("\"category\":\"weak\"") != std::string::npos);
  CHECK(eval.find("RecycleOrLandfill") != std::string::npos);
  CHECK(run("fraud-sim --scenario marketplace") == 0);
  CHECK(run("load --n 5") == 0);
}
