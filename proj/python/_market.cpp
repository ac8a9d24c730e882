// Python bindings. Results cross the boundary as canonical JSON and are
// decoded with the stdlib json module, so callers get plain dicts/lists.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "market/api.hpp"
#include "market/ccpo.hpp"
#include "market/config.hpp"
#include "market/error.hpp"
#include "market/load.hpp"
#include "market/marketplace.hpp"
#ifdef MARKET_TAMPER_HOOKS
#include "market/fraud.hpp"
#endif

namespace py = pybind11;
using namespace market;
using canonical::Json;

namespace {

py::object to_py(const Json& j) {
  return py::module_::import("json").attr("loads")(canonical::dump(j));
}

Json from_py(const py::object& o) {
  return canonical::parse(py::cast<std::string>(py::module_::import("json").attr("dumps")(o)));
}

class Engine {
 public:
  explicit Engine(ServiceConfig config) : config_(std::move(config)) {
    validate(config_);
    market_ = std::make_unique<Marketplace>(config_.marketplace());
    router_ = std::make_unique<api::Router>(*market_, config_.data_dir / "api.log");
  }

  Marketplace& m() { return *market_; }

  py::tuple request(const std::string& method, const std::string& path, const py::object& body,
                    const std::map<std::string, std::string>& query) {
    api::Request r{method, path, query, body.is_none() ? "" : canonical::dump(from_py(body))};
    api::Response res;
    {
      py::gil_scoped_release release;
      res = router_->handle(r);
    }
    return py::make_tuple(res.status, to_py(res.body));
  }

  py::object add_product(const py::object& product, const std::string& seller, const std::string& price) {
    const auto p = dpp::ifc_product_from_json(from_py(product));
    Listing l;
    {
      py::gil_scoped_release release;
      l = market_->add_product(p, seller, Money::parse(price));
    }
    return to_py(to_json(l));
  }

  py::object search(const std::map<std::string, std::string>& facets, std::optional<std::string> text, int page,
                    int page_size) {
    SearchQuery q{facets, std::move(text), page, page_size};
    const auto res = market_->search(q);
    Json out{{"total", res.total}, {"page", res.page}, {"page_size", res.page_size}, {"listings", Json::array()}};
    for (const auto& l : res.listings) out["listings"].push_back(to_json(l));
    return to_py(out);
  }

 private:
  ServiceConfig config_;
  std::unique_ptr<Marketplace> market_;
  std::unique_ptr<api::Router> router_;
};

ServiceConfig make_config(const std::filesystem::path& data_dir, std::optional<std::filesystem::path> config_path,
                          bool fsync) {
  ServiceConfig c = config_path ? load_config(*config_path) : ServiceConfig{};
  c.data_dir = data_dir;
  c.fsync = fsync;
  return c;
}

}  // namespace

PYBIND11_MODULE(_market, mod) {
  mod.doc() = "Circular construction marketplace engine";

  static py::exception<Error> market_error(mod, "MarketError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(market_error)(std::string(to_string(e.code())) + ": " + e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(market_error.ptr(), exc.ptr());
    }
  });

  py::class_<Engine>(mod, "Engine")
      .def(py::init([](const std::filesystem::path& data_dir, std::optional<std::filesystem::path> config,
                       bool fsync) { return std::make_unique<Engine>(make_config(data_dir, config, fsync)); }),
           py::arg("data_dir"), py::arg("config") = py::none(), py::arg("fsync") = true)
      .def("request", &Engine::request, py::arg("method"), py::arg("path"), py::arg("body") = py::none(),
           py::arg("query") = std::map<std::string, std::string>{},
           "Dispatch one JSON API call; returns (status, body).")
      .def(
          "register_participant",
          [](Engine& e, const std::string& id, bool buyer, bool seller) { e.m().register_participant(id, buyer, seller); },
          py::arg("id"), py::arg("buyer") = false, py::arg("seller") = false)
      .def("add_product", &Engine::add_product, py::arg("product"), py::arg("seller"), py::arg("price"))
      .def("search", &Engine::search, py::arg("facets") = std::map<std::string, std::string>{},
           py::arg("text") = py::none(), py::arg("page") = 1, py::arg("page_size") = 20)
      .def("get_listing", [](Engine& e, const std::string& lid) { return to_py(to_json(e.m().get_listing(lid))); })
      .def("retrieve_dpp",
           [](Engine& e, const std::string& lid) { return to_py(dpp::to_json(e.m().retrieve_dpp(lid))); })
      .def("verify_product",
           [](Engine& e, const std::string& pid, const std::string& tid) {
             return to_py(to_json(e.m().verify_product(pid, tid)));
           })
      .def("place_order",
           [](Engine& e, const std::string& buyer, const std::string& lid) {
             return to_py(to_json(e.m().place_order(buyer, lid)));
           })
      .def("pay",
           [](Engine& e, const std::string& oid, const std::string& instrument) {
             return to_py(to_json(e.m().pay(oid, instrument)));
           })
      .def("verify_chain", [](Engine& e) { return to_py(api::to_json(e.m().ledger().verify_chain())); })
      .def("check_invariants", [](Engine& e) { return e.m().check_invariants(); })
      .def("flush", [](Engine& e) { e.m().ledger().flush(); });

  mod.def(
      "assess",
      [](const py::object& values) { return to_py(ccpo::to_json(ccpo::assess(ccpo::value_fields_from_json(from_py(values))))); },
      py::arg("value_fields"));
  mod.def(
      "run_load",
      [](const std::filesystem::path& data_dir, std::size_t n, int parallelism) {
        ServiceConfig c;
        c.data_dir = data_dir;
        LoadOptions o;
        o.n = n;
        o.parallelism = parallelism;
        LoadReport r;
        {
          py::gil_scoped_release release;
          r = run_load(c, o);
        }
        return to_py(to_json(r));
      },
      py::arg("data_dir"), py::arg("n") = 20, py::arg("parallelism") = 4);
  mod.def(
      "verify_chain_file",
      [](const std::filesystem::path& chain) { return to_py(api::to_json(Ledger::verify_file(chain))); },
      py::arg("chain_file"));
#ifdef MARKET_TAMPER_HOOKS
  mod.def(
      "fraud_suite",
      [](const std::string& scenario, const std::filesystem::path& work_dir) {
        std::vector<fraud::ScenarioOutcome> outcomes;
        {
          py::gil_scoped_release release;
          outcomes = fraud::run_suite(scenario, work_dir);
        }
        Json out = Json::array();
        for (const auto& o : outcomes) out.push_back(fraud::to_json(o));
        return to_py(out);
      },
      py::arg("scenario"), py::arg("work_dir"));
#endif
}
