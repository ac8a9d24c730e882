#pragma once

// Transport-neutral request router for the marketplace JSON API. The HTTP
// server and the in-process CLI both dispatch through it.

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>

#include "market/canonical_json.hpp"
#include "market/error.hpp"
#include "market/marketplace.hpp"

namespace market::api {

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  canonical::Json body;
};

int http_status(ErrorCode code) noexcept;
canonical::Json error_body(ErrorCode code, std::string_view message,
                           canonical::Json details = canonical::Json::object());
canonical::Json to_json(const ChainReport& report);

class Router {
 public:
  /// An empty log_path disables the per-call log.
  explicit Router(Marketplace& market, std::filesystem::path log_path = {});

  Response handle(const Request& request);

 private:
  Response dispatch(const Request& request);
  void log_call(const Request& request, int status, double ms);

  Marketplace& market_;
  std::filesystem::path log_path_;
  std::mutex log_mutex_;
};

}  // namespace market::api
