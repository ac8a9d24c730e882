#pragma once

#include <memory>

#include "market/api.hpp"
#include "market/config.hpp"

namespace httplib {
class Server;
}

namespace market {

/// HTTP front end over api::Router.
class HttpServer {
 public:
  HttpServer(Marketplace& market, const ServiceConfig& config);
  ~HttpServer();

  /// Binds the configured port (0 picks a free one). Throws IoError when
  /// the port is in use.
  int bind();
  /// Serves until stop(); bind() must have succeeded.
  void listen();
  void stop();
  int port() const noexcept { return port_; }

 private:
  Marketplace& market_;
  ServiceConfig config_;
  api::Router router_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
};

/// Opens the marketplace, serves until SIGINT/SIGTERM, then flushes.
void run_server(const ServiceConfig& config);

}  // namespace market
