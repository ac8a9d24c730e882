#include "market/server.hpp"

#include <httplib.h>
#include <signal.h>
#include <unistd.h>

#include <cstdio>
#include <thread>

#include "market/error.hpp"

namespace market {

HttpServer::HttpServer(Marketplace& market, const ServiceConfig& config)
    : market_(market),
      config_(config),
      router_(market, config.data_dir / "api.log"),
      server_(std::make_unique<httplib::Server>()) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    api::Request r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query[k] = v;
    const auto out = router_.handle(r);
    res.status = out.status;
    res.set_content(canonical::dump(out.body), "application/json");
  };
  const char* pattern = R"(/(health|participants|products|listings|verify|orders|ledger)(/.*)?)";
  // No SO_REUSEPORT: a second server on a busy port must fail to bind.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  server_->Get(pattern, handler);
  server_->Post(pattern, handler);
  if (!config_.static_dir.empty()) server_->set_mount_point("/", config_.static_dir.string());
}

HttpServer::~HttpServer() = default;

int HttpServer::bind() {
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else if (server_->bind_to_port("0.0.0.0", config_.port)) {
    port_ = config_.port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) {
    throw Error(ErrorCode::IoError, "cannot bind port " + std::to_string(config_.port) + " (in use?)");
  }
  return port_;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

void run_server(const ServiceConfig& config) {
  validate(config);
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Marketplace market(config.marketplace());
  HttpServer server(market, config);
  const int port = server.bind();
  std::fprintf(stderr, "market: serving on port %d, data in %s\n", port, config.data_dir.c_str());

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    std::fprintf(stderr, "market: signal %d, shutting down\n", sig);
    server.stop();
  });
  server.listen();
  // listen() can also return on its own; wake the waiter so it can exit.
  kill(getpid(), SIGTERM);
  waiter.join();
  market.ledger().flush();
}

}  // namespace market
