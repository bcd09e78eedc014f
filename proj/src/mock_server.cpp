#include "vpanel/mock_server.hpp"

#include <atomic>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "vpanel/error.hpp"

namespace vpanel {

using nlohmann::json;

struct MockVlmServer::Impl {
  Responder responder;
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;
  std::atomic<std::size_t> requests{0};

  void install_routes() {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      MockReply reply;
      std::string model;
      try {
        const ChatRequest chat = parse_chat_request(json::parse(req.body));
        model = chat.model;
        reply = responder(chat);
      } catch (const std::exception& e) {
        reply = {400, e.what()};
      }
      res.status = reply.status;
      if (reply.status >= 200 && reply.status < 300) {
        res.set_content(build_chat_response(reply.text, model).dump(), "application/json");
      } else {
        res.set_content(json{{"error", {{"message", reply.text}}}}.dump(), "application/json");
      }
    };
    server.Post("/v1/chat/completions", handler);
    server.Post("/chat/completions", handler);
  }
};

MockVlmServer::MockVlmServer(Responder responder) : impl_(std::make_unique<Impl>()) {
  impl_->responder = std::move(responder);
  impl_->install_routes();
}

MockVlmServer::~MockVlmServer() { stop(); }

int MockVlmServer::start(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    impl_->port = port;
  } else {
    impl_->port = -1;
  }
  if (impl_->port < 0) {
    throw Error(ErrorKind::ConfigError, fmt::format("cannot bind {}:{}", host, port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void MockVlmServer::run(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port;
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorKind::ConfigError, fmt::format("cannot listen on {}:{}", host, port));
  }
}

void MockVlmServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockVlmServer::base_url() const {
  return fmt::format("http://{}:{}/v1", impl_->host, impl_->port);
}

std::size_t MockVlmServer::request_count() const { return impl_->requests.load(); }

}  // namespace vpanel
