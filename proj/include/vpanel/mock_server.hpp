#pragma once

#include <functional>
#include <memory>
#include <string>

#include "vpanel/harness.hpp"

namespace vpanel {

struct MockReply {
  int status = 200;
  std::string text;  // message content on 200, error body otherwise
};

/// Local HTTP endpoint speaking the chat-completions wire format. The
/// responder runs on the server's worker threads and must be thread-safe.
class MockVlmServer {
 public:
  using Responder = std::function<MockReply(const ChatRequest&)>;

  explicit MockVlmServer(Responder responder);
  ~MockVlmServer();

  MockVlmServer(const MockVlmServer&) = delete;
  MockVlmServer& operator=(const MockVlmServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop() is called elsewhere.
  void run(const std::string& host, int port);
  void stop();

  /// e.g. "http://127.0.0.1:43121/v1"
  std::string base_url() const;
  std::size_t request_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vpanel
