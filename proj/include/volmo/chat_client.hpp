#pragma once

#include <string>

namespace volmo::revision {

struct ProviderConfig {
  /// Full chat-completions URL, e.g. http://localhost:8000/v1/chat/completions.
  std::string endpoint_url;
  std::string model_name = "default";
  std::string api_key;
  double temperature = 0.0;
  int max_attempts = 3;
  double timeout_seconds = 60.0;
  unsigned max_in_flight = 4;

  /// Throws Error(InvalidArgument) on a violated invariant.
  void validate() const;
};

struct ChatRequest {
  std::string prompt;
  std::string idempotency_key;
};

/// One chat-completion round trip. Implementations throw
/// Error(ProviderUnreachable) on transport failure and Error(EmptyResponse)
/// when the payload has no usable message content.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// OpenAI-style `POST .../chat/completions` client: a single user message
/// carrying the prompt; reply read from choices[0].message.content.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(ProviderConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  ProviderConfig config_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
};

}  // namespace volmo::revision
