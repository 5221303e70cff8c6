#include "volmo/chat_client.hpp"

#include <httplib.h>

#include <cmath>
#include <json.hpp>
#include <regex>

#include "volmo/error.hpp"

namespace volmo::revision {

void ProviderConfig::validate() const {
  if (max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
  if (!(timeout_seconds > 0)) throw Error(ErrorCode::InvalidArgument, "timeout must be > 0");
  if (!(temperature >= 0.0 && temperature <= 2.0))
    throw Error(ErrorCode::InvalidArgument, "temperature must lie in [0, 2]");
  if (max_in_flight < 1) throw Error(ErrorCode::InvalidArgument, "max_in_flight must be >= 1");
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re))
    throw Error(ErrorCode::InvalidArgument, "endpoint must be an http(s) URL: " + url);
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/v1/chat/completions")};
}

}  // namespace

HttpChatClient::HttpChatClient(ProviderConfig config) : config_(std::move(config)) {
  config_.validate();
  std::tie(base_, path_) = split_url(config_.endpoint_url);
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  httplib::Client client(base_);
  const auto secs = static_cast<time_t>(std::floor(config_.timeout_seconds));
  const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers{{"Idempotency-Key", request.idempotency_key}};
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  nlohmann::json body{{"model", config_.model_name},
                      {"temperature", config_.temperature},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})}};

  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::ProviderUnreachable,
                "chat endpoint unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::ProviderUnreachable, "chat endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::EmptyResponse, std::string("unusable chat payload: ") + e.what());
  }
}

}  // namespace volmo::revision
