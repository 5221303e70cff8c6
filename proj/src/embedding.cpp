#include "volmo/embedding.hpp"

#include <algorithm>
#include <fstream>
#include <regex>

#include <httplib.h>

#include "volmo/error.hpp"
#include "volmo/text_util.hpp"

namespace volmo::embed {

std::string_view to_string(Kind k) noexcept { return k == Kind::Tokens ? "tokens" : "sentence"; }

// ---------------------------------------------------------------------------
// One-hot stub

OneHotProvider::OneHotProvider(std::size_t capacity, std::string policy)
    : capacity_(capacity), policy_(std::move(policy)) {
  if (capacity_ == 0) throw Error(ErrorCode::InvalidArgument, "one-hot capacity must be positive");
}

std::size_t OneHotProvider::vocabulary_size() const {
  std::lock_guard lock(mu_);
  return vocab_.size();
}

std::vector<std::size_t> OneHotProvider::axes(const TextRef& ref, std::vector<std::string>* tokens) {
  text::TokenSequence local;
  const text::TokenSequence* seq = ref.tokens;
  if (seq == nullptr) {
    local = text::tokenize(ref.text, policy_);
    seq = &local;
  }
  std::vector<std::size_t> out;
  out.reserve(seq->tokens.size());
  std::lock_guard lock(mu_);
  for (const auto& t : seq->tokens) {
    auto it = vocab_.find(t);
    if (it == vocab_.end()) {
      if (vocab_.size() == capacity_)
        throw Error(ErrorCode::InvalidArgument, "one-hot vocabulary full at " + std::to_string(capacity_) + " types");
      it = vocab_.emplace(t, vocab_.size()).first;
    }
    out.push_back(it->second);
  }
  if (tokens) *tokens = seq->tokens;
  return out;
}

TokenEmbeddings OneHotProvider::embed_tokens(const TextRef& ref) {
  TokenEmbeddings out;
  for (auto axis : axes(ref, &out.tokens)) {
    Vector v(capacity_, 0.0);
    v[axis] = 1.0;
    out.vectors.push_back(std::move(v));
  }
  return out;
}

Vector OneHotProvider::embed_sentence(const TextRef& ref) {
  Vector v(capacity_, 0.0);
  for (auto axis : axes(ref, nullptr)) v[axis] += 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// Precomputed JSONL

nlohmann::ordered_json to_json(const PrecomputedEntry& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["kind"] = to_string(e.kind);
  j["model"] = e.model;
  j["dim"] = e.dim;
  if (e.kind == Kind::Tokens) j["tokens"] = e.tokens;
  j["vectors"] = e.vectors;
  return j;
}

PrecomputedEntry precomputed_from_json(const nlohmann::json& j) {
  PrecomputedEntry e;
  try {
    e.id = j.at("id").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "tokens") e.kind = Kind::Tokens;
    else if (kind == "sentence") e.kind = Kind::Sentence;
    else throw Error(ErrorCode::BadInput, "unknown embedding kind: " + kind);
    e.model = j.value("model", "");
    e.dim = j.at("dim").get<std::size_t>();
    if (j.contains("tokens")) e.tokens = j.at("tokens").get<std::vector<std::string>>();
    e.vectors = j.at("vectors").get<std::vector<Vector>>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::BadInput, std::string("bad embedding record: ") + ex.what());
  }
  for (const auto& v : e.vectors)
    if (v.size() != e.dim) throw Error(ErrorCode::DimMismatch, "embedding " + e.id + " has a vector of the wrong dim");
  if (e.kind == Kind::Tokens && !e.tokens.empty() && e.tokens.size() != e.vectors.size())
    throw Error(ErrorCode::BadInput, "embedding " + e.id + " token and vector counts differ");
  if (e.kind == Kind::Sentence && e.vectors.size() != 1)
    throw Error(ErrorCode::BadInput, "sentence embedding " + e.id + " must hold one vector");
  return e;
}

PrecomputedProvider PrecomputedProvider::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<PrecomputedEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      entries.push_back(precomputed_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::BadInput, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return PrecomputedProvider(std::move(entries));
}

PrecomputedProvider::PrecomputedProvider(std::vector<PrecomputedEntry> entries) {
  for (auto& e : entries) {
    if (model_.empty()) model_ = e.model;
    auto& table = e.kind == Kind::Tokens ? tokens_ : sentences_;
    table.insert_or_assign(e.id, std::move(e));
  }
  if (model_.empty()) model_ = "precomputed";
}

TokenEmbeddings PrecomputedProvider::embed_tokens(const TextRef& ref) {
  auto it = tokens_.find(ref.id);
  if (it == tokens_.end()) throw Error(ErrorCode::MissingEmbedding, "no token embeddings for id " + ref.id);
  return {it->second.tokens, it->second.vectors};
}

Vector PrecomputedProvider::embed_sentence(const TextRef& ref) {
  auto it = sentences_.find(ref.id);
  if (it == sentences_.end()) throw Error(ErrorCode::MissingEmbedding, "no sentence embedding for id " + ref.id);
  return it->second.vectors.front();
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

struct Url {
  std::string origin;
  std::string prefix;
};

Url split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorCode::InvalidArgument, "bad embedding service URL: " + url);
  std::string prefix = m[2].matched ? m[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

}  // namespace

HttpProvider::HttpProvider(HttpConfig config)
    : config_(std::move(config)), slots_(std::clamp(config_.max_in_flight, 1, 64)) {
  split_url(config_.base_url);
}

std::string HttpProvider::model_id() const {
  std::lock_guard lock(mu_);
  if (!reported_model_.empty()) return reported_model_;
  return config_.model.empty() ? "http" : config_.model;
}

nlohmann::json HttpProvider::post(const std::string& path, const nlohmann::json& body) {
  const auto url = split_url(config_.base_url);
  slots_.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{slots_};

  httplib::Client client(url.origin);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  if (!config_.bearer_token.empty()) client.set_bearer_token_auth(config_.bearer_token);
  auto res = client.Post(url.prefix + path, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::EmbeddingUnavailable, "embedding service unreachable: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw Error(ErrorCode::EmbeddingUnavailable,
                "embedding service returned HTTP " + std::to_string(res->status) + " for " + path);
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::EmbeddingUnavailable, std::string("embedding service sent invalid JSON: ") + e.what());
  }
}

std::vector<TokenEmbeddings> HttpProvider::embed_batch(const std::vector<std::string>& texts, Kind kind) {
  nlohmann::json body{{"texts", texts}, {"kind", to_string(kind)}, {"normalize", true}};
  if (!config_.model.empty()) body["model"] = config_.model;
  const auto reply = post(kind == Kind::Tokens ? "/v1/embed/tokens" : "/v1/embed/sentence", body);

  std::vector<TokenEmbeddings> out;
  try {
    if (reply.contains("model") && reply["model"].is_string()) {
      std::lock_guard lock(mu_);
      reported_model_ = reply["model"].get<std::string>();
    }
    const auto dim = reply.at("dim").get<std::size_t>();
    for (const auto& item : reply.at("items")) {
      TokenEmbeddings e;
      if (item.contains("tokens")) e.tokens = item["tokens"].get<std::vector<std::string>>();
      e.vectors = item.at("vectors").get<std::vector<Vector>>();
      for (const auto& v : e.vectors)
        if (v.size() != dim) throw Error(ErrorCode::DimMismatch, "embedding service returned a vector of the wrong dim");
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::EmbeddingUnavailable, std::string("embedding service reply is malformed: ") + e.what());
  }
  if (out.size() != texts.size())
    throw Error(ErrorCode::EmbeddingUnavailable, "embedding service returned " + std::to_string(out.size()) +
                                                     " items for " + std::to_string(texts.size()) + " texts");
  return out;
}

TokenEmbeddings HttpProvider::embed_tokens(const TextRef& ref) {
  auto items = embed_batch({ref.text}, Kind::Tokens);
  return std::move(items.front());
}

Vector HttpProvider::embed_sentence(const TextRef& ref) {
  auto items = embed_batch({ref.text}, Kind::Sentence);
  if (items.front().vectors.size() != 1)
    throw Error(ErrorCode::EmbeddingUnavailable, "sentence embedding reply must hold one vector");
  return std::move(items.front().vectors.front());
}

Health HttpProvider::health() {
  const auto url = split_url(config_.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  auto res = client.Get(url.prefix + "/v1/health");
  if (!res) throw Error(ErrorCode::EmbeddingUnavailable, "embedding service unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorCode::EmbeddingUnavailable, "health check returned HTTP " + std::to_string(res->status));
  try {
    const auto j = nlohmann::json::parse(res->body);
    return {j.at("status").get<std::string>(), j.value("models", std::vector<std::string>{})};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::EmbeddingUnavailable, std::string("health reply is malformed: ") + e.what());
  }
}

std::unique_ptr<Provider> make_provider(const std::string& spec) {
  if (spec.empty() || spec == "stub") return std::make_unique<OneHotProvider>();
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0)
    return std::make_unique<HttpProvider>(HttpConfig{spec, "", "", 60, 4});
  return std::make_unique<PrecomputedProvider>(PrecomputedProvider::load(spec));
}

}  // namespace volmo::embed
