#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "volmo/tokenize.hpp"

namespace volmo::embed {

using Vector = std::vector<double>;

enum class Kind { Tokens, Sentence };
std::string_view to_string(Kind k) noexcept;

/// Tokens as the embedding model saw them, one vector per token.
struct TokenEmbeddings {
  std::vector<std::string> tokens;
  std::vector<Vector> vectors;
};

/// A text to embed. `id` keys precomputed files; `tokens` is the caller's
/// tokenization, used only by providers without their own tokenizer.
struct TextRef {
  std::string id;
  std::string text;
  const text::TokenSequence* tokens = nullptr;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string model_id() const = 0;
  virtual TokenEmbeddings embed_tokens(const TextRef& ref) = 0;
  virtual Vector embed_sentence(const TextRef& ref) = 0;
};

/// Orthonormal one-hot vectors, one axis per token type seen so far. The
/// sentence vector is the bag-of-words count vector over the same axes.
class OneHotProvider final : public Provider {
 public:
  explicit OneHotProvider(std::size_t capacity = 4096, std::string policy = "default");

  std::string model_id() const override { return "onehot-stub"; }
  TokenEmbeddings embed_tokens(const TextRef& ref) override;
  Vector embed_sentence(const TextRef& ref) override;

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t vocabulary_size() const;

 private:
  std::vector<std::size_t> axes(const TextRef& ref, std::vector<std::string>* tokens);

  std::size_t capacity_;
  std::string policy_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::size_t> vocab_;
};

/// One line of the precomputed-embedding JSONL format.
struct PrecomputedEntry {
  std::string id;
  Kind kind = Kind::Tokens;
  std::string model;
  std::size_t dim = 0;
  std::vector<std::string> tokens;
  std::vector<Vector> vectors;
};

nlohmann::ordered_json to_json(const PrecomputedEntry& e);
PrecomputedEntry precomputed_from_json(const nlohmann::json& j);

/// Serves embeddings from a precomputed JSONL file keyed by (id, kind).
/// Unknown ids raise Error(MissingEmbedding).
class PrecomputedProvider final : public Provider {
 public:
  static PrecomputedProvider load(const std::filesystem::path& path);
  explicit PrecomputedProvider(std::vector<PrecomputedEntry> entries);

  std::string model_id() const override { return model_; }
  TokenEmbeddings embed_tokens(const TextRef& ref) override;
  Vector embed_sentence(const TextRef& ref) override;

 private:
  std::string model_;
  std::map<std::string, PrecomputedEntry> tokens_;
  std::map<std::string, PrecomputedEntry> sentences_;
};

struct HttpConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::string model;     // empty: server default
  std::string bearer_token;
  int timeout_seconds = 60;
  int max_in_flight = 4;
};

struct Health {
  std::string status;
  std::vector<std::string> models;
};

/// Client for the embedding service protocol:
///   POST /v1/embed/tokens, POST /v1/embed/sentence, GET /v1/health.
/// Transport failures and non-2xx replies raise Error(EmbeddingUnavailable).
class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpConfig config);

  std::string model_id() const override;
  TokenEmbeddings embed_tokens(const TextRef& ref) override;
  Vector embed_sentence(const TextRef& ref) override;

  /// One request for many texts; item order follows `texts`.
  std::vector<TokenEmbeddings> embed_batch(const std::vector<std::string>& texts, Kind kind);
  Health health();

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);

  HttpConfig config_;
  std::counting_semaphore<64> slots_;
  mutable std::mutex mu_;
  std::string reported_model_;
};

/// Builds a provider from a spec string: "stub", "http://..." / "https://...",
/// or a path to a precomputed JSONL file.
std::unique_ptr<Provider> make_provider(const std::string& spec);

}  // namespace volmo::embed
