#include <doctest.h>

#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <set>

#include "test_support.hpp"
#include "volmo/embedding.hpp"
#include "volmo/error.hpp"
#include "volmo/metrics_text.hpp"
#include "volmo/tokenize.hpp"

using namespace volmo;
using namespace volmo::metrics;
using text::tokenize;
using text::TokenSequence;

namespace {

TokenSequence seq(std::vector<std::string> tokens) { return {std::move(tokens), "default"}; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::BadInput;
}

/// Longest common subsequence by enumerating every subsequence of x.
std::size_t brute_lcs(const std::vector<std::string>& x, const std::vector<std::string>& y) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << x.size()); ++mask) {
    std::vector<std::string> sub;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (mask & (1u << i)) sub.push_back(x[i]);
    if (sub.size() <= best) continue;
    std::size_t j = 0;
    for (const auto& t : y)
      if (j < sub.size() && t == sub[j]) ++j;
    if (j == sub.size()) best = sub.size();
  }
  return best;
}

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len, int vocab) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<int> sym(0, vocab - 1);
  std::vector<std::string> out(len(rng));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + sym(rng)));
  return out;
}

}  // namespace

TEST_CASE("default tokenizer lowercases, normalizes and splits punctuation") {
  const auto s = tokenize("The Cat, SAT.");
  CHECK(s.tokens == std::vector<std::string>{"the", "cat", ",", "sat", "."});
  CHECK(s.policy_id == "default");
  CHECK(tokenize("  ").tokens.empty());
  // Decomposed é normalizes to the composed form.
  CHECK(tokenize("Cafe\xCC\x81").tokens == tokenize("caf\xC3\xA9").tokens);
  CHECK(tokenize("A b", "whitespace").tokens == std::vector<std::string>{"A", "b"});
  CHECK(code_of([] { (void)tokenize("x", "bpe"); }) == ErrorCode::UnknownPolicy);
}

TEST_CASE("tokenization is idempotent over its own output") {
  std::mt19937_64 rng(1);
  const std::vector<std::string> pieces{"a", "B", " ", "  ", ",", ".", "\xC3\x89", "e\xCC\x81", "\t", "-", "x1", "\xE2\x80\x93"};
  std::uniform_int_distribution<std::size_t> len(0, 30), pick(0, pieces.size() - 1);
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    for (std::size_t k = len(rng); k > 0; --k) s += pieces[pick(rng)];
    for (const auto& policy : text::registered_policies()) {
      const auto once = tokenize(s, policy);
      REQUIRE(tokenize(text::join(once), policy) == once);
    }
  }
}

TEST_CASE("LCS dynamic program agrees with enumeration") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 300; ++i) {
    const auto x = random_tokens(rng, 8, 5), y = random_tokens(rng, 8, 5);
    REQUIRE(lcs_length(x, y) == brute_lcs(x, y));
  }
}

TEST_CASE("ROUGE-L values") {
  const auto r = rouge_l(seq({"a", "b", "c", "d"}), seq({"a", "c", "e"}));
  CHECK(r.lcs_len == 2);
  CHECK(r.p_lcs == doctest::Approx(0.5));
  CHECK(r.r_lcs == doctest::Approx(2.0 / 3.0));
  CHECK(r.f == doctest::Approx(2 * 0.5 * (2.0 / 3.0) / (0.5 + 2.0 / 3.0)));
  CHECK(rouge_l(seq({"x"}), seq({"y"})).f == 0.0);
  CHECK(rouge_l(seq({"a", "b"}), seq({"a", "b"})).f == 1.0);
  CHECK(code_of([] { (void)rouge_l(seq({}), seq({"a"})); }) == ErrorCode::EmptySequence);
}

TEST_CASE("ROUGE-L F matches the weighted harmonic form for any beta") {
  std::mt19937_64 rng(3);
  for (double beta : {0.5, 1.0, 1.2, 3.0}) {
    for (int i = 0; i < 50; ++i) {
      const auto r = rouge_l(seq(random_tokens(rng, 8, 4)), seq(random_tokens(rng, 8, 4)), beta);
      if (r.lcs_len == 0) continue;
      const double b2 = beta * beta;
      REQUIRE(r.f == doctest::Approx((1 + b2) * r.r_lcs * r.p_lcs / (r.r_lcs + b2 * r.p_lcs)).epsilon(1e-12));
    }
  }
}

TEST_CASE("BLEU contracts") {
  const auto ref = seq({"the", "cat", "sat", "on", "the", "mat"});
  CHECK(bleu(ref, ref).score == 1.0);
  const auto bp = bleu(seq({"the", "cat", "sat"}), ref, 1);
  CHECK(std::abs(bp.score - std::exp(-1.0)) < 1e-9);
  CHECK(bp.profile.bp == doctest::Approx(std::exp(-1.0)));
  CHECK(bleu(seq({"dog", "ran"}), ref).score == 0.0);
  CHECK(code_of([&] { (void)bleu(seq({}), ref); }) == ErrorCode::EmptyCandidate);
  CHECK(code_of([&] { (void)bleu(TokenSequence{{"a"}, "whitespace"}, ref); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("BLEU clips repeated n-grams") {
  const auto r = bleu(seq({"the", "the", "the", "the"}), seq({"the", "cat", "the", "mat"}), 1);
  CHECK(r.profile.p[0] == doctest::Approx(0.5));
}

TEST_CASE("BLEU lies in [0, 1]") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto ref = random_tokens(rng, 10, 4);
    const auto cand = random_tokens(rng, 10, 4);
    const double s = bleu(seq(cand), seq(ref), 1).score;
    REQUIRE(s >= 0.0);
    REQUIRE(s <= 1.0);
  }
}

TEST_CASE("BERTScore with one-hot vectors reduces to set membership") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto cand = random_tokens(rng, 10, 8), ref = random_tokens(rng, 10, 8);
    embed::OneHotProvider provider(64);
    const TokenSequence cs = seq(cand), rs = seq(ref);
    const auto ce = provider.embed_tokens({"c", "", &cs});
    const auto re = provider.embed_tokens({"r", "", &rs});
    const auto score = bertscore(make_matrix(ce.vectors), make_matrix(re.vectors));
    const std::set<std::string> cset(cand.begin(), cand.end()), rset(ref.begin(), ref.end());
    double p = 0, r = 0;
    for (const auto& t : cand) p += rset.count(t);
    for (const auto& t : ref) r += cset.count(t);
    p /= static_cast<double>(cand.size());
    r /= static_cast<double>(ref.size());
    REQUIRE(std::abs(score.precision - p) <= 1e-12);
    REQUIRE(std::abs(score.recall - r) <= 1e-12);
  }
}

TEST_CASE("BERTScore matrix checks") {
  CHECK(code_of([] { (void)make_matrix({}); }) == ErrorCode::EmptyMatrix);
  CHECK(code_of([] { (void)make_matrix({{1, 0}, {1, 0, 0}}); }) == ErrorCode::DimMismatch);
  CHECK(code_of([] { (void)make_matrix({{0, 0}}); }) == ErrorCode::ZeroVector);
  const auto raw = make_matrix({{3, 4}}, false);
  CHECK_FALSE(raw.normalized);
  CHECK(code_of([&] { (void)bertscore(raw, raw); }) == ErrorCode::NotNormalized);
  const auto unit = make_matrix({{3, 4}});
  CHECK(unit.vectors[0][0] == doctest::Approx(0.6));
  CHECK(bertscore(unit, unit).f1 == doctest::Approx(1.0));
  CHECK(bertscore(make_matrix({{1, 0}}), make_matrix({{-1, 0}})).f1 == 0.0);
}

TEST_CASE("SBERT cosine") {
  CHECK(sbert_similarity({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(sbert_similarity({1, 0}, {-1, 0}) == doctest::Approx(-1.0));
  CHECK(sbert_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(code_of([] { (void)sbert_similarity({0, 0}, {1, 0}); }) == ErrorCode::ZeroVector);
  CHECK(code_of([] { (void)sbert_similarity({1}, {1, 0}); }) == ErrorCode::DimMismatch);
}

TEST_CASE("identical texts score perfectly with the stub provider") {
  embed::OneHotProvider provider;
  const auto s = score_pair("p1", "Soft drusen in the macula.", "Soft drusen in the macula.", provider);
  for (double b : s.bleu) CHECK(b == 1.0);
  CHECK(s.rouge_l.f == 1.0);
  CHECK(s.bertscore.f1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.sbert == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.model_id == "onehot-stub");
  CHECK(s.policy_id == "default");
}

TEST_CASE("one-hot provider capacity") {
  embed::OneHotProvider provider(3);
  const auto a = seq({"a", "b", "c"});
  (void)provider.embed_tokens({"x", "", &a});
  CHECK(provider.vocabulary_size() == 3);
  const auto d = seq({"d"});
  CHECK(code_of([&] { (void)provider.embed_tokens({"y", "", &d}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("corpus scoring isolates failing pairs and is thread-count independent") {
  std::vector<TextPair> pairs;
  for (int i = 0; i < 30; ++i)
    pairs.push_back({"p" + std::to_string(i), "drusen number " + std::to_string(i), "drusen count " + std::to_string(i % 7)});
  pairs[4].candidate = "   ";
  embed::OneHotProvider a, b;
  const auto one = score_corpus(pairs, a, {}, 1);
  const auto many = score_corpus(pairs, b, {}, 6);
  REQUIRE(one.failures.size() == 1);
  CHECK(one.failures[0].id == "p4");
  CHECK(one.failures[0].code == "EmptyCandidate");
  CHECK_FALSE(one.scores[4].has_value());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!one.scores[i]) continue;
    CHECK(one.scores[i]->bleu == many.scores[i]->bleu);
    CHECK(one.scores[i]->rouge_l.f == many.scores[i]->rouge_l.f);
    CHECK(one.scores[i]->bertscore.f1 == doctest::Approx(many.scores[i]->bertscore.f1).epsilon(1e-12));
  }
}

TEST_CASE("precomputed embeddings drive scoring without any service") {
  volmo::testing::TempDir dir;
  {
    std::ofstream out(dir / "emb.jsonl");
    embed::PrecomputedEntry c{"q/candidate", embed::Kind::Tokens, "m-test", 2, {"soft", "drusen"}, {{1, 0}, {0, 1}}};
    embed::PrecomputedEntry r{"q/reference", embed::Kind::Tokens, "m-test", 2, {"drusen"}, {{0, 1}}};
    embed::PrecomputedEntry cs{"q/candidate", embed::Kind::Sentence, "m-test", 2, {}, {{1, 1}}};
    embed::PrecomputedEntry rs{"q/reference", embed::Kind::Sentence, "m-test", 2, {}, {{0, 1}}};
    for (const auto& e : {c, r, cs, rs}) out << to_json(e).dump() << "\n";
  }
  auto provider = embed::make_provider((dir / "emb.jsonl").string());
  CHECK(provider->model_id() == "m-test");
  const auto s = score_pair("q", "soft drusen", "drusen", *provider);
  CHECK(s.bertscore.precision == doctest::Approx(0.5));
  CHECK(s.bertscore.recall == doctest::Approx(1.0));
  CHECK(s.sbert == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(code_of([&] { (void)score_pair("missing", "a", "b", *provider); }) == ErrorCode::MissingEmbedding);
}

TEST_CASE("precomputed records are validated") {
  auto j = nlohmann::json::parse(R"({"id":"a","kind":"tokens","model":"m","dim":3,"tokens":["x"],"vectors":[[1,0]]})");
  CHECK(code_of([&] { (void)embed::precomputed_from_json(j); }) == ErrorCode::DimMismatch);
  j = nlohmann::json::parse(R"({"id":"a","kind":"sentence","model":"m","dim":1,"vectors":[[1],[1]]})");
  CHECK(code_of([&] { (void)embed::precomputed_from_json(j); }) == ErrorCode::BadInput);
  j = nlohmann::json::parse(R"({"id":"a","kind":"words","dim":1,"vectors":[]})");
  CHECK(code_of([&] { (void)embed::precomputed_from_json(j); }) == ErrorCode::BadInput);
}

namespace {

/// Mock embedding service: each text maps to one 3-d vector per whitespace
/// token, keyed on token length, so replies are easy to predict.
void install_mock_embedder(volmo::testing::LocalServer& server, std::vector<nlohmann::json>* bodies, std::mutex* mu) {
  auto handler = [bodies, mu](bool tokens) {
    return [=](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      {
        std::lock_guard lock(*mu);
        bodies->push_back(body);
      }
      nlohmann::json items = nlohmann::json::array();
      for (const auto& t : body["texts"]) {
        const auto toks = tokenize(t.get<std::string>(), "whitespace").tokens;
        nlohmann::json item;
        if (tokens) {
          item["tokens"] = toks;
          item["vectors"] = nlohmann::json::array();
          for (const auto& w : toks) item["vectors"].push_back({static_cast<double>(w.size()), 1.0, 0.0});
        } else {
          item["vectors"] = {{static_cast<double>(toks.size()), 1.0, 0.0}};
        }
        items.push_back(item);
      }
      res.set_content(nlohmann::json{{"model", "mock-encoder"}, {"dim", 3}, {"items", items}}.dump(), "application/json");
    };
  };
  server->Post("/v1/embed/tokens", handler(true));
  server->Post("/v1/embed/sentence", handler(false));
  server->Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok","models":["mock-encoder"]})", "application/json");
  });
}

}  // namespace

TEST_CASE("http provider speaks the embedding protocol") {
  volmo::testing::LocalServer server;
  std::vector<nlohmann::json> bodies;
  std::mutex mu;
  install_mock_embedder(server, &bodies, &mu);
  server.start();

  embed::HttpProvider provider({server.url(), "mock-encoder", "", 5, 2});
  const auto health = provider.health();
  CHECK(health.status == "ok");
  CHECK(health.models == std::vector<std::string>{"mock-encoder"});

  const auto t = provider.embed_tokens({"x", "ab cde", nullptr});
  CHECK(t.tokens == std::vector<std::string>{"ab", "cde"});
  REQUIRE(t.vectors.size() == 2);
  CHECK(t.vectors[1][0] == 3.0);
  const auto s = provider.embed_sentence({"y", "a b c d", nullptr});
  CHECK(s[0] == 4.0);
  CHECK(provider.model_id() == "mock-encoder");

  std::lock_guard lock(mu);
  REQUIRE(bodies.size() == 2);
  CHECK(bodies[0]["kind"] == "tokens");
  CHECK(bodies[0]["normalize"] == true);
  CHECK(bodies[0]["model"] == "mock-encoder");
  CHECK(bodies[1]["kind"] == "sentence");
}

TEST_CASE("http provider preserves batch order") {
  volmo::testing::LocalServer server;
  std::vector<nlohmann::json> bodies;
  std::mutex mu;
  install_mock_embedder(server, &bodies, &mu);
  server.start();
  embed::HttpProvider provider({server.url(), "", "", 5, 2});
  std::vector<std::string> texts;
  for (int i = 1; i <= 64; ++i) texts.push_back(std::string(static_cast<std::size_t>(i), 'w'));
  const auto items = provider.embed_batch(texts, embed::Kind::Tokens);
  REQUIRE(items.size() == 64);
  for (std::size_t i = 0; i < 64; ++i) REQUIRE(items[i].vectors[0][0] == static_cast<double>(i + 1));
}

TEST_CASE("http provider failures") {
  volmo::testing::LocalServer server;
  server->Post("/v1/embed/tokens", [](const httplib::Request&, httplib::Response& res) { res.status = 404; });
  server->Post("/v1/embed/sentence", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"dim":3,"items":[{"vectors":[[1,2]]}]})", "application/json");
  });
  server.start();
  embed::HttpProvider provider({server.url(), "", "", 5, 1});
  CHECK(code_of([&] { (void)provider.embed_tokens({"a", "x", nullptr}); }) == ErrorCode::EmbeddingUnavailable);
  CHECK(code_of([&] { (void)provider.embed_sentence({"a", "x", nullptr}); }) == ErrorCode::DimMismatch);
  CHECK(code_of([&] { (void)provider.health(); }) == ErrorCode::EmbeddingUnavailable);

  embed::HttpProvider down({"http://127.0.0.1:" + std::to_string(volmo::testing::closed_port()), "", "", 2, 1});
  CHECK(code_of([&] { (void)down.health(); }) == ErrorCode::EmbeddingUnavailable);
}
