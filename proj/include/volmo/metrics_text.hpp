#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "volmo/embedding.hpp"
#include "volmo/tokenize.hpp"

namespace volmo::metrics {

using text::TokenSequence;

struct NGramPrecisionProfile {
  std::vector<double> p;  // p[n-1] for order n
  std::vector<double> w;
  double bp = 1.0;
  std::size_t c = 0;  // candidate length
  std::size_t r = 0;  // reference length
};

struct BleuResult {
  double score = 0.0;
  NGramPrecisionProfile profile;
};

/// Clipped n-gram precision with brevity penalty and uniform weights, no
/// smoothing. Throws Error(EmptyCandidate) when the candidate is empty.
BleuResult bleu(const TokenSequence& candidate, const TokenSequence& reference, int max_order = 4);

struct LcsAlignment {
  std::size_t lcs_len = 0;
  std::size_t len_x = 0;  // candidate
  std::size_t len_y = 0;  // reference
  double r_lcs = 0.0;
  double p_lcs = 0.0;
  double beta = 1.0;
  double f = 0.0;
};

std::size_t lcs_length(const std::vector<std::string>& x, const std::vector<std::string>& y);

/// Throws Error(EmptySequence) if either side is empty.
LcsAlignment rouge_l(const TokenSequence& candidate, const TokenSequence& reference, double beta = 1.0);

struct TokenEmbeddingMatrix {
  std::vector<embed::Vector> vectors;
  std::size_t dim = 0;
  bool normalized = false;
};

/// Copies `vectors`, unit-normalizing each unless `normalize` is false.
/// Throws EmptyMatrix, DimMismatch, or ZeroVector (when normalizing).
TokenEmbeddingMatrix make_matrix(std::vector<embed::Vector> vectors, bool normalize = true);

struct BertScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Greedy max-similarity matching. Without `raw_dot` both matrices must be
/// normalized (Error(NotNormalized) otherwise). Per-token maxima are clamped
/// to [0, 1].
BertScore bertscore(const TokenEmbeddingMatrix& cand, const TokenEmbeddingMatrix& ref, bool raw_dot = false);

/// Cosine similarity clamped to [-1, 1]. Throws ZeroVector or DimMismatch.
double sbert_similarity(const embed::Vector& u, const embed::Vector& v);

struct TextScoreConfig {
  std::string policy = "default";
  double beta = 1.0;
  int max_order = 4;
  bool raw_dot = false;
};

struct TextScoreSet {
  std::array<double, 4> bleu{};  // BLEU-1..BLEU-4
  LcsAlignment rouge_l;
  BertScore bertscore;
  double sbert = 0.0;
  std::string model_id;
  std::string policy_id;
};

/// All four metric families for one pair. Embedding ids are
/// "<pair_id>/candidate" and "<pair_id>/reference".
TextScoreSet score_pair(const std::string& pair_id, const std::string& candidate, const std::string& reference,
                        embed::Provider& provider, const TextScoreConfig& config = {});

struct TextPair {
  std::string id;
  std::string candidate;
  std::string reference;
};

struct PairFailure {
  std::string id;
  std::string code;
  std::string message;
};

struct CorpusScores {
  std::vector<std::optional<TextScoreSet>> scores;  // aligned with the input pairs
  std::vector<PairFailure> failures;
};

/// Scores pairs in parallel; a failing pair lands in `failures` and leaves a
/// gap in `scores`.
CorpusScores score_corpus(const std::vector<TextPair>& pairs, embed::Provider& provider,
                          const TextScoreConfig& config = {}, unsigned threads = 0);

nlohmann::ordered_json to_json(const TextScoreSet& s);

}  // namespace volmo::metrics
