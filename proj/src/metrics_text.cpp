#include "volmo/metrics_text.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <unordered_map>

#include "volmo/error.hpp"

namespace volmo::metrics {

namespace {

using NGramCounts = std::unordered_map<std::string, std::size_t>;

NGramCounts ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  NGramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

void require_same_policy(const TokenSequence& a, const TokenSequence& b) {
  if (a.policy_id != b.policy_id)
    throw Error(ErrorCode::InvalidArgument, "token sequences use different policies: " + a.policy_id + " vs " + b.policy_id);
}

double dot(const embed::Vector& a, const embed::Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

BleuResult bleu(const TokenSequence& candidate, const TokenSequence& reference, int max_order) {
  if (max_order < 1) throw Error(ErrorCode::InvalidArgument, "BLEU order must be at least 1");
  require_same_policy(candidate, reference);
  const auto& cand = candidate.tokens;
  const auto& ref = reference.tokens;
  if (cand.empty()) throw Error(ErrorCode::EmptyCandidate, "candidate has no tokens");

  BleuResult out;
  auto& prof = out.profile;
  prof.c = cand.size();
  prof.r = ref.size();
  prof.bp = prof.c >= prof.r ? 1.0 : std::exp(1.0 - static_cast<double>(prof.r) / static_cast<double>(prof.c));
  prof.w.assign(static_cast<std::size_t>(max_order), 1.0 / max_order);

  bool zero = false;
  double log_sum = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    const auto cand_counts = ngrams(cand, static_cast<std::size_t>(n));
    const auto ref_counts = ngrams(ref, static_cast<std::size_t>(n));
    std::size_t total = 0;
    std::size_t matched = 0;
    for (const auto& [gram, count] : cand_counts) {
      total += count;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    const double p = total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
    prof.p.push_back(p);
    if (p == 0.0) zero = true;
    else log_sum += prof.w[static_cast<std::size_t>(n - 1)] * std::log(p);
  }
  out.score = zero ? 0.0 : prof.bp * std::exp(log_sum);
  return out;
}

std::size_t lcs_length(const std::vector<std::string>& x, const std::vector<std::string>& y) {
  std::vector<std::size_t> prev(y.size() + 1, 0), cur(y.size() + 1, 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j)
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

LcsAlignment rouge_l(const TokenSequence& candidate, const TokenSequence& reference, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "ROUGE-L beta must be positive");
  require_same_policy(candidate, reference);
  if (candidate.tokens.empty() || reference.tokens.empty())
    throw Error(ErrorCode::EmptySequence, "ROUGE-L needs two non-empty sequences");

  LcsAlignment a;
  a.beta = beta;
  a.len_x = candidate.tokens.size();
  a.len_y = reference.tokens.size();
  a.lcs_len = lcs_length(candidate.tokens, reference.tokens);
  if (a.lcs_len == 0) return a;
  a.r_lcs = static_cast<double>(a.lcs_len) / static_cast<double>(a.len_y);
  a.p_lcs = static_cast<double>(a.lcs_len) / static_cast<double>(a.len_x);
  const double b2 = beta * beta;
  a.f = (1.0 + b2) * a.r_lcs * a.p_lcs / (a.r_lcs + b2 * a.p_lcs);
  return a;
}

TokenEmbeddingMatrix make_matrix(std::vector<embed::Vector> vectors, bool normalize) {
  if (vectors.empty()) throw Error(ErrorCode::EmptyMatrix, "embedding matrix has no vectors");
  TokenEmbeddingMatrix m;
  m.dim = vectors.front().size();
  if (m.dim == 0) throw Error(ErrorCode::EmptyMatrix, "embedding vectors have zero dim");
  for (auto& v : vectors) {
    if (v.size() != m.dim) throw Error(ErrorCode::DimMismatch, "token vectors disagree on dim");
    if (normalize) {
      const double norm = std::sqrt(dot(v, v));
      if (norm == 0.0) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero token vector");
      for (auto& x : v) x /= norm;
    }
  }
  m.vectors = std::move(vectors);
  m.normalized = normalize;
  return m;
}

BertScore bertscore(const TokenEmbeddingMatrix& cand, const TokenEmbeddingMatrix& ref, bool raw_dot) {
  if (cand.vectors.empty() || ref.vectors.empty()) throw Error(ErrorCode::EmptyMatrix, "BERTScore needs non-empty matrices");
  if (cand.dim != ref.dim) throw Error(ErrorCode::DimMismatch, "candidate and reference embeddings differ in dim");
  if (!raw_dot) {
    for (const auto* m : {&cand, &ref}) {
      if (!m->normalized) throw Error(ErrorCode::NotNormalized, "BERTScore expects unit-normalized token vectors");
      for (const auto& v : m->vectors)
        if (std::abs(std::sqrt(dot(v, v)) - 1.0) > 1e-6)
          throw Error(ErrorCode::NotNormalized, "token vector norm differs from 1 by more than 1e-6");
    }
  }

  std::vector<double> best_cand(cand.vectors.size(), -INFINITY);
  std::vector<double> best_ref(ref.vectors.size(), -INFINITY);
  for (std::size_t i = 0; i < cand.vectors.size(); ++i) {
    for (std::size_t j = 0; j < ref.vectors.size(); ++j) {
      const double s = dot(cand.vectors[i], ref.vectors[j]);
      best_cand[i] = std::max(best_cand[i], s);
      best_ref[j] = std::max(best_ref[j], s);
    }
  }
  auto mean_clamped = [](const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += std::clamp(x, 0.0, 1.0);
    return sum / static_cast<double>(xs.size());
  };
  BertScore out;
  out.precision = mean_clamped(best_cand);
  out.recall = mean_clamped(best_ref);
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

double sbert_similarity(const embed::Vector& u, const embed::Vector& v) {
  if (u.size() != v.size()) throw Error(ErrorCode::DimMismatch, "sentence vectors differ in dim");
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

TextScoreSet score_pair(const std::string& pair_id, const std::string& candidate, const std::string& reference,
                        embed::Provider& provider, const TextScoreConfig& config) {
  const auto cand = text::tokenize(candidate, config.policy);
  const auto ref = text::tokenize(reference, config.policy);

  TextScoreSet s;
  s.policy_id = config.policy;
  s.model_id = provider.model_id();
  for (int n = 1; n <= 4; ++n) s.bleu[static_cast<std::size_t>(n - 1)] = bleu(cand, ref, n).score;
  s.rouge_l = rouge_l(cand, ref, config.beta);

  const embed::TextRef cand_ref{pair_id + "/candidate", candidate, &cand};
  const embed::TextRef ref_ref{pair_id + "/reference", reference, &ref};
  const bool normalize = !config.raw_dot;
  s.bertscore = bertscore(make_matrix(provider.embed_tokens(cand_ref).vectors, normalize),
                          make_matrix(provider.embed_tokens(ref_ref).vectors, normalize), config.raw_dot);
  s.sbert = sbert_similarity(provider.embed_sentence(cand_ref), provider.embed_sentence(ref_ref));
  return s;
}

CorpusScores score_corpus(const std::vector<TextPair>& pairs, embed::Provider& provider, const TextScoreConfig& config,
                          unsigned threads) {
  CorpusScores out;
  out.scores.resize(pairs.size());
  std::vector<std::optional<PairFailure>> failed(pairs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      const auto& p = pairs[i];
      try {
        out.scores[i] = score_pair(p.id, p.candidate, p.reference, provider, config);
      } catch (const Error& e) {
        failed[i] = PairFailure{p.id, std::string(to_string(e.code())), e.what()};
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(pairs.size(), 1)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (auto& f : failed)
    if (f) out.failures.push_back(std::move(*f));
  return out;
}

nlohmann::ordered_json to_json(const TextScoreSet& s) {
  nlohmann::ordered_json j;
  j["bleu"] = {{"bleu1", s.bleu[0]}, {"bleu2", s.bleu[1]}, {"bleu3", s.bleu[2]}, {"bleu4", s.bleu[3]}};
  j["rouge_l"] = {{"r_lcs", s.rouge_l.r_lcs}, {"p_lcs", s.rouge_l.p_lcs}, {"f", s.rouge_l.f}, {"beta", s.rouge_l.beta}};
  j["bertscore"] = {{"p_bert", s.bertscore.precision}, {"r_bert", s.bertscore.recall}, {"f_bert", s.bertscore.f1}};
  j["sbert"] = s.sbert;
  j["model_id"] = s.model_id;
  j["policy_id"] = s.policy_id;
  return j;
}

}  // namespace volmo::metrics
