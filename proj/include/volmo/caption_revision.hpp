#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "volmo/chat_client.hpp"
#include "volmo/jats_corpus.hpp"

namespace volmo::revision {

enum class Violation { ForbiddenOpener, Empty, ContainsAnswerHeader, MultilineHeaderLeak };

std::string_view to_string(Violation v) noexcept;

struct ValidationVerdict {
  bool accepted = true;
  std::vector<Violation> violations;
};

/// Openers a revised caption must not start with (case-insensitive, after trim).
const std::vector<std::string>& forbidden_openers();

/// The caption-revision prompt with `{caption}` replaced exactly once.
/// Throws Error(EmptyCaption) for a blank caption.
std::string build_revision_prompt(std::string_view raw_caption);

/// Text after the first `Answer:` line, trimmed; the whole reply when no such
/// line exists. Throws Error(EmptyResponse) if nothing is left.
std::string parse_revision_response(std::string_view raw_response);

ValidationVerdict validate_revision(std::string_view revised);

/// Deletes figure_reference and citation_marker spans, then normalizes
/// whitespace. Never touches text outside those spans beyond whitespace.
std::string offline_clean(std::string_view raw_caption, const std::vector<jats::CaptionIssue>& issues);

/// Stable request key: hash of (pmcid, figure_id, template version).
std::string idempotency_key(const jats::FigurePair& figure);

struct RevisionRequest {
  const jats::FigurePair* figure = nullptr;
  std::string prompt;
  ProviderConfig provider;

  static RevisionRequest for_figure(const jats::FigurePair& figure, ProviderConfig provider);
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct ReviseOptions {
  bool offline_fallback = true;
  /// Backoff hook; defaults to std::this_thread::sleep_for.
  Sleeper sleep;
};

/// Delay before retry number `retry` (1-based): 1 s doubling, capped at 30 s.
std::chrono::milliseconds backoff_delay(int retry) noexcept;

/// Requests a revision until one validates or attempts run out, then falls
/// back to `offline_clean` when enabled. `client` may be null, which means
/// offline-only. Throws Error(ProviderUnreachable) / Error(AllAttemptsRejected)
/// when the fallback is disabled.
jats::FigurePair revise_caption(const RevisionRequest& request, ChatClient* client, const ReviseOptions& options = {});

struct BatchFailure {
  std::size_t index;
  std::string code;
  std::string message;
};

struct BatchResult {
  std::vector<jats::FigurePair> figures;  // input order; failed entries omitted
  std::vector<BatchFailure> failures;
};

/// Runs `revise_caption` over many figures with at most
/// `provider.max_in_flight` concurrent requests.
BatchResult revise_all(const std::vector<jats::FigurePair>& figures, const ProviderConfig& provider,
                       ChatClient* client, const ReviseOptions& options = {});

}  // namespace volmo::revision
