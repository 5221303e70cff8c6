#include "volmo/caption_revision.hpp"

#include <algorithm>
#include <atomic>
#include <optional>
#include <thread>

#include "volmo/digest.hpp"
#include "volmo/error.hpp"
#include "volmo/templates.hpp"
#include "volmo/text_util.hpp"

namespace volmo::revision {

std::string_view to_string(Violation v) noexcept {
  switch (v) {
    case Violation::ForbiddenOpener: return "forbidden_opener";
    case Violation::Empty: return "empty";
    case Violation::ContainsAnswerHeader: return "contains_answer_header";
    case Violation::MultilineHeaderLeak: return "multiline_header_leak";
  }
  return "empty";
}

const std::vector<std::string>& forbidden_openers() {
  static const std::vector<std::string> openers{"This image depicts", "The image shows", "Based on the provided"};
  return openers;
}

std::string build_revision_prompt(std::string_view raw_caption) {
  if (text::trim(raw_caption).empty()) throw Error(ErrorCode::EmptyCaption, "caption is empty");
  return text::substitute_once(templates::get("caption_revision.txt"), "{caption}", raw_caption);
}

std::string parse_revision_response(std::string_view raw_response) {
  constexpr std::string_view kHeader = "Answer:";
  std::string_view body = raw_response;
  for (auto line : text::split_lines(raw_response)) {
    const auto t = text::trim(line);
    if (text::istarts_with(t, kHeader)) {
      // Header may be followed by the answer on the same line.
      const auto offset = static_cast<std::size_t>(t.data() - raw_response.data()) + kHeader.size();
      body = raw_response.substr(offset);
      break;
    }
  }
  std::string out(text::trim(body));
  if (out.empty()) throw Error(ErrorCode::EmptyResponse, "revision response is empty");
  return out;
}

ValidationVerdict validate_revision(std::string_view revised) {
  ValidationVerdict verdict;
  const auto body = text::trim(revised);
  if (body.empty()) {
    verdict.violations.push_back(Violation::Empty);
  } else {
    for (const auto& opener : forbidden_openers()) {
      if (text::istarts_with(body, opener)) {
        verdict.violations.push_back(Violation::ForbiddenOpener);
        break;
      }
    }
    if (text::icontains(body, "Answer:")) verdict.violations.push_back(Violation::ContainsAnswerHeader);
    for (auto line : text::split_lines(body)) {
      const auto t = text::trim(line);
      if (text::iequals(t, "Description:") || text::istarts_with(t, "Output your answer") ||
          text::icontains(t, "<Your detailed description>")) {
        verdict.violations.push_back(Violation::MultilineHeaderLeak);
        break;
      }
    }
  }
  verdict.accepted = verdict.violations.empty();
  return verdict;
}

std::string offline_clean(std::string_view raw_caption, const std::vector<jats::CaptionIssue>& issues) {
  std::vector<std::pair<std::size_t, std::size_t>> cuts;
  for (const auto& i : issues) {
    if (i.kind == jats::IssueKind::FigureReference || i.kind == jats::IssueKind::CitationMarker)
      cuts.emplace_back(text::codepoint_to_byte(raw_caption, i.begin), text::codepoint_to_byte(raw_caption, i.end));
  }
  std::sort(cuts.begin(), cuts.end());
  std::string kept;
  std::size_t pos = 0;
  for (const auto& [b, e] : cuts) {
    if (b > pos) kept.append(raw_caption.substr(pos, b - pos));
    pos = std::max(pos, e);
  }
  if (pos < raw_caption.size()) kept.append(raw_caption.substr(pos));
  return text::normalize_whitespace(kept);
}

std::string idempotency_key(const jats::FigurePair& figure) {
  std::string material = figure.article;
  material.push_back('\0');
  material += figure.figure_id;
  material.push_back('\0');
  material += templates::kTemplateVersion;
  return sha256_hex(material).substr(0, 32);
}

RevisionRequest RevisionRequest::for_figure(const jats::FigurePair& figure, ProviderConfig provider) {
  return RevisionRequest{&figure, build_revision_prompt(figure.raw_caption), std::move(provider)};
}

std::chrono::milliseconds backoff_delay(int retry) noexcept {
  if (retry < 1) return std::chrono::milliseconds(0);
  const int shift = std::min(retry - 1, 5);
  return std::chrono::milliseconds(std::min<long>(1000L << shift, 30000L));
}

jats::FigurePair revise_caption(const RevisionRequest& request, ChatClient* client, const ReviseOptions& options) {
  if (request.figure == nullptr) throw Error(ErrorCode::InvalidArgument, "revision request has no figure");
  request.provider.validate();
  jats::FigurePair out = *request.figure;

  bool reached_provider = false;
  std::optional<Error> last_error;
  if (client != nullptr) {
    const ChatRequest chat{request.prompt, idempotency_key(out)};
    for (int attempt = 1; attempt <= request.provider.max_attempts; ++attempt) {
      if (attempt > 1) {
        const auto delay = backoff_delay(attempt - 1);
        if (options.sleep) {
          options.sleep(delay);
        } else {
          std::this_thread::sleep_for(delay);
        }
      }
      try {
        const std::string reply = client->complete(chat);
        reached_provider = true;
        std::string revised = parse_revision_response(reply);
        if (validate_revision(revised).accepted) {
          out.revised_caption = std::move(revised);
          out.revision_provenance = "llm";
          return out;
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ProviderUnreachable) reached_provider = true;
        last_error = e;
      }
    }
  }

  if (!options.offline_fallback) {
    if (client == nullptr) throw Error(ErrorCode::ProviderUnreachable, "no provider configured and fallback disabled");
    if (!reached_provider)
      throw Error(ErrorCode::ProviderUnreachable, last_error ? last_error->what() : "provider unreachable");
    throw Error(ErrorCode::AllAttemptsRejected,
                "no acceptable revision after " + std::to_string(request.provider.max_attempts) + " attempts");
  }

  std::string cleaned = offline_clean(out.raw_caption, out.issues);
  out.revision_provenance = "offline_cleaned";
  if (validate_revision(cleaned).accepted) out.revised_caption = std::move(cleaned);
  return out;
}

BatchResult revise_all(const std::vector<jats::FigurePair>& figures, const ProviderConfig& provider,
                       ChatClient* client, const ReviseOptions& options) {
  provider.validate();
  struct Slot {
    std::optional<jats::FigurePair> figure;
    std::optional<BatchFailure> failure;
  };
  std::vector<Slot> slots(figures.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < figures.size(); i = next++) {
      try {
        slots[i].figure = revise_caption(RevisionRequest::for_figure(figures[i], provider), client, options);
      } catch (const Error& e) {
        slots[i].failure = BatchFailure{i, std::string(to_string(e.code())), e.what()};
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(provider.max_in_flight, static_cast<unsigned>(figures.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  BatchResult result;
  for (auto& s : slots) {
    if (s.figure) result.figures.push_back(std::move(*s.figure));
    if (s.failure) result.failures.push_back(std::move(*s.failure));
  }
  return result;
}

}  // namespace volmo::revision
