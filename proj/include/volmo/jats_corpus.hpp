#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace volmo::jats {

enum class ArticleType { Research, CaseReport, Review, Other };
enum class License { CcBy, CcByNc, CcByNcSa, Cc0, Other };
enum class IssueKind { FigureReference, CitationMarker, CrossReference, Fragment, ImagingShorthand };

std::string_view to_string(ArticleType t) noexcept;
std::string_view to_string(License l) noexcept;
std::string_view to_string(IssueKind k) noexcept;
ArticleType article_type_from_string(std::string_view s);
License license_from_string(std::string_view s);
IssueKind issue_kind_from_string(std::string_view s);

struct ArticleRecord {
  std::string pmcid;
  std::string journal;
  std::string title;
  ArticleType article_type = ArticleType::Other;
  License license = License::Other;
  std::size_t figure_count = 0;
  std::size_t skipped_figures = 0;
};

/// `begin`/`end` are code-point offsets into the caption; `matched_text` is
/// exactly the caption slice [begin, end).
struct CaptionIssue {
  IssueKind kind;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string matched_text;

  friend bool operator==(const CaptionIssue&, const CaptionIssue&) = default;
};

struct FigurePair {
  std::string article;
  std::string figure_id;
  std::string graphic_uri;
  std::string raw_caption;
  std::vector<CaptionIssue> issues;
  std::optional<std::string> revised_caption;
  /// "llm" or "offline_cleaned" once a revision has been attempted.
  std::optional<std::string> revision_provenance;
};

struct ScanConfig {
  std::vector<std::string> shorthand_lexicon = default_shorthand_lexicon();

  static std::vector<std::string> default_shorthand_lexicon();
};

struct CaseReportConfig {
  std::vector<std::string> phrases{"case report", "case presentation"};
};

struct ParseOptions {
  ScanConfig scan;
  CaseReportConfig case_reports;
  /// Used as pmcid when the document carries no article-id at all.
  std::string fallback_id;
};

struct ParsedArticle {
  ArticleRecord record;
  std::vector<FigurePair> figures;
  /// Concatenated, whitespace-normalized text of the `body` element.
  std::string body_text;
};

/// Parses one JATS document. Throws Error(MalformedXml) when the text is not
/// well-formed and Error(NotJats) when the root element is not `article`.
ParsedArticle parse_article(std::string_view jats_document, const ParseOptions& options = {});

bool detect_case_report(const ArticleRecord& record, std::string_view body_text,
                        const CaseReportConfig& config = {});

std::vector<CaptionIssue> scan_caption_issues(std::string_view raw_caption, const ScanConfig& config = {});

/// Journal whitelist backed by the bundled journals.txt fixture.
class JournalFilter {
 public:
  JournalFilter();
  explicit JournalFilter(std::vector<std::string> journals);

  bool accepts(std::string_view journal) const;
  std::size_t size() const noexcept { return keys_.size(); }

 private:
  static std::string key(std::string_view journal);
  std::vector<std::string> keys_;
};

struct CorpusFailure {
  std::string path;
  std::string code;
  std::string message;
};

struct CorpusResult {
  std::vector<ParsedArticle> articles;
  std::vector<CorpusFailure> failures;
  std::size_t filtered_out = 0;
};

/// Collects `.xml`/`.nxml` files from files or directory trees, sorted by path.
std::vector<std::filesystem::path> collect_inputs(const std::vector<std::filesystem::path>& inputs);

/// Parses every input file, isolating per-file failures. Results keep input
/// order regardless of `threads`.
CorpusResult extract_corpus(const std::vector<std::filesystem::path>& files, const ParseOptions& options,
                            const JournalFilter* filter = nullptr, unsigned threads = 1);

nlohmann::ordered_json to_json(const ArticleRecord& record);
nlohmann::ordered_json to_json(const FigurePair& figure);
FigurePair figure_from_json(const nlohmann::json& j);

}  // namespace volmo::jats
