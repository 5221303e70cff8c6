#include "volmo/jats_corpus.hpp"

#include <expat.h>

#include <algorithm>
#include <atomic>
#include <memory>
#include <regex>
#include <set>
#include <thread>

#include "volmo/error.hpp"
#include "volmo/templates.hpp"
#include "volmo/text_util.hpp"

namespace volmo::jats {

std::string_view to_string(ArticleType t) noexcept {
  switch (t) {
    case ArticleType::Research: return "research";
    case ArticleType::CaseReport: return "case_report";
    case ArticleType::Review: return "review";
    case ArticleType::Other: return "other";
  }
  return "other";
}

std::string_view to_string(License l) noexcept {
  switch (l) {
    case License::CcBy: return "CC-BY";
    case License::CcByNc: return "CC-BY-NC";
    case License::CcByNcSa: return "CC-BY-NC-SA";
    case License::Cc0: return "CC0";
    case License::Other: return "other";
  }
  return "other";
}

std::string_view to_string(IssueKind k) noexcept {
  switch (k) {
    case IssueKind::FigureReference: return "figure_reference";
    case IssueKind::CitationMarker: return "citation_marker";
    case IssueKind::CrossReference: return "cross_reference";
    case IssueKind::Fragment: return "fragment";
    case IssueKind::ImagingShorthand: return "imaging_shorthand";
  }
  return "fragment";
}

ArticleType article_type_from_string(std::string_view s) {
  for (auto t : {ArticleType::Research, ArticleType::CaseReport, ArticleType::Review, ArticleType::Other})
    if (to_string(t) == s) return t;
  throw Error(ErrorCode::BadInput, "unknown article_type: " + std::string(s));
}

License license_from_string(std::string_view s) {
  for (auto l : {License::CcBy, License::CcByNc, License::CcByNcSa, License::Cc0, License::Other})
    if (to_string(l) == s) return l;
  throw Error(ErrorCode::BadInput, "unknown license: " + std::string(s));
}

IssueKind issue_kind_from_string(std::string_view s) {
  for (auto k : {IssueKind::FigureReference, IssueKind::CitationMarker, IssueKind::CrossReference,
                 IssueKind::Fragment, IssueKind::ImagingShorthand})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::BadInput, "unknown issue kind: " + std::string(s));
}

std::vector<std::string> ScanConfig::default_shorthand_lexicon() {
  return {"T1WI", "T2WI", "T2-tse-fs-cor", "T2-tse-fs-tra", "fs", "FLAIR", "DWI", "STIR"};
}

// ---------------------------------------------------------------------------
// Caption issue scanning

namespace {

struct IssueRule {
  IssueKind kind;
  std::regex pattern;
};

const std::vector<IssueRule>& issue_rules() {
  static const std::vector<IssueRule> rules = [] {
    std::vector<IssueRule> r;
    r.push_back({IssueKind::FigureReference,
                 std::regex(R"(\bFig(?:ure)?s?\.?\s*\d+(?:[A-Za-z](?![A-Za-z]))?)")});
    r.push_back({IssueKind::CitationMarker, std::regex(R"(\[\d+(?:\s*(?:,|–|-)\s*\d+)*\])")});
    r.push_back({IssueKind::CitationMarker, std::regex(R"(\(\d+(?:\s*(?:,|–|-)\s*\d+)*\))")});
    r.push_back({IssueKind::CrossReference,
                 std::regex(R"(\b(?:see\s+)?(?:Tables?|Sections?|Appendix|Supplementary\s+(?:Figures?|Fig\.?|Tables?|Materials?|Videos?))\s*S?\d+[A-Za-z]?)",
                            std::regex::icase)});
    r.push_back({IssueKind::Fragment, std::regex(R"(^[A-H](?= +[A-Z]))")});
    return r;
  }();
  return rules;
}

bool shorthand_char(char c) noexcept {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
}

}  // namespace

std::vector<CaptionIssue> scan_caption_issues(std::string_view raw_caption, const ScanConfig& config) {
  struct ByteIssue {
    IssueKind kind;
    std::size_t begin, end;
  };
  std::vector<ByteIssue> found;

  const std::string caption(raw_caption);
  for (const auto& rule : issue_rules()) {
    for (auto it = std::sregex_iterator(caption.begin(), caption.end(), rule.pattern);
         it != std::sregex_iterator(); ++it) {
      const auto pos = static_cast<std::size_t>(it->position());
      found.push_back({rule.kind, pos, pos + static_cast<std::size_t>(it->length())});
    }
  }

  // Shorthand tokens: maximal runs of [A-Za-z0-9-], edge hyphens excluded.
  std::size_t i = 0;
  while (i < caption.size()) {
    if (!shorthand_char(caption[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < caption.size() && shorthand_char(caption[j])) ++j;
    std::size_t b = i, e = j;
    while (b < e && caption[b] == '-') ++b;
    while (e > b && caption[e - 1] == '-') --e;
    const std::string_view token(caption.data() + b, e - b);
    if (!token.empty() &&
        std::find(config.shorthand_lexicon.begin(), config.shorthand_lexicon.end(), token) !=
            config.shorthand_lexicon.end()) {
      found.push_back({IssueKind::ImagingShorthand, b, e});
    }
    i = j;
  }

  std::sort(found.begin(), found.end(), [](const ByteIssue& a, const ByteIssue& b) {
    return std::tie(a.begin, a.end, a.kind) < std::tie(b.begin, b.end, b.kind);
  });

  std::vector<CaptionIssue> issues;
  issues.reserve(found.size());
  for (const auto& f : found) {
    issues.push_back({f.kind, text::byte_to_codepoint(caption, f.begin), text::byte_to_codepoint(caption, f.end),
                      caption.substr(f.begin, f.end - f.begin)});
  }
  return issues;
}

// ---------------------------------------------------------------------------
// Case reports

bool detect_case_report(const ArticleRecord& record, std::string_view body_text, const CaseReportConfig& config) {
  if (record.article_type == ArticleType::CaseReport) return true;
  return std::any_of(config.phrases.begin(), config.phrases.end(), [&](const std::string& phrase) {
    return text::icontains(record.title, phrase) || text::icontains(body_text, phrase);
  });
}

// ---------------------------------------------------------------------------
// JATS parsing

namespace {

const std::set<std::string, std::less<>>& inline_elements() {
  static const std::set<std::string, std::less<>> names{
      "italic", "bold",     "sup",    "sub",       "sc",        "underline",      "monospace",
      "xref",   "ext-link", "uri",    "email",     "abbrev",    "named-content",  "styled-content",
      "strike", "overline", "roman",  "sans-serif", "inline-formula", "inline-graphic", "fn"};
  return names;
}

std::string_view local_name(std::string_view qname) noexcept {
  auto colon = qname.rfind(':');
  return colon == std::string_view::npos ? qname : qname.substr(colon + 1);
}

const char* find_attr(const XML_Char** attrs, std::string_view name) noexcept {
  for (int i = 0; attrs[i] != nullptr; i += 2) {
    if (std::string_view(attrs[i]) == name) return attrs[i + 1];
  }
  return nullptr;
}

const char* find_attr_local(const XML_Char** attrs, std::string_view name) noexcept {
  for (int i = 0; attrs[i] != nullptr; i += 2) {
    if (local_name(attrs[i]) == name) return attrs[i + 1];
  }
  return nullptr;
}

License classify_license(std::string_view hints) {
  const auto h = text::to_lower_ascii(hints);
  if (h.find("publicdomain/zero") != std::string::npos || h.find("cc0") != std::string::npos) return License::Cc0;
  // No-derivatives variants are not among the accepted licenses.
  if (h.find("-nd") != std::string::npos || h.find(" nd") != std::string::npos) return License::Other;
  if (h.find("by-nc-sa") != std::string::npos || h.find("cc by-nc-sa") != std::string::npos) return License::CcByNcSa;
  if (h.find("by-nc") != std::string::npos) return License::CcByNc;
  if (h.find("licenses/by/") != std::string::npos || h.find("cc by") != std::string::npos ||
      h.find("cc-by") != std::string::npos || h.find("licenses/by ") != std::string::npos)
    return License::CcBy;
  return License::Other;
}

struct FigureState {
  std::string id;
  std::string graphic;
  std::string caption;
  std::size_t depth = 0;          // stack depth of the `fig` element
  std::size_t caption_depth = 0;  // stack depth of `caption`, 0 when outside
};

struct ParseState {
  const ParseOptions* options = nullptr;
  std::vector<std::string> stack;
  bool root_checked = false;
  bool not_jats = false;
  std::string article_type_attr;

  std::string journal;
  bool journal_done = false;
  std::size_t journal_depth = 0;

  std::string title;
  bool title_done = false;
  std::size_t title_depth = 0;

  std::vector<std::pair<std::string, std::string>> article_ids;
  std::size_t id_depth = 0;
  std::string id_type;
  std::string id_text;

  std::string license_hints;
  std::size_t license_depth = 0;

  std::size_t body_depth = 0;
  std::string body;

  std::vector<FigureState> figs;  // open figures (innermost last)
  std::vector<FigurePair> figures;
  std::size_t skipped = 0;
  std::size_t fig_counter = 0;

  bool inside(std::string_view name) const {
    return std::any_of(stack.begin(), stack.end(), [&](const std::string& s) { return s == name; });
  }
};

void XMLCALL on_start(void* user, const XML_Char* qname, const XML_Char** attrs) {
  auto& st = *static_cast<ParseState*>(user);
  if (st.not_jats) return;
  const std::string name(local_name(qname));

  if (!st.root_checked) {
    st.root_checked = true;
    if (name != "article") {
      st.not_jats = true;
      return;
    }
    if (const char* t = find_attr(attrs, "article-type")) st.article_type_attr = t;
  }
  st.stack.push_back(name);
  const std::size_t depth = st.stack.size();
  const bool block = !inline_elements().contains(name);

  if (name == "journal-title" && !st.journal_done && st.inside("journal-meta")) st.journal_depth = depth;
  if (name == "article-title" && !st.title_done && st.inside("article-meta") && st.inside("title-group"))
    st.title_depth = depth;
  if (name == "article-id" && st.inside("article-meta")) {
    st.id_depth = depth;
    const char* t = find_attr(attrs, "pub-id-type");
    st.id_type = t ? t : "";
    st.id_text.clear();
  }
  if (name == "license" && st.inside("permissions")) {
    st.license_depth = depth;
    if (const char* href = find_attr_local(attrs, "href")) (st.license_hints += ' ') += href;
    if (const char* type = find_attr(attrs, "license-type")) (st.license_hints += ' ') += type;
  }
  if (st.license_depth && name == "ext-link") {
    if (const char* href = find_attr_local(attrs, "href")) (st.license_hints += ' ') += href;
  }
  if (name == "body" && st.body_depth == 0) st.body_depth = depth;
  if (st.body_depth && block) st.body.push_back(' ');

  if (name == "fig") {
    FigureState f;
    const char* id = find_attr(attrs, "id");
    f.id = id ? id : "fig" + std::to_string(st.fig_counter + 1);
    f.depth = depth;
    ++st.fig_counter;
    st.figs.push_back(std::move(f));
  } else if (!st.figs.empty()) {
    auto& f = st.figs.back();
    if (name == "graphic" && f.graphic.empty() && f.caption_depth == 0) {
      if (const char* href = find_attr_local(attrs, "href")) f.graphic = href;
    }
    if (name == "caption" && f.caption_depth == 0) f.caption_depth = depth;
    else if (f.caption_depth && block) f.caption.push_back(' ');
  }
}

void XMLCALL on_end(void* user, const XML_Char* /*qname*/) {
  auto& st = *static_cast<ParseState*>(user);
  if (st.not_jats || st.stack.empty()) return;
  const std::size_t depth = st.stack.size();
  const std::string name = st.stack.back();
  const bool block = !inline_elements().contains(name);

  if (st.journal_depth == depth) {
    st.journal_depth = 0;
    st.journal_done = !text::trim(st.journal).empty();
  }
  if (st.title_depth == depth) {
    st.title_depth = 0;
    st.title_done = !text::trim(st.title).empty();
  }
  if (st.id_depth == depth) {
    st.id_depth = 0;
    st.article_ids.emplace_back(st.id_type, std::string(text::trim(st.id_text)));
  }
  if (st.license_depth == depth) st.license_depth = 0;
  if (st.body_depth) {
    if (block) st.body.push_back(' ');
    if (st.body_depth == depth) st.body_depth = 0;
  }

  if (!st.figs.empty()) {
    auto& f = st.figs.back();
    if (f.depth == depth) {
      std::string caption = text::normalize_whitespace(f.caption);
      if (f.graphic.empty() || caption.empty()) {
        ++st.skipped;
      } else {
        FigurePair pair;
        pair.figure_id = f.id;
        pair.graphic_uri = f.graphic;
        pair.raw_caption = std::move(caption);
        st.figures.push_back(std::move(pair));
      }
      st.figs.pop_back();
    } else if (f.caption_depth == depth) {
      f.caption_depth = 0;
    } else if (f.caption_depth && block) {
      f.caption.push_back(' ');
    }
  }
  st.stack.pop_back();
}

void XMLCALL on_text(void* user, const XML_Char* s, int len) {
  auto& st = *static_cast<ParseState*>(user);
  if (st.not_jats) return;
  const std::string_view chunk(s, static_cast<std::size_t>(len));
  if (st.journal_depth) st.journal.append(chunk);
  if (st.title_depth) st.title.append(chunk);
  if (st.id_depth) st.id_text.append(chunk);
  if (st.license_depth) (st.license_hints += ' ') += chunk;
  if (st.body_depth) st.body.append(chunk);
  if (!st.figs.empty() && st.figs.back().caption_depth) st.figs.back().caption.append(chunk);
}

struct ParserDeleter {
  void operator()(XML_Parser p) const noexcept { XML_ParserFree(p); }
};

std::string pick_pmcid(const std::vector<std::pair<std::string, std::string>>& ids, const std::string& fallback) {
  for (const char* preferred : {"pmcid", "pmc"}) {
    for (const auto& [type, value] : ids) {
      if (type == preferred && !value.empty()) {
        return (text::istarts_with(value, "PMC") ? "" : "PMC") + value;
      }
    }
  }
  for (const auto& [type, value] : ids)
    if (!value.empty()) return value;
  return fallback;
}

ArticleType type_from_attr(std::string_view attr) {
  if (attr == "case-report") return ArticleType::CaseReport;
  if (attr == "research-article") return ArticleType::Research;
  if (attr == "review-article") return ArticleType::Review;
  return ArticleType::Other;
}

}  // namespace

ParsedArticle parse_article(std::string_view jats_document, const ParseOptions& options) {
  ParseState st;
  st.options = &options;

  std::unique_ptr<std::remove_pointer_t<XML_Parser>, ParserDeleter> parser(XML_ParserCreate("UTF-8"));
  if (!parser) throw Error(ErrorCode::Io, "cannot allocate XML parser");
  XML_SetUserData(parser.get(), &st);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);

  if (XML_Parse(parser.get(), jats_document.data(), static_cast<int>(jats_document.size()), XML_TRUE) ==
      XML_STATUS_ERROR) {
    if (st.not_jats) throw Error(ErrorCode::NotJats, "root element is not <article>");
    throw Error(ErrorCode::MalformedXml,
                std::string(XML_ErrorString(XML_GetErrorCode(parser.get()))) + " at line " +
                    std::to_string(XML_GetCurrentLineNumber(parser.get())));
  }
  if (st.not_jats) throw Error(ErrorCode::NotJats, "root element is not <article>");

  ParsedArticle out;
  auto& rec = out.record;
  rec.pmcid = pick_pmcid(st.article_ids, options.fallback_id);
  if (rec.pmcid.empty()) throw Error(ErrorCode::NotJats, "article carries no article-id");
  rec.journal = text::normalize_whitespace(st.journal);
  rec.title = text::normalize_whitespace(st.title);
  rec.license = classify_license(st.license_hints);
  out.body_text = text::normalize_whitespace(st.body);

  rec.article_type = type_from_attr(st.article_type_attr);
  if (detect_case_report(rec, out.body_text, options.case_reports)) rec.article_type = ArticleType::CaseReport;

  for (auto& f : st.figures) {
    f.article = rec.pmcid;
    f.issues = scan_caption_issues(f.raw_caption, options.scan);
  }
  out.figures = std::move(st.figures);
  rec.figure_count = out.figures.size();
  rec.skipped_figures = st.skipped;
  return out;
}

// ---------------------------------------------------------------------------
// Journal whitelist

JournalFilter::JournalFilter() {
  for (auto line : text::split_lines(templates::get("journals.txt"))) {
    if (!text::trim(line).empty()) keys_.push_back(key(line));
  }
  std::sort(keys_.begin(), keys_.end());
}

JournalFilter::JournalFilter(std::vector<std::string> journals) {
  for (const auto& j : journals) keys_.push_back(key(j));
  std::sort(keys_.begin(), keys_.end());
}

std::string JournalFilter::key(std::string_view journal) {
  std::string k;
  for (char c : text::to_lower_ascii(text::normalize_whitespace(journal))) {
    if (c == '&') {
      k += "and";
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      k.push_back(c);
    }
  }
  return k;
}

bool JournalFilter::accepts(std::string_view journal) const {
  return std::binary_search(keys_.begin(), keys_.end(), key(journal));
}

// ---------------------------------------------------------------------------
// Corpus

std::vector<std::filesystem::path> collect_inputs(const std::vector<std::filesystem::path>& inputs) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  auto wanted = [](const fs::path& p) { return p.extension() == ".xml" || p.extension() == ".nxml"; };
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& entry : fs::recursive_directory_iterator(in)) {
        if (entry.is_regular_file() && wanted(entry.path())) files.push_back(entry.path());
      }
    } else if (fs::is_regular_file(in)) {
      files.push_back(in);
    } else {
      throw Error(ErrorCode::Io, "no such input: " + in.string());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

CorpusResult extract_corpus(const std::vector<std::filesystem::path>& files, const ParseOptions& options,
                            const JournalFilter* filter, unsigned threads) {
  struct Slot {
    std::optional<ParsedArticle> article;
    std::optional<CorpusFailure> failure;
  };
  std::vector<Slot> slots(files.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      try {
        ParseOptions opts = options;
        if (opts.fallback_id.empty()) opts.fallback_id = files[i].stem().string();
        slots[i].article = parse_article(text::read_file(files[i].string()), opts);
      } catch (const Error& e) {
        slots[i].failure = CorpusFailure{files[i].string(), std::string(to_string(e.code())), e.what()};
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(files.size())));
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  CorpusResult result;
  for (auto& s : slots) {
    if (s.failure) {
      result.failures.push_back(std::move(*s.failure));
    } else if (filter && !filter->accepts(s.article->record.journal)) {
      ++result.filtered_out;
    } else {
      result.articles.push_back(std::move(*s.article));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::ordered_json to_json(const ArticleRecord& r) {
  nlohmann::ordered_json j;
  j["pmcid"] = r.pmcid;
  j["journal"] = r.journal;
  j["title"] = r.title;
  j["article_type"] = to_string(r.article_type);
  j["license"] = to_string(r.license);
  j["figure_count"] = r.figure_count;
  j["skipped_figures"] = r.skipped_figures;
  return j;
}

nlohmann::ordered_json to_json(const FigurePair& f) {
  nlohmann::ordered_json j;
  j["article"] = f.article;
  j["figure_id"] = f.figure_id;
  j["graphic_uri"] = f.graphic_uri;
  j["raw_caption"] = f.raw_caption;
  auto issues = nlohmann::ordered_json::array();
  for (const auto& i : f.issues) {
    nlohmann::ordered_json ij;
    ij["kind"] = to_string(i.kind);
    ij["span"] = {i.begin, i.end};
    ij["matched_text"] = i.matched_text;
    issues.push_back(std::move(ij));
  }
  j["issues"] = std::move(issues);
  j["revised_caption"] = f.revised_caption ? nlohmann::ordered_json(*f.revised_caption) : nullptr;
  if (f.revision_provenance) {
    j["provenance"] = *f.revision_provenance;
    j["weak_supervision"] = true;
  }
  return j;
}

FigurePair figure_from_json(const nlohmann::json& j) {
  try {
    FigurePair f;
    f.article = j.at("article").get<std::string>();
    f.figure_id = j.at("figure_id").get<std::string>();
    f.graphic_uri = j.at("graphic_uri").get<std::string>();
    f.raw_caption = j.at("raw_caption").get<std::string>();
    if (j.contains("issues")) {
      for (const auto& ij : j.at("issues")) {
        f.issues.push_back({issue_kind_from_string(ij.at("kind").get<std::string>()),
                            ij.at("span").at(0).get<std::size_t>(), ij.at("span").at(1).get<std::size_t>(),
                            ij.at("matched_text").get<std::string>()});
      }
    }
    if (j.contains("revised_caption") && !j.at("revised_caption").is_null())
      f.revised_caption = j.at("revised_caption").get<std::string>();
    if (j.contains("provenance")) f.revision_provenance = j.at("provenance").get<std::string>();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadInput, std::string("bad figure record: ") + e.what());
  }
}

}  // namespace volmo::jats
