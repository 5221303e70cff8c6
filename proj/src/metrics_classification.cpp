#include "volmo/metrics_classification.hpp"

#include <fmt/format.h>

#include "volmo/error.hpp"
#include "volmo/text_util.hpp"

namespace volmo::metrics {

namespace {

bool is_alnum(char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// 2TP / (2TP + FP + FN): the harmonic mean of precision and recall, rounded once.
double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) { return ratio(2 * tp, 2 * tp + fp + fn); }

void check_lengths(std::size_t golds, std::size_t preds) {
  if (golds != preds)
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(golds) + " gold labels but " + std::to_string(preds) + " predictions");
  if (golds == 0) throw Error(ErrorCode::EmptyInput, "nothing to score");
}

}  // namespace

ParsedLabel parse_binary_label(std::string_view raw) noexcept {
  ParsedLabel out;
  try {
    out.raw = std::string(raw);
    for (std::size_t i = 0; i < raw.size();) {
      if (!is_alnum(raw[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < raw.size() && is_alnum(raw[j])) ++j;
      const auto word = raw.substr(i, j - i);
      if (text::iequals(word, "true") || text::iequals(word, "false")) {
        out.kind = text::iequals(word, "true") ? ParsedLabel::Kind::True : ParsedLabel::Kind::False;
        out.rule_fired = "true_false_token";
        return out;
      }
      if (text::iequals(word, "yes") || text::iequals(word, "no")) {
        out.kind = text::iequals(word, "yes") ? ParsedLabel::Kind::True : ParsedLabel::Kind::False;
        out.rule_fired = "yes_no_alias";
        return out;
      }
      i = j;
    }
    out.rule_fired = "none";
  } catch (...) {
    out.kind = ParsedLabel::Kind::Invalid;
  }
  return out;
}

ParsedLabel parse_stage_label(std::string_view raw, const std::set<int>& valid_stages) noexcept {
  ParsedLabel out;
  try {
    out.raw = std::string(raw);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const char c = raw[i];
      if (c < '0' || c > '9') continue;
      const bool left_ok = i == 0 || !is_alnum(raw[i - 1]);
      const bool right_ok = i + 1 == raw.size() || !is_alnum(raw[i + 1]);
      if (!left_ok || !right_ok) continue;
      const int stage = c - '0';
      if (valid_stages.count(stage)) {
        out.kind = ParsedLabel::Kind::Stage;
        out.stage = stage;
        out.rule_fired = "standalone_digit";
        return out;
      }
    }
    out.rule_fired = "none";
  } catch (...) {
    out.kind = ParsedLabel::Kind::Invalid;
  }
  return out;
}

ClassificationScores scores_from_counts(const ConfusionCounts& c) {
  ClassificationScores s;
  s.precision = ratio(c.tp, c.tp + c.fp);
  s.recall = ratio(c.tp, c.tp + c.fn);
  s.specificity = ratio(c.tn, c.tn + c.fp);
  s.f1 = f1_of(c.tp, c.fp, c.fn);
  s.positive_class_f1 = s.f1;
  const double negative_f1 = f1_of(c.tn, c.fn, c.fp);
  s.class_macro_f1 = (s.positive_class_f1 + negative_f1) / 2.0;
  return s;
}

BinaryResult score_binary(const std::vector<bool>& golds, const std::vector<ParsedLabel>& preds) {
  check_lengths(golds.size(), preds.size());
  BinaryResult out;
  std::size_t invalid = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const bool gold = golds[i];
    bool pred;
    switch (preds[i].kind) {
      case ParsedLabel::Kind::True: pred = true; break;
      case ParsedLabel::Kind::False: pred = false; break;
      default:
        ++invalid;
        pred = !gold;
    }
    auto& c = out.counts;
    if (pred && gold) ++c.tp;
    else if (pred && !gold) ++c.fp;
    else if (!pred && gold) ++c.fn;
    else ++c.tn;
  }
  out.scores = scores_from_counts(out.counts);
  out.invalid_rate = ratio(invalid, golds.size());
  return out;
}

StageScores score_stages(const std::vector<int>& golds, const std::vector<ParsedLabel>& preds,
                         const std::set<int>& valid_stages) {
  check_lengths(golds.size(), preds.size());
  constexpr int kNoStage = -1;
  std::set<int> present;
  for (int g : golds) {
    if (!valid_stages.count(g)) throw Error(ErrorCode::LabelOutOfRange, "gold stage " + std::to_string(g) + " is not valid");
    present.insert(g);
  }

  StageScores out;
  std::size_t invalid = 0;
  std::vector<int> predicted(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool ok = preds[i].kind == ParsedLabel::Kind::Stage;
    if (!ok) ++invalid;
    predicted[i] = ok ? preds[i].stage : kNoStage;
  }

  for (int s : present) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < golds.size(); ++i) {
      const bool gold = golds[i] == s;
      const bool pred = predicted[i] == s;
      if (pred && gold) ++c.tp;
      else if (pred) ++c.fp;
      else if (gold) ++c.fn;
      else ++c.tn;
    }
    out.per_stage_counts[s] = c;
    out.per_stage[s] = scores_from_counts(c);
  }

  const double n = static_cast<double>(out.per_stage.size());
  for (const auto& [stage, sc] : out.per_stage) {
    out.overall.precision += sc.precision / n;
    out.overall.recall += sc.recall / n;
    out.overall.specificity += sc.specificity / n;
    out.overall.f1 += sc.f1 / n;
    out.overall.positive_class_f1 += sc.positive_class_f1 / n;
    out.overall.class_macro_f1 += sc.class_macro_f1 / n;
  }
  out.invalid_rate = ratio(invalid, golds.size());
  return out;
}

double macro_over_conditions(const std::map<std::string, ClassificationScores>& per_condition, F1Field field) {
  if (per_condition.empty()) throw Error(ErrorCode::EmptyInput, "no conditions to average");
  double sum = 0.0;
  for (const auto& [name, s] : per_condition) sum += field == F1Field::PositiveClass ? s.positive_class_f1 : s.class_macro_f1;
  return sum / static_cast<double>(per_condition.size());
}

std::map<std::string, ManualMeans> aggregate_manual(const std::vector<RaterScore>& scores) {
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "no manual scores");
  struct Sums {
    double c = 0, a = 0, r = 0;
    std::size_t n = 0;
  };
  std::map<std::string, std::map<std::string, Sums>> by_model;
  for (const auto& s : scores) {
    for (int v : {s.conciseness, s.accuracy, s.readability})
      if (v < 1 || v > 5)
        throw Error(ErrorCode::LabelOutOfRange,
                    "manual score " + std::to_string(v) + " for sample " + s.sample_id + " is outside 1..5");
    auto& sum = by_model[s.model_id][s.rater_id];
    sum.c += s.conciseness;
    sum.a += s.accuracy;
    sum.r += s.readability;
    ++sum.n;
  }

  std::map<std::string, ManualMeans> out;
  for (const auto& [model, raters] : by_model) {
    ManualMeans m;
    for (const auto& [rater, sum] : raters) {
      const double n = static_cast<double>(sum.n);
      ManualMeans r{sum.c / n, sum.a / n, sum.r / n, {}};
      m.conciseness += r.conciseness;
      m.accuracy += r.accuracy;
      m.readability += r.readability;
      m.per_rater.emplace(rater, std::move(r));
    }
    const double k = static_cast<double>(raters.size());
    m.conciseness /= k;
    m.accuracy /= k;
    m.readability /= k;
    out.emplace(model, std::move(m));
  }
  return out;
}

std::string format_manual(double mean) { return fmt::format("{:.2f}", mean); }

nlohmann::ordered_json to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

nlohmann::ordered_json to_json(const ClassificationScores& s) {
  return {{"precision", s.precision},
          {"recall", s.recall},
          {"sensitivity", s.recall},
          {"specificity", s.specificity},
          {"f1", s.f1},
          {"positive_class_f1", s.positive_class_f1},
          {"class_macro_f1", s.class_macro_f1}};
}

nlohmann::ordered_json to_json(const StageScores& s) {
  nlohmann::ordered_json j;
  j["per_stage"] = nlohmann::ordered_json::object();
  for (const auto& [stage, sc] : s.per_stage) {
    auto entry = to_json(sc);
    entry["counts"] = to_json(s.per_stage_counts.at(stage));
    j["per_stage"][std::to_string(stage)] = std::move(entry);
  }
  j["overall"] = to_json(s.overall);
  j["invalid_rate"] = s.invalid_rate;
  return j;
}

nlohmann::ordered_json to_json(const std::map<std::string, ManualMeans>& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [model, means] : m) {
    nlohmann::ordered_json e;
    e["conciseness"] = format_manual(means.conciseness);
    e["accuracy"] = format_manual(means.accuracy);
    e["readability"] = format_manual(means.readability);
    e["per_rater"] = nlohmann::ordered_json::object();
    for (const auto& [rater, r] : means.per_rater)
      e["per_rater"][rater] = {{"conciseness", r.conciseness}, {"accuracy", r.accuracy}, {"readability", r.readability}};
    j[model] = std::move(e);
  }
  return j;
}

}  // namespace volmo::metrics
