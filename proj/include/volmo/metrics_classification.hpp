#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace volmo::metrics {

struct ParsedLabel {
  enum class Kind { True, False, Stage, Invalid };

  std::string raw;
  Kind kind = Kind::Invalid;
  int stage = -1;  // meaningful for Kind::Stage
  std::string rule_fired;

  bool invalid() const noexcept { return kind == Kind::Invalid; }
};

/// First standalone TRUE/FALSE (or YES/NO) token, case-insensitive. Never throws.
ParsedLabel parse_binary_label(std::string_view raw) noexcept;

/// First standalone single digit that belongs to `valid_stages`. Never throws.
ParsedLabel parse_stage_label(std::string_view raw, const std::set<int>& valid_stages) noexcept;

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const noexcept { return tp + fp + fn + tn; }
};

struct ClassificationScores {
  double precision = 0.0;
  double recall = 0.0;  // sensitivity
  double specificity = 0.0;
  double f1 = 0.0;
  double positive_class_f1 = 0.0;
  double class_macro_f1 = 0.0;
};

/// Zero denominators yield 0.
ClassificationScores scores_from_counts(const ConfusionCounts& c);

struct BinaryResult {
  ConfusionCounts counts;
  ClassificationScores scores;
  double invalid_rate = 0.0;
};

/// INVALID (or stage-valued) predictions count as the label opposite the gold.
/// Throws LengthMismatch or EmptyInput.
BinaryResult score_binary(const std::vector<bool>& golds, const std::vector<ParsedLabel>& preds);

struct StageScores {
  std::map<int, ClassificationScores> per_stage;
  std::map<int, ConfusionCounts> per_stage_counts;
  ClassificationScores overall;  // macro mean over stages with at least one gold
  double invalid_rate = 0.0;
};

/// One-vs-rest per stage; INVALID predicts a reserved non-stage.
/// Throws LengthMismatch, EmptyInput, or LabelOutOfRange for golds outside
/// `valid_stages`.
StageScores score_stages(const std::vector<int>& golds, const std::vector<ParsedLabel>& preds,
                         const std::set<int>& valid_stages);

enum class F1Field { PositiveClass, ClassMacro };

/// Unweighted mean of the chosen F1 over conditions. Throws EmptyInput.
double macro_over_conditions(const std::map<std::string, ClassificationScores>& per_condition,
                             F1Field field = F1Field::PositiveClass);

struct RaterScore {
  std::string model_id;
  std::string sample_id;
  std::string rater_id;
  int conciseness = 0;
  int accuracy = 0;
  int readability = 0;
};

struct ManualMeans {
  double conciseness = 0.0;
  double accuracy = 0.0;
  double readability = 0.0;
  std::map<std::string, ManualMeans> per_rater;  // filled on the model level only
};

/// Per model: each rater's mean over samples, then the unweighted mean over
/// raters. Throws EmptyInput, or LabelOutOfRange for scores outside 1..5.
std::map<std::string, ManualMeans> aggregate_manual(const std::vector<RaterScore>& scores);

/// Two-decimal rendering used for manual scores ("4.43").
std::string format_manual(double mean);

nlohmann::ordered_json to_json(const ConfusionCounts& c);
nlohmann::ordered_json to_json(const ClassificationScores& s);
nlohmann::ordered_json to_json(const StageScores& s);
nlohmann::ordered_json to_json(const std::map<std::string, ManualMeans>& m);

}  // namespace volmo::metrics
