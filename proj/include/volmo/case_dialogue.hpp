#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace volmo::dialogue {

struct Symptom {
  std::string description;
  std::optional<std::string> duration;
  std::optional<std::string> progression;
  friend bool operator==(const Symptom&, const Symptom&) = default;
};

struct ExamFinding {
  std::string exam_type;
  std::string finding;
  std::optional<std::string> note;
  friend bool operator==(const ExamFinding&, const ExamFinding&) = default;
};

struct ImagingStudy {
  std::string imaging_type;
  std::string finding;
  std::optional<std::string> key_results;
  friend bool operator==(const ImagingStudy&, const ImagingStudy&) = default;
};

struct DiagnosisEntry {
  std::string diagnosis;
  std::string severity;
  friend bool operator==(const DiagnosisEntry&, const DiagnosisEntry&) = default;
};

struct PrimaryDiagnosis {
  std::string diagnosis;
  std::string severity;
  std::string justification;
  friend bool operator==(const PrimaryDiagnosis&, const PrimaryDiagnosis&) = default;
};

struct AssessmentEntry {
  std::string assessment;
  std::string plan;
  friend bool operator==(const AssessmentEntry&, const AssessmentEntry&) = default;
};

struct Treatment {
  std::string treatment;
  std::optional<std::string> immediate_outcome;
  std::optional<std::string> long_term_outcome;
  std::optional<std::string> justification;
  friend bool operator==(const Treatment&, const Treatment&) = default;
};

struct FollowUp {
  std::string care;
  std::optional<std::string> justification;
  std::optional<std::string> prognosis;
  std::optional<std::string> unexpected_outcomes;
  friend bool operator==(const FollowUp&, const FollowUp&) = default;
};

/// Structured case report. The first seven fields (histories through imaging,
/// plus image_refs) form the presented profile; the rest are per-task gold.
struct ClinicalProfile {
  std::string case_id;
  std::vector<std::string> medical_history;
  std::vector<std::string> ocular_history;
  std::vector<std::string> family_history;
  std::vector<Symptom> symptoms;
  std::vector<ExamFinding> examination_findings;
  std::vector<ImagingStudy> diagnostic_imaging;
  std::vector<std::string> image_refs;

  std::vector<DiagnosisEntry> differential_diagnoses;
  std::optional<PrimaryDiagnosis> primary_diagnosis;
  std::vector<AssessmentEntry> assessments;
  std::vector<Treatment> treatments;
  std::vector<FollowUp> follow_up;

  friend bool operator==(const ClinicalProfile&, const ClinicalProfile&) = default;
};

/// Throws Error(InvalidProfile) naming the first violated field.
void validate_profile(const ClinicalProfile& profile);

/// Bracketed section headers, in render order.
const std::vector<std::string>& section_headers();

std::string render_profile(const ClinicalProfile& profile);

/// Inverse of render_profile for the presented fields. case_id and gold
/// fields are left empty. Throws Error(InvalidProfile) on unrecognized lines.
ClinicalProfile parse_profile_text(std::string_view text);

enum class Task { Differential, MostLikely, AssessmentPlan, Treatments, FollowUp };
inline constexpr std::array<Task, 5> kTaskOrder{Task::Differential, Task::MostLikely, Task::AssessmentPlan,
                                                Task::Treatments, Task::FollowUp};

std::string_view to_string(Task t) noexcept;
Task task_from_string(std::string_view s);

/// Byte-exact task block; the differential block still holds `{profile}`.
std::string_view task_template(Task t);
/// Text following "### Expected Output Format ###" in the task block.
std::string expected_output_format(Task t);

struct DialogueTurn {
  Task task;
  std::string prompt;
  std::string expected_output_format;
  /// Serialized gold answer in the expected output format; empty when the
  /// profile lacks gold for this task (prompt_only).
  std::optional<std::string> gold;
  bool prompt_only = false;
};

struct DialogueScript {
  std::string case_id;
  std::vector<DialogueTurn> turns;
  std::vector<std::string> image_refs;
};

DialogueScript build_dialogue(const ClinicalProfile& profile);

struct AnswerEntry {
  /// Canonical snake_case keys (diagnosis, severity, long_term_outcome, ...).
  std::map<std::string, std::string> fields;
  /// Keys not expected for the task, verbatim.
  std::map<std::string, std::string> extras;
  std::string line;
};

struct AnswerReport {
  std::vector<AnswerEntry> entries;
  std::size_t well_formed = 0;
  std::size_t malformed = 0;
  /// Well-formed lines that repeat an earlier entry.
  std::size_t duplicates = 0;
  std::vector<std::string> malformed_lines;
};

/// Total: never throws, whatever the input.
AnswerReport parse_structured_answer(Task task, std::string_view raw) noexcept;

nlohmann::ordered_json to_json(const ClinicalProfile& profile);
ClinicalProfile profile_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const DialogueScript& script);
nlohmann::ordered_json to_json(const AnswerReport& report);

}  // namespace volmo::dialogue
