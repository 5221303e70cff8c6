#include "volmo/case_dialogue.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <span>

#include "volmo/error.hpp"
#include "volmo/templates.hpp"
#include "volmo/text_util.hpp"

namespace volmo::dialogue {

namespace {

constexpr std::string_view kProfileHeader = "[PATIENT CLINICAL PROFILE]";
constexpr std::string_view kMedicalHeader = "[MEDICAL HISTORY]";
constexpr std::string_view kFamilyHeader = "[FAMILY HISTORY]";
constexpr std::string_view kSymptomsHeader = "[SYMPTOMS]";
constexpr std::string_view kExamHeader = "[EXAMINATION FINDINGS]";
constexpr std::string_view kImagingHeader = "[DIAGNOSTIC IMAGING]";
constexpr std::string_view kNoFamilyHistory = "No family history reported";

struct KeySpec {
  std::string_view label;  // as rendered, e.g. "Long-term outcome"
  std::string_view id;     // canonical snake_case
};

struct Field {
  std::string label;
  std::string id;  // empty for unknown keys and keyless leading text
  std::string value;
};

/// Returns the length of "<label>:" when `s` starts with it (case-insensitive).
std::size_t match_known(std::string_view s, std::span<const KeySpec> keys, const KeySpec** which) {
  std::size_t best = 0;
  for (const auto& k : keys) {
    if (s.size() > k.label.size() && text::istarts_with(s, k.label) && s[k.label.size()] == ':' &&
        k.label.size() + 1 > best) {
      best = k.label.size() + 1;
      *which = &k;
    }
  }
  return best;
}

/// Unknown key: up to four words of [A-Za-z0-9()/-], then ':' and a space or end.
std::size_t match_unknown(std::string_view s) {
  if (s.empty() || !((s[0] >= 'A' && s[0] <= 'Z') || (s[0] >= 'a' && s[0] <= 'z'))) return 0;
  int words = 1;
  for (std::size_t i = 0; i < s.size() && i < 48; ++i) {
    const char c = s[i];
    if (c == ':') {
      if (i + 1 == s.size() || s[i + 1] == ' ') return i + 1;
      return 0;
    }
    if (c == ' ') {
      if (++words > 4) return 0;
      continue;
    }
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '(' || c == ')' || c == '/';
    if (!ok) return 0;
  }
  return 0;
}

/// Splits "Key: value; Key: value" only before recognized `Key:` tokens so
/// values keep their own semicolons.
std::vector<Field> split_fields(std::string_view body, std::span<const KeySpec> keys, bool allow_unknown) {
  std::vector<Field> fields;
  auto key_at = [&](std::string_view s, Field& f) -> std::size_t {
    const KeySpec* k = nullptr;
    if (auto n = match_known(s, keys, &k)) {
      f.label = std::string(k->label);
      f.id = std::string(k->id);
      return n;
    }
    if (allow_unknown) {
      if (auto n = match_unknown(s)) {
        f.label = std::string(s.substr(0, n - 1));
        return n;
      }
    }
    return 0;
  };

  std::size_t pos = 0;
  while (pos <= body.size()) {
    Field f;
    const std::size_t key_len = key_at(body.substr(pos), f);
    std::size_t value_start = pos + key_len;
    std::size_t boundary = body.size();
    for (auto sep = body.find("; ", value_start); sep != std::string_view::npos; sep = body.find("; ", sep + 1)) {
      Field probe;
      if (key_at(body.substr(sep + 2), probe)) {
        boundary = sep;
        break;
      }
    }
    f.value = std::string(text::trim(body.substr(value_start, boundary - value_start)));
    fields.push_back(std::move(f));
    if (boundary == body.size()) break;
    pos = boundary + 2;
  }
  return fields;
}

const std::regex& numbered_line() {
  static const std::regex re(R"(^\s*(\d+)[.)]\s*(.*?)\s*$)");
  return re;
}

constexpr KeySpec kProfileKeys[] = {
    {"Medical History", "medical_history"}, {"Ocular History", "ocular_history"},
    {"Family History", "family_history"},   {"Symptom", "symptom"},
    {"Duration", "duration"},               {"Progression", "progression"},
    {"Examination Type", "exam_type"},      {"Finding", "finding"},
    {"Note", "note"},                       {"Imaging Type", "imaging_type"},
    {"Key Results", "key_results"},         {"Image Reference", "image_ref"},
};

void append_opt(std::string& line, std::string_view label, const std::optional<std::string>& v) {
  if (v) ((line += "; ") += label) += ": " + *v;
}

std::string join_numbered(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + lines[i];
  }
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidProfile, what);
}

bool blank(std::string_view s) { return text::trim(s).empty(); }

}  // namespace

// ---------------------------------------------------------------------------

void validate_profile(const ClinicalProfile& p) {
  require(!blank(p.case_id), "case_id is empty");
  for (const auto& s : p.medical_history) require(!blank(s), "empty medical_history entry");
  for (const auto& s : p.ocular_history) require(!blank(s), "empty ocular_history entry");
  for (const auto& s : p.family_history) require(!blank(s), "empty family_history entry");
  for (const auto& s : p.symptoms) require(!blank(s.description), "symptom without description");
  for (const auto& e : p.examination_findings) require(!blank(e.finding), "examination entry without finding");
  for (const auto& e : p.diagnostic_imaging) require(!blank(e.finding), "imaging entry without finding");
  for (const auto& d : p.differential_diagnoses) require(!blank(d.diagnosis), "differential entry without diagnosis");
  if (p.primary_diagnosis) require(!blank(p.primary_diagnosis->diagnosis), "primary diagnosis is empty");
  for (const auto& a : p.assessments) require(!blank(a.assessment), "assessment entry without assessment");
  for (const auto& t : p.treatments) require(!blank(t.treatment), "treatment entry without treatment");
  for (const auto& f : p.follow_up) require(!blank(f.care), "follow-up entry without care");
  for (const auto& r : p.image_refs) require(!blank(r), "empty image reference");
}

const std::vector<std::string>& section_headers() {
  static const std::vector<std::string> headers{std::string(kProfileHeader), std::string(kMedicalHeader),
                                                std::string(kFamilyHeader),  std::string(kSymptomsHeader),
                                                std::string(kExamHeader),    std::string(kImagingHeader)};
  return headers;
}

std::string render_profile(const ClinicalProfile& p) {
  std::vector<std::string> sections{std::string(kProfileHeader)};
  auto section = [&](std::string_view header, const std::vector<std::string>& lines) {
    if (!lines.empty()) sections.push_back(std::string(header) + "\n" + join_numbered(lines));
  };

  std::vector<std::string> history;
  for (const auto& h : p.medical_history) history.push_back("Medical History: " + h);
  for (const auto& h : p.ocular_history) history.push_back("Ocular History: " + h);
  section(kMedicalHeader, history);

  if (p.family_history.empty()) {
    sections.push_back(std::string(kFamilyHeader) + "\n" + std::string(kNoFamilyHistory));
  } else {
    std::vector<std::string> family;
    for (const auto& h : p.family_history) family.push_back("Family History: " + h);
    section(kFamilyHeader, family);
  }

  std::vector<std::string> symptoms;
  for (const auto& s : p.symptoms) {
    std::string line = "Symptom: " + s.description;
    append_opt(line, "Duration", s.duration);
    append_opt(line, "Progression", s.progression);
    symptoms.push_back(std::move(line));
  }
  section(kSymptomsHeader, symptoms);

  std::vector<std::string> exams;
  for (const auto& e : p.examination_findings) {
    std::string line = "Examination Type: " + e.exam_type + "; Finding: " + e.finding;
    append_opt(line, "Note", e.note);
    exams.push_back(std::move(line));
  }
  section(kExamHeader, exams);

  std::vector<std::string> imaging;
  for (const auto& i : p.diagnostic_imaging) {
    std::string line = "Imaging Type: " + i.imaging_type + "; Finding: " + i.finding;
    append_opt(line, "Key Results", i.key_results);
    imaging.push_back(std::move(line));
  }
  for (const auto& r : p.image_refs) imaging.push_back("Image Reference: " + r);
  section(kImagingHeader, imaging);

  std::string out;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i) out += "\n\n";
    out += sections[i];
  }
  return out;
}

ClinicalProfile parse_profile_text(std::string_view body) {
  ClinicalProfile p;
  std::string_view section;
  std::size_t line_no = 0;
  for (auto raw : text::split_lines(body)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      const auto& headers = section_headers();
      require(std::find(headers.begin(), headers.end(), line) != headers.end(),
              "unknown section " + std::string(line));
      section = line;
      continue;
    }
    if (section == kFamilyHeader && line == kNoFamilyHistory) continue;

    std::smatch m;
    const std::string owned(line);
    require(std::regex_match(owned, m, numbered_line()), "line " + std::to_string(line_no) + " is not a numbered entry");
    const auto fields = split_fields(m[2].str(), kProfileKeys, false);
    auto get = [&](std::string_view id) -> std::optional<std::string> {
      for (const auto& f : fields)
        if (f.id == id) return f.value;
      return std::nullopt;
    };
    const std::string& lead = fields.front().id;
    const std::string& value = fields.front().value;
    if (lead == "medical_history") p.medical_history.push_back(value);
    else if (lead == "ocular_history") p.ocular_history.push_back(value);
    else if (lead == "family_history") p.family_history.push_back(value);
    else if (lead == "symptom") p.symptoms.push_back({value, get("duration"), get("progression")});
    else if (lead == "exam_type") p.examination_findings.push_back({value, get("finding").value_or(""), get("note")});
    else if (lead == "imaging_type") p.diagnostic_imaging.push_back({value, get("finding").value_or(""), get("key_results")});
    else if (lead == "image_ref") p.image_refs.push_back(value);
    else require(false, "line " + std::to_string(line_no) + " has no recognized key");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Dialogue

std::string_view to_string(Task t) noexcept {
  switch (t) {
    case Task::Differential: return "differential";
    case Task::MostLikely: return "most_likely";
    case Task::AssessmentPlan: return "assessment_plan";
    case Task::Treatments: return "treatments";
    case Task::FollowUp: return "follow_up";
  }
  return "differential";
}

Task task_from_string(std::string_view s) {
  for (auto t : kTaskOrder)
    if (to_string(t) == s) return t;
  throw Error(ErrorCode::BadInput, "unknown task: " + std::string(s));
}

std::string_view task_template(Task t) {
  switch (t) {
    case Task::Differential: return templates::get("dialogue/01_differential.txt");
    case Task::MostLikely: return templates::get("dialogue/02_most_likely.txt");
    case Task::AssessmentPlan: return templates::get("dialogue/03_assessment_plan.txt");
    case Task::Treatments: return templates::get("dialogue/04_treatments.txt");
    case Task::FollowUp: return templates::get("dialogue/05_follow_up.txt");
  }
  return {};
}

std::string expected_output_format(Task t) {
  constexpr std::string_view kMarker = "### Expected Output Format ###\n";
  const auto tpl = task_template(t);
  const auto start = tpl.find(kMarker);
  if (start == std::string_view::npos) return {};
  auto rest = tpl.substr(start + kMarker.size());
  const auto end = rest.rfind("\n#");
  return std::string(end == std::string_view::npos ? rest : rest.substr(0, end));
}

namespace {

std::optional<std::string> gold_for(Task task, const ClinicalProfile& p) {
  std::vector<std::string> lines;
  switch (task) {
    case Task::Differential:
      if (p.differential_diagnoses.empty()) return std::nullopt;
      for (const auto& d : p.differential_diagnoses) lines.push_back("Diagnosis: " + d.diagnosis + "; Severity: " + d.severity);
      return "[DIFFERENTIAL DIAGNOSIS]\n" + join_numbered(lines);
    case Task::MostLikely:
      if (!p.primary_diagnosis) return std::nullopt;
      return "Diagnosis: " + p.primary_diagnosis->diagnosis + "; Severity: " + p.primary_diagnosis->severity +
             "; Justification: " + p.primary_diagnosis->justification;
    case Task::AssessmentPlan:
      if (p.assessments.empty()) return std::nullopt;
      for (const auto& a : p.assessments) lines.push_back("Assessment: " + a.assessment + "; Plan: " + a.plan);
      return join_numbered(lines);
    case Task::Treatments:
      if (p.treatments.empty()) return std::nullopt;
      for (const auto& t : p.treatments) {
        std::string line = "Treatment: " + t.treatment;
        append_opt(line, "Immediate outcome", t.immediate_outcome);
        append_opt(line, "Long-term outcome", t.long_term_outcome);
        append_opt(line, "Justification", t.justification);
        lines.push_back(std::move(line));
      }
      return join_numbered(lines);
    case Task::FollowUp:
      if (p.follow_up.empty()) return std::nullopt;
      for (const auto& f : p.follow_up) {
        std::string line = "Follow-up care: " + f.care;
        append_opt(line, "Justification", f.justification);
        append_opt(line, "Prognosis", f.prognosis);
        append_opt(line, "Unexpected outcomes", f.unexpected_outcomes);
        lines.push_back(std::move(line));
      }
      return join_numbered(lines);
  }
  return std::nullopt;
}

}  // namespace

DialogueScript build_dialogue(const ClinicalProfile& profile) {
  validate_profile(profile);
  DialogueScript script;
  script.case_id = profile.case_id;
  script.image_refs = profile.image_refs;
  for (auto task : kTaskOrder) {
    DialogueTurn turn;
    turn.task = task;
    turn.prompt = task == Task::Differential
                      ? text::substitute_once(task_template(task), "{profile}", render_profile(profile))
                      : std::string(task_template(task));
    turn.expected_output_format = expected_output_format(task);
    turn.gold = gold_for(task, profile);
    turn.prompt_only = !turn.gold.has_value();
    script.turns.push_back(std::move(turn));
  }
  return script;
}

// ---------------------------------------------------------------------------
// Answer parsing

namespace {

struct TaskKeys {
  std::vector<KeySpec> keys;
  std::string_view primary;
};

const TaskKeys& keys_for(Task t) {
  static const TaskKeys differential{{{"Diagnosis", "diagnosis"}, {"Severity", "severity"}}, "diagnosis"};
  static const TaskKeys most_likely{
      {{"Diagnosis", "diagnosis"}, {"Severity", "severity"}, {"Justification", "justification"}}, "diagnosis"};
  static const TaskKeys assessment{{{"Assessment", "assessment"}, {"Plan", "plan"}}, "assessment"};
  static const TaskKeys treatments{{{"Treatment", "treatment"},
                                    {"Immediate outcome", "immediate_outcome"},
                                    {"Long-term outcome", "long_term_outcome"},
                                    {"Justification", "justification"}},
                                   "treatment"};
  static const TaskKeys follow_up{{{"Follow-up care", "follow_up_care"},
                                   {"Justification", "justification"},
                                   {"Prognosis", "prognosis"},
                                   {"Unexpected outcomes", "unexpected_outcomes"}},
                                  "follow_up_care"};
  switch (t) {
    case Task::Differential: return differential;
    case Task::MostLikely: return most_likely;
    case Task::AssessmentPlan: return assessment;
    case Task::Treatments: return treatments;
    case Task::FollowUp: return follow_up;
  }
  return differential;
}

}  // namespace

AnswerReport parse_structured_answer(Task task, std::string_view raw) noexcept {
  AnswerReport report;
  try {
    const auto& spec = keys_for(task);
    std::set<std::string> seen;
    for (auto raw_line : text::split_lines(raw)) {
      const std::string line(text::trim(raw_line));
      if (line.empty()) continue;
      std::string body;
      std::smatch m;
      if (std::regex_match(line, m, numbered_line())) {
        body = m[2].str();
      } else if (task == Task::MostLikely) {
        const KeySpec* k = nullptr;
        if (!match_known(line, spec.keys, &k)) continue;
        body = line;
      } else {
        continue;
      }

      AnswerEntry entry;
      entry.line = line;
      for (auto& f : split_fields(body, spec.keys, true)) {
        if (!f.id.empty()) {
          entry.fields.try_emplace(f.id, std::move(f.value));
        } else if (!f.label.empty()) {
          entry.extras.try_emplace(f.label, std::move(f.value));
        }
      }
      auto primary = entry.fields.find(std::string(spec.primary));
      if (primary == entry.fields.end() || primary->second.empty()) {
        ++report.malformed;
        report.malformed_lines.push_back(line);
        continue;
      }
      ++report.well_formed;
      if (!seen.insert(body).second) ++report.duplicates;
      report.entries.push_back(std::move(entry));
    }
  } catch (...) {
    // Only allocation failure can land here; report what was parsed so far.
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using ojson = nlohmann::ordered_json;

ojson opt(const std::optional<std::string>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<std::string> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

std::vector<std::string> strings_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

}  // namespace

nlohmann::ordered_json to_json(const ClinicalProfile& p) {
  ojson j;
  j["case_id"] = p.case_id;
  j["medical_history"] = p.medical_history;
  j["ocular_history"] = p.ocular_history;
  j["family_history"] = p.family_history;
  j["symptoms"] = ojson::array();
  for (const auto& s : p.symptoms)
    j["symptoms"].push_back({{"description", s.description}, {"duration", opt(s.duration)}, {"progression", opt(s.progression)}});
  j["examination_findings"] = ojson::array();
  for (const auto& e : p.examination_findings)
    j["examination_findings"].push_back({{"exam_type", e.exam_type}, {"finding", e.finding}, {"note", opt(e.note)}});
  j["diagnostic_imaging"] = ojson::array();
  for (const auto& i : p.diagnostic_imaging)
    j["diagnostic_imaging"].push_back(
        {{"imaging_type", i.imaging_type}, {"finding", i.finding}, {"key_results", opt(i.key_results)}});
  j["differential_diagnoses"] = ojson::array();
  for (const auto& d : p.differential_diagnoses)
    j["differential_diagnoses"].push_back({{"diagnosis", d.diagnosis}, {"severity", d.severity}});
  if (p.primary_diagnosis) {
    j["primary_diagnosis"] = {{"diagnosis", p.primary_diagnosis->diagnosis},
                              {"severity", p.primary_diagnosis->severity},
                              {"justification", p.primary_diagnosis->justification}};
  } else {
    j["primary_diagnosis"] = nullptr;
  }
  j["assessments"] = ojson::array();
  for (const auto& a : p.assessments) j["assessments"].push_back({{"assessment", a.assessment}, {"plan", a.plan}});
  j["treatments"] = ojson::array();
  for (const auto& t : p.treatments)
    j["treatments"].push_back({{"treatment", t.treatment},
                               {"immediate_outcome", opt(t.immediate_outcome)},
                               {"long_term_outcome", opt(t.long_term_outcome)},
                               {"justification", opt(t.justification)}});
  j["follow_up"] = ojson::array();
  for (const auto& f : p.follow_up)
    j["follow_up"].push_back({{"care", f.care},
                              {"justification", opt(f.justification)},
                              {"prognosis", opt(f.prognosis)},
                              {"unexpected_outcomes", opt(f.unexpected_outcomes)}});
  j["image_refs"] = p.image_refs;
  return j;
}

ClinicalProfile profile_from_json(const nlohmann::json& j) {
  try {
    ClinicalProfile p;
    p.case_id = j.at("case_id").get<std::string>();
    p.medical_history = strings_from(j, "medical_history");
    p.ocular_history = strings_from(j, "ocular_history");
    p.family_history = strings_from(j, "family_history");
    for (const auto& s : j.value("symptoms", nlohmann::json::array()))
      p.symptoms.push_back({s.at("description").get<std::string>(), opt_from(s, "duration"), opt_from(s, "progression")});
    for (const auto& e : j.value("examination_findings", nlohmann::json::array()))
      p.examination_findings.push_back({e.value("exam_type", ""), e.at("finding").get<std::string>(), opt_from(e, "note")});
    for (const auto& i : j.value("diagnostic_imaging", nlohmann::json::array()))
      p.diagnostic_imaging.push_back(
          {i.value("imaging_type", ""), i.at("finding").get<std::string>(), opt_from(i, "key_results")});
    for (const auto& d : j.value("differential_diagnoses", nlohmann::json::array()))
      p.differential_diagnoses.push_back({d.at("diagnosis").get<std::string>(), d.value("severity", "")});
    if (j.contains("primary_diagnosis") && !j.at("primary_diagnosis").is_null()) {
      const auto& d = j.at("primary_diagnosis");
      p.primary_diagnosis =
          PrimaryDiagnosis{d.at("diagnosis").get<std::string>(), d.value("severity", ""), d.value("justification", "")};
    }
    for (const auto& a : j.value("assessments", nlohmann::json::array()))
      p.assessments.push_back({a.at("assessment").get<std::string>(), a.value("plan", "")});
    for (const auto& t : j.value("treatments", nlohmann::json::array()))
      p.treatments.push_back({t.at("treatment").get<std::string>(), opt_from(t, "immediate_outcome"),
                              opt_from(t, "long_term_outcome"), opt_from(t, "justification")});
    for (const auto& f : j.value("follow_up", nlohmann::json::array()))
      p.follow_up.push_back({f.at("care").get<std::string>(), opt_from(f, "justification"), opt_from(f, "prognosis"),
                             opt_from(f, "unexpected_outcomes")});
    p.image_refs = strings_from(j, "image_refs");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidProfile, std::string("bad case record: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const DialogueScript& s) {
  ojson j;
  j["case_id"] = s.case_id;
  j["turns"] = ojson::array();
  for (const auto& t : s.turns) {
    ojson tj;
    tj["task"] = to_string(t.task);
    tj["prompt"] = t.prompt;
    tj["expected_output_format"] = t.expected_output_format;
    tj["gold"] = opt(t.gold);
    tj["prompt_only"] = t.prompt_only;
    j["turns"].push_back(std::move(tj));
  }
  j["image_refs"] = s.image_refs;
  return j;
}

nlohmann::ordered_json to_json(const AnswerReport& r) {
  ojson j;
  j["entries"] = ojson::array();
  for (const auto& e : r.entries) {
    ojson ej;
    ej["fields"] = e.fields;
    ej["extras"] = e.extras;
    j["entries"].push_back(std::move(ej));
  }
  j["well_formed"] = r.well_formed;
  j["malformed"] = r.malformed;
  j["duplicates"] = r.duplicates;
  j["malformed_lines"] = r.malformed_lines;
  return j;
}

}  // namespace volmo::dialogue
