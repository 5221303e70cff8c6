#include "volmo/instruction_schema.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>

#include "volmo/digest.hpp"
#include "volmo/error.hpp"
#include "volmo/philox.hpp"
#include "volmo/templates.hpp"
#include "volmo/text_util.hpp"

namespace volmo::schema {

const std::array<Condition, kConditionCount>& all_conditions() {
  static const std::array<Condition, kConditionCount> all{
      Condition::Glaucoma,     Condition::AMD,          Condition::DR,
      Condition::Drusen,       Condition::Hemorrhage,   Condition::HypertensiveRetinopathy,
      Condition::IncreasedCupToDisc, Condition::MacularEdema, Condition::MyopicFundus,
      Condition::Nevus,        Condition::Scar,         Condition::VascularOcclusion};
  return all;
}

std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::CFP: return "CFP";
    case Modality::OCT: return "OCT";
    case Modality::VisualField: return "visual_field";
    case Modality::Other: return "other";
  }
  return "other";
}

std::string_view to_string(LabelSchema s) noexcept {
  switch (s) {
    case LabelSchema::BinaryCondition: return "binary_condition";
    case LabelSchema::Stage0To4: return "stage_0_4";
    case LabelSchema::Stage2To4: return "stage_2_4";
  }
  return "binary_condition";
}

std::string_view to_string(Split s) noexcept { return s == Split::Train ? "train" : "test"; }

std::string_view to_string(StagingDisease d) noexcept { return d == StagingDisease::DR ? "DR" : "macular_hole"; }

std::string_view to_string(Condition c) noexcept {
  switch (c) {
    case Condition::Glaucoma: return "glaucoma";
    case Condition::AMD: return "AMD";
    case Condition::DR: return "DR";
    case Condition::Drusen: return "drusen";
    case Condition::Hemorrhage: return "hemorrhage";
    case Condition::HypertensiveRetinopathy: return "hypertensive retinopathy";
    case Condition::IncreasedCupToDisc: return "increased cup-to-disc ratio";
    case Condition::MacularEdema: return "macular edema";
    case Condition::MyopicFundus: return "myopic fundus";
    case Condition::Nevus: return "nevus";
    case Condition::Scar: return "scar";
    case Condition::VascularOcclusion: return "vascular occlusion";
  }
  return "glaucoma";
}

std::string_view display_name(Condition c) noexcept {
  switch (c) {
    case Condition::AMD: return "age-related macular degeneration";
    case Condition::DR: return "diabetic retinopathy";
    default: return to_string(c);
  }
}

Modality parse_modality(std::string_view s) {
  for (auto m : {Modality::CFP, Modality::OCT, Modality::VisualField, Modality::Other})
    if (text::iequals(to_string(m), s)) return m;
  if (text::iequals(s, "visual field")) return Modality::VisualField;
  throw Error(ErrorCode::BadInput, "unknown modality: " + std::string(s));
}

LabelSchema parse_label_schema(std::string_view s) {
  for (auto l : {LabelSchema::BinaryCondition, LabelSchema::Stage0To4, LabelSchema::Stage2To4})
    if (to_string(l) == s) return l;
  throw Error(ErrorCode::BadInput, "unknown label_schema: " + std::string(s));
}

Split parse_split(std::string_view s) {
  const auto t = text::trim(s);
  if (text::iequals(t, "train")) return Split::Train;
  if (text::iequals(t, "test")) return Split::Test;
  throw Error(ErrorCode::InvalidSplit, "unknown split: " + std::string(s));
}

namespace {

std::string alias_key(std::string_view s) {
  std::string k;
  for (char c : text::to_lower_ascii(text::trim(s))) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) k.push_back(c);
  }
  return k;
}

const std::vector<std::pair<std::string, Condition>>& condition_aliases() {
  static const std::vector<std::pair<std::string, Condition>> aliases = [] {
    std::vector<std::pair<std::string, Condition>> a;
    for (auto c : all_conditions()) {
      a.emplace_back(alias_key(to_string(c)), c);
      a.emplace_back(alias_key(display_name(c)), c);
    }
    const std::pair<const char*, Condition> extra[] = {
        {"age related macular degeneration", Condition::AMD},
        {"macular degeneration", Condition::AMD},
        {"diabetic retinopathy", Condition::DR},
        {"haemorrhage", Condition::Hemorrhage},
        {"retinal hemorrhage", Condition::Hemorrhage},
        {"hypertensive", Condition::HypertensiveRetinopathy},
        {"increased cup disc", Condition::IncreasedCupToDisc},
        {"increased cup-disc ratio", Condition::IncreasedCupToDisc},
        {"increased cup to disc", Condition::IncreasedCupToDisc},
        {"cup disc ratio", Condition::IncreasedCupToDisc},
        {"macular oedema", Condition::MacularEdema},
        {"diabetic macular edema", Condition::MacularEdema},
        {"myopia", Condition::MyopicFundus},
        {"pathological myopia", Condition::MyopicFundus},
        {"retinal vascular occlusion", Condition::VascularOcclusion},
        {"retinal vein occlusion", Condition::VascularOcclusion},
    };
    for (const auto& [name, c] : extra) a.emplace_back(alias_key(name), c);
    return a;
  }();
  return aliases;
}

}  // namespace

Condition parse_condition(std::string_view s) {
  const auto key = alias_key(s);
  for (const auto& [alias, c] : condition_aliases())
    if (alias == key) return c;
  throw Error(ErrorCode::UnknownCondition, "unknown condition: " + std::string(s));
}

StagingDisease parse_staging_disease(std::string_view s) {
  const auto key = alias_key(s);
  if (key == "dr" || key == "diabeticretinopathy") return StagingDisease::DR;
  if (key == "macularhole" || key == "mh") return StagingDisease::MacularHole;
  throw Error(ErrorCode::UnsupportedDisease, "no staging prompt for: " + std::string(s));
}

std::vector<int> valid_stages(StagingDisease d) {
  if (d == StagingDisease::DR) return {0, 1, 2, 3, 4};
  return {2, 3, 4};
}

bool staging_prompt_extrapolated(StagingDisease d) noexcept { return d != StagingDisease::DR; }

std::string_view modality_sentence(Modality m) noexcept {
  switch (m) {
    case Modality::CFP: return "This is a colorful fundus image.";
    case Modality::OCT: return "This is an optical coherence tomography image.";
    case Modality::VisualField: return "This is a visual field test image.";
    case Modality::Other: return "This is an eye image.";
  }
  return "This is an eye image.";
}

std::string build_screening_prompt(Condition condition, Modality modality, ScreeningTemplate variant) {
  if (variant == ScreeningTemplate::Inline)
    return text::substitute_once(templates::get("screening_inline.txt"), "{condition}", display_name(condition));
  const auto with_modality =
      text::substitute_once(templates::get("screening.txt"), "{modality}", modality_sentence(modality));
  return text::substitute_once(with_modality, "{condition}", display_name(condition));
}

std::string build_screening_prompt(std::string_view condition, Modality modality, ScreeningTemplate variant) {
  return build_screening_prompt(parse_condition(condition), modality, variant);
}

std::string build_staging_prompt(StagingDisease disease) {
  return std::string(templates::get(disease == StagingDisease::DR ? "staging_dr.txt" : "staging_macular_hole.txt"));
}

std::string build_staging_prompt(std::string_view disease) { return build_staging_prompt(parse_staging_disease(disease)); }

// ---------------------------------------------------------------------------
// Conversion

Split assign_split(const SourceRecord& record, const SplitPolicy& policy) {
  if (record.split && !text::trim(*record.split).empty()) return parse_split(*record.split);
  const double u = Philox4x32::uniform(policy.seed, fnv1a64(record.record_id), 0);
  return u < policy.test_fraction ? Split::Test : Split::Train;
}

namespace {

bool parse_binary_gold(std::string_view raw) {
  const auto v = text::to_lower_ascii(text::trim(raw));
  if (v == "1" || v == "true" || v == "yes" || v == "positive") return true;
  if (v == "0" || v == "false" || v == "no" || v == "negative") return false;
  throw Error(ErrorCode::LabelOutOfRange, "not a binary label: '" + std::string(raw) + "'");
}

int parse_stage_gold(std::string_view raw, StagingDisease disease) {
  const auto v = text::trim(raw);
  int stage = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), stage);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw Error(ErrorCode::LabelOutOfRange, "not a stage label: '" + std::string(raw) + "'");
  const auto stages = valid_stages(disease);
  if (std::find(stages.begin(), stages.end(), stage) == stages.end())
    throw Error(ErrorCode::LabelOutOfRange, "stage " + std::to_string(stage) + " outside the " +
                                                std::string(to_string(disease)) + " scale");
  return stage;
}

StagingDisease disease_for(const BenchmarkManifest& m, std::optional<StagingDisease> d) {
  if (d) return *d;
  return m.label_schema == LabelSchema::Stage2To4 ? StagingDisease::MacularHole : StagingDisease::DR;
}

}  // namespace

ConversionResult convert_benchmark(std::span<const SourceRecord> records, BenchmarkManifest manifest,
                                   const SplitPolicy& split_policy, std::optional<StagingDisease> staging_disease) {
  ConversionResult out;
  manifest.image_count = manifest.train_count = manifest.test_count = manifest.reject_count = 0;
  manifest.split_seed.reset();
  const bool binary = manifest.label_schema == LabelSchema::BinaryCondition;
  const StagingDisease disease = disease_for(manifest, staging_disease);
  if (!binary) {
    const bool scale_ok = (manifest.label_schema == LabelSchema::Stage0To4) == (disease == StagingDisease::DR);
    if (!scale_ok)
      throw Error(ErrorCode::UnsupportedDisease, std::string(to_string(manifest.label_schema)) +
                                                     " does not match disease " + std::string(to_string(disease)));
    manifest.prompt_extrapolated = staging_prompt_extrapolated(disease);
  }

  // Prompts are constant per (condition, modality); build each once.
  std::map<Condition, std::string> screening_prompts;
  const std::string staging_prompt = binary ? std::string() : build_staging_prompt(disease);

  for (const auto& rec : records) {
    try {
      if (text::trim(rec.image_ref).empty())
        throw Error(ErrorCode::MissingImageRef, "record has no image reference");
      const Split split = assign_split(rec, split_policy);
      if (!rec.split || text::trim(*rec.split).empty()) manifest.split_seed = split_policy.seed;

      if (binary) {
        ScreeningInstance inst;
        inst.condition = parse_condition(rec.condition);
        inst.gold = parse_binary_gold(rec.label);
        auto [it, fresh] = screening_prompts.try_emplace(inst.condition);
        if (fresh) it->second = build_screening_prompt(inst.condition, manifest.modality);
        inst.dataset = manifest.dataset_name;
        inst.instance_id = manifest.dataset_name + ":" + rec.record_id + ":" + std::string(to_string(inst.condition));
        inst.image_ref = rec.image_ref;
        inst.modality = manifest.modality;
        inst.prompt = it->second;
        inst.split = split;
        inst.source_record = rec.record_id;
        out.screening.push_back(std::move(inst));
      } else {
        StagingInstance inst;
        inst.gold = parse_stage_gold(rec.label, disease);
        inst.dataset = manifest.dataset_name;
        inst.instance_id = manifest.dataset_name + ":" + rec.record_id;
        inst.image_ref = rec.image_ref;
        inst.disease = disease;
        inst.prompt = staging_prompt;
        inst.split = split;
        inst.source_record = rec.record_id;
        inst.prompt_extrapolated = staging_prompt_extrapolated(disease);
        out.staging.push_back(std::move(inst));
      }
      ++manifest.image_count;
      ++(split == Split::Train ? manifest.train_count : manifest.test_count);
    } catch (const Error& e) {
      out.rejects.push_back({manifest.dataset_name, rec.record_id, std::string(to_string(e.code())), e.what()});
      ++manifest.reject_count;
    }
  }
  out.manifest = std::move(manifest);
  return out;
}

// ---------------------------------------------------------------------------
// Table loading

TableMapping TableMapping::from_config_file(const std::filesystem::path& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path.string());
  } catch (const CLI::Error& e) {
    throw Error(ErrorCode::BadInput, "cannot read mapping " + path.string() + ": " + e.what());
  }
  TableMapping m;
  std::string schema = "binary_condition";
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    const std::string value = item.inputs.empty() ? std::string() : item.inputs.front();
    if (!item.parents.empty() && item.parents.front() == "conditions") {
      m.condition_columns.emplace_back(item.name, value);
      continue;
    }
    const std::string& key = item.name;
    if (key == "dataset_name") m.manifest.dataset_name = value;
    else if (key == "modality") m.manifest.modality = parse_modality(value);
    else if (key == "population") m.manifest.population = value;
    else if (key == "license") m.manifest.license = value;
    else if (key == "label_schema") schema = value;
    else if (key == "id_column") m.id_column = value;
    else if (key == "image_column") m.image_column = value;
    else if (key == "split_column") m.split_column = value;
    else if (key == "stage_column") m.stage_column = value;
    else if (key == "disease") m.disease = parse_staging_disease(value);
    else throw Error(ErrorCode::BadInput, "unknown mapping key: " + key);
  }
  m.manifest.label_schema = parse_label_schema(schema);
  if (m.manifest.dataset_name.empty()) throw Error(ErrorCode::BadInput, "mapping needs dataset_name");
  if (m.image_column.empty()) throw Error(ErrorCode::BadInput, "mapping needs image_column");
  if (m.manifest.label_schema == LabelSchema::BinaryCondition) {
    if (m.condition_columns.empty()) throw Error(ErrorCode::BadInput, "mapping needs a [conditions] section");
    for (const auto& [col, cond] : m.condition_columns) parse_condition(cond);
  } else if (m.stage_column.empty()) {
    throw Error(ErrorCode::BadInput, "mapping needs stage_column");
  }
  return m;
}

namespace {

// RFC 4180: quoted fields may hold commas, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view data) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    any = true;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorCode::BadInput, "unterminated quoted CSV field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

using Row = std::map<std::string, std::string>;

std::string cell(const Row& row, const std::string& column) {
  auto it = row.find(column);
  return it == row.end() ? std::string() : it->second;
}

std::vector<Row> read_rows(const std::filesystem::path& path) {
  const std::string data = text::read_file(path.string());
  std::vector<Row> rows;
  if (path.extension() == ".jsonl" || path.extension() == ".json") {
    std::size_t line_no = 0;
    for (auto line : text::split_lines(data)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        Row r;
        for (const auto& [k, v] : j.items()) r[k] = v.is_string() ? v.get<std::string>() : (v.is_null() ? "" : v.dump());
        rows.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadInput, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    return rows;
  }
  auto table = parse_csv(data);
  if (table.empty()) return rows;
  const auto header = table.front();
  for (std::size_t r = 1; r < table.size(); ++r) {
    if (table[r].size() == 1 && text::trim(table[r][0]).empty()) continue;
    Row row;
    for (std::size_t c = 0; c < header.size() && c < table[r].size(); ++c) row[header[c]] = table[r][c];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<SourceRecord> load_table(const std::filesystem::path& path, const TableMapping& mapping) {
  std::vector<SourceRecord> records;
  const auto rows = read_rows(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    SourceRecord base;
    base.record_id = mapping.id_column.empty() ? std::to_string(i + 1) : cell(row, mapping.id_column);
    if (base.record_id.empty()) base.record_id = std::to_string(i + 1);
    base.image_ref = cell(row, mapping.image_column);
    if (!mapping.split_column.empty()) {
      auto s = cell(row, mapping.split_column);
      if (!text::trim(s).empty()) base.split = s;
    }
    if (mapping.manifest.label_schema == LabelSchema::BinaryCondition) {
      for (const auto& [column, condition] : mapping.condition_columns) {
        const auto value = cell(row, column);
        if (text::trim(value).empty()) continue;  // unlabelled for this condition
        SourceRecord r = base;
        r.condition = condition;
        r.label = value;
        records.push_back(std::move(r));
      }
    } else {
      base.label = cell(row, mapping.stage_column);
      records.push_back(std::move(base));
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Manifests

bool operator==(const BenchmarkManifest& a, const BenchmarkManifest& b) {
  return a.dataset_name == b.dataset_name && a.modality == b.modality && a.population == b.population &&
         a.license == b.license && a.image_count == b.image_count && a.label_schema == b.label_schema &&
         a.train_count == b.train_count && a.test_count == b.test_count && a.reject_count == b.reject_count &&
         a.split_seed == b.split_seed && a.prompt_extrapolated == b.prompt_extrapolated;
}

void ManifestSet::add(const BenchmarkManifest& m) {
  auto [it, fresh] = datasets_.try_emplace(m.dataset_name, m);
  if (fresh) return;
  auto& cur = it->second;
  if (cur.modality != m.modality || cur.label_schema != m.label_schema)
    throw Error(ErrorCode::ConfigMismatch, "conflicting manifests for dataset " + m.dataset_name);
  cur.image_count += m.image_count;
  cur.train_count += m.train_count;
  cur.test_count += m.test_count;
  cur.reject_count += m.reject_count;
  if (!cur.split_seed) cur.split_seed = m.split_seed;
  else if (m.split_seed) cur.split_seed = std::min(*cur.split_seed, *m.split_seed);
  cur.prompt_extrapolated = cur.prompt_extrapolated || m.prompt_extrapolated;
  if (cur.population.empty()) cur.population = m.population;
  if (cur.license.empty()) cur.license = m.license;
}

void ManifestSet::merge(const ManifestSet& other) {
  for (const auto& [name, m] : other.datasets_) add(m);
}

std::size_t ManifestSet::total_instances() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, m] : datasets_) n += m.image_count;
  return n;
}

bool operator==(const ManifestSet& a, const ManifestSet& b) { return a.datasets_ == b.datasets_; }

nlohmann::ordered_json ManifestSet::to_json() const {
  nlohmann::ordered_json j;
  auto list = nlohmann::ordered_json::array();
  for (const auto& [name, m] : datasets_) list.push_back(schema::to_json(m));
  j["datasets"] = std::move(list);
  j["total_instances"] = total_instances();
  return j;
}

nlohmann::ordered_json to_json(const BenchmarkManifest& m) {
  nlohmann::ordered_json j;
  j["dataset_name"] = m.dataset_name;
  j["modality"] = to_string(m.modality);
  j["population"] = m.population;
  j["license"] = m.license;
  j["image_count"] = m.image_count;
  j["label_schema"] = to_string(m.label_schema);
  j["train_count"] = m.train_count;
  j["test_count"] = m.test_count;
  j["reject_count"] = m.reject_count;
  j["split_seed"] = m.split_seed ? nlohmann::ordered_json(*m.split_seed) : nullptr;
  j["prompt_extrapolated"] = m.prompt_extrapolated;
  return j;
}

nlohmann::ordered_json to_json(const ScreeningInstance& s) {
  nlohmann::ordered_json j;
  j["instance_id"] = s.instance_id;
  j["dataset"] = s.dataset;
  j["image_ref"] = s.image_ref;
  j["condition"] = to_string(s.condition);
  j["modality"] = to_string(s.modality);
  j["prompt"] = s.prompt;
  j["gold"] = s.gold ? "TRUE" : "FALSE";
  j["split"] = to_string(s.split);
  j["source_record"] = s.source_record;
  return j;
}

nlohmann::ordered_json to_json(const StagingInstance& s) {
  nlohmann::ordered_json j;
  j["instance_id"] = s.instance_id;
  j["dataset"] = s.dataset;
  j["image_ref"] = s.image_ref;
  j["disease"] = to_string(s.disease);
  j["prompt"] = s.prompt;
  j["gold"] = s.gold;
  j["split"] = to_string(s.split);
  j["source_record"] = s.source_record;
  j["prompt_extrapolated"] = s.prompt_extrapolated;
  return j;
}

nlohmann::ordered_json to_json(const RejectedRecord& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["record_id"] = r.record_id;
  j["reason"] = r.reason;
  j["message"] = r.message;
  return j;
}

ScreeningInstance screening_from_json(const nlohmann::json& j) {
  try {
    ScreeningInstance s;
    s.instance_id = j.at("instance_id").get<std::string>();
    s.dataset = j.value("dataset", "");
    s.image_ref = j.at("image_ref").get<std::string>();
    s.condition = parse_condition(j.at("condition").get<std::string>());
    s.modality = parse_modality(j.value("modality", "CFP"));
    s.prompt = j.value("prompt", "");
    const auto gold = j.at("gold").get<std::string>();
    if (gold != "TRUE" && gold != "FALSE") throw Error(ErrorCode::LabelOutOfRange, "gold must be TRUE or FALSE");
    s.gold = gold == "TRUE";
    s.split = parse_split(j.value("split", "test"));
    s.source_record = j.value("source_record", "");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadInput, std::string("bad screening instance: ") + e.what());
  }
}

StagingInstance staging_from_json(const nlohmann::json& j) {
  try {
    StagingInstance s;
    s.instance_id = j.at("instance_id").get<std::string>();
    s.dataset = j.value("dataset", "");
    s.image_ref = j.at("image_ref").get<std::string>();
    s.disease = parse_staging_disease(j.at("disease").get<std::string>());
    s.prompt = j.value("prompt", "");
    s.gold = j.at("gold").get<int>();
    s.split = parse_split(j.value("split", "test"));
    s.source_record = j.value("source_record", "");
    s.prompt_extrapolated = j.value("prompt_extrapolated", false);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadInput, std::string("bad staging instance: ") + e.what());
  }
}

}  // namespace volmo::schema
