#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace volmo::schema {

enum class Modality { CFP, OCT, VisualField, Other };
enum class LabelSchema { BinaryCondition, Stage0To4, Stage2To4 };
enum class Split { Train, Test };
enum class StagingDisease { DR, MacularHole };

/// The twelve screening targets. Order is the canonical listing order.
enum class Condition {
  Glaucoma,
  AMD,
  DR,
  Drusen,
  Hemorrhage,
  HypertensiveRetinopathy,
  IncreasedCupToDisc,
  MacularEdema,
  MyopicFundus,
  Nevus,
  Scar,
  VascularOcclusion,
};

inline constexpr std::size_t kConditionCount = 12;
const std::array<Condition, kConditionCount>& all_conditions();

std::string_view to_string(Modality m) noexcept;
std::string_view to_string(LabelSchema s) noexcept;
std::string_view to_string(Split s) noexcept;
std::string_view to_string(StagingDisease d) noexcept;
/// Canonical short name ("glaucoma", "AMD", "DR", ...).
std::string_view to_string(Condition c) noexcept;
/// Name used inside prompts ("age-related macular degeneration", ...).
std::string_view display_name(Condition c) noexcept;

Modality parse_modality(std::string_view s);
LabelSchema parse_label_schema(std::string_view s);
Split parse_split(std::string_view s);
/// Case-insensitive, accepts canonical names, display names, and common
/// aliases. Throws Error(UnknownCondition).
Condition parse_condition(std::string_view s);
/// Throws Error(UnsupportedDisease).
StagingDisease parse_staging_disease(std::string_view s);

std::vector<int> valid_stages(StagingDisease d);
/// Stage prompts other than DR extend the DR skeleton and are marked as such.
bool staging_prompt_extrapolated(StagingDisease d) noexcept;

enum class ScreeningTemplate {
  Canonical,  // three-line form ending "Answer in format: TRUE or FALSE."
  Inline,     // one-line form ending "Answer in the format: TRUE or FALSE."
};

std::string_view modality_sentence(Modality m) noexcept;
std::string build_screening_prompt(Condition condition, Modality modality,
                                   ScreeningTemplate variant = ScreeningTemplate::Canonical);
std::string build_screening_prompt(std::string_view condition, Modality modality,
                                   ScreeningTemplate variant = ScreeningTemplate::Canonical);
std::string build_staging_prompt(StagingDisease disease);
std::string build_staging_prompt(std::string_view disease);

struct BenchmarkManifest {
  std::string dataset_name;
  Modality modality = Modality::CFP;
  std::string population;
  std::string license;
  std::size_t image_count = 0;
  LabelSchema label_schema = LabelSchema::BinaryCondition;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::size_t reject_count = 0;
  /// Set when at least one split was generated rather than taken from the source.
  std::optional<std::uint64_t> split_seed;
  bool prompt_extrapolated = false;
};

struct ScreeningInstance {
  std::string instance_id;
  std::string dataset;
  std::string image_ref;
  Condition condition = Condition::Glaucoma;
  Modality modality = Modality::CFP;
  std::string prompt;
  bool gold = false;
  Split split = Split::Train;
  std::string source_record;
};

struct StagingInstance {
  std::string instance_id;
  std::string dataset;
  std::string image_ref;
  StagingDisease disease = StagingDisease::DR;
  std::string prompt;
  int gold = 0;
  Split split = Split::Train;
  std::string source_record;
  bool prompt_extrapolated = false;
};

/// One labelled unit of a source table. Multi-condition rows are expanded into
/// one SourceRecord per labelled condition before conversion.
struct SourceRecord {
  std::string record_id;
  std::string image_ref;
  std::string label;
  std::string condition;  // binary_condition schema only
  std::optional<std::string> split;
};

struct RejectedRecord {
  std::string dataset;
  std::string record_id;
  std::string reason;  // ErrorCode name
  std::string message;
};

struct SplitPolicy {
  std::uint64_t seed = 20240101;
  double test_fraction = 0.2;
};

/// Split assignment for a record: the source split when present, otherwise a
/// seeded draw keyed on record_id.
Split assign_split(const SourceRecord& record, const SplitPolicy& policy);

struct ConversionResult {
  std::vector<ScreeningInstance> screening;
  std::vector<StagingInstance> staging;
  std::vector<RejectedRecord> rejects;
  BenchmarkManifest manifest;
};

/// Converts records one-to-one into instances (or rejects). The returned
/// manifest carries reconciled counts.
ConversionResult convert_benchmark(std::span<const SourceRecord> records, BenchmarkManifest manifest,
                                   const SplitPolicy& split_policy = {},
                                   std::optional<StagingDisease> staging_disease = std::nullopt);

/// Column mapping for a label table, read from a TOML-style config file.
struct TableMapping {
  BenchmarkManifest manifest;
  std::string id_column;  // empty: 1-based row number
  std::string image_column;
  std::string split_column;  // empty: no source split
  /// binary_condition: column -> condition name
  std::vector<std::pair<std::string, std::string>> condition_columns;
  /// stage schemas
  std::string stage_column;
  std::optional<StagingDisease> disease;

  static TableMapping from_config_file(const std::filesystem::path& path);
};

/// Reads a CSV (header row) or JSONL label table into SourceRecords.
std::vector<SourceRecord> load_table(const std::filesystem::path& path, const TableMapping& mapping);

/// Per-dataset manifests keyed by name. Merging sums counts, so merge is
/// associative and commutative.
class ManifestSet {
 public:
  void add(const BenchmarkManifest& m);
  void merge(const ManifestSet& other);
  std::size_t total_instances() const noexcept;
  const std::map<std::string, BenchmarkManifest>& datasets() const noexcept { return datasets_; }
  nlohmann::ordered_json to_json() const;

  friend bool operator==(const ManifestSet& a, const ManifestSet& b);

 private:
  std::map<std::string, BenchmarkManifest> datasets_;
};

bool operator==(const BenchmarkManifest& a, const BenchmarkManifest& b);

nlohmann::ordered_json to_json(const BenchmarkManifest& m);
nlohmann::ordered_json to_json(const ScreeningInstance& s);
nlohmann::ordered_json to_json(const StagingInstance& s);
nlohmann::ordered_json to_json(const RejectedRecord& r);
ScreeningInstance screening_from_json(const nlohmann::json& j);
StagingInstance staging_from_json(const nlohmann::json& j);

}  // namespace volmo::schema
