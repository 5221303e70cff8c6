#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace volmo::train {

struct TrainingConfig {
  int stage = 1;
  int num_gpus = 4;
  int per_device_batch = 1;
  int grad_accum = 1;
  std::string precision = "bfloat16";
  int zero_stage = 1;
  double learning_rate = 4e-5;
  std::string scheduler = "cosine";
  double weight_decay = 0.01;
  double warmup_ratio = 0.03;
  int image_resolution = 448;
  int max_dynamic_patches = 6;
  double downsample_ratio = 0.5;
  double drop_path_rate = 0.1;
  int vision_select_layer = -1;
  bool freeze_backbone = true;
  bool freeze_llm = false;
  bool freeze_mlp = false;
  int max_seq_len = 9000;
  bool gradient_checkpointing = true;
  bool group_by_length = true;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Field names in canonical serialization order.
const std::vector<std::string>& canonical_keys();

/// Reference hyperparameters for `stage` (1, 2 or 3). Every stage shares the
/// same values. Throws Error(InvalidArgument) for other stages.
TrainingConfig reference_config(int stage);

nlohmann::ordered_json to_json(const TrainingConfig& c);

/// Canonical document text: two-space indent, trailing newline.
std::string emit_training_config(int stage);
/// As above with per-stage overrides applied; unknown keys or mistyped values
/// raise Error(InvalidArgument).
std::string emit_training_config(int stage, const nlohmann::json& overrides);

struct FieldDiff {
  std::string field;
  nlohmann::json expected;  // null for unexpected fields
  nlohmann::json actual;    // null for missing fields
};

struct Verdict {
  bool ok = true;
  std::vector<FieldDiff> diffs;
  /// Frozen-encoder and range invariants that the document breaks.
  std::vector<std::string> invariant_violations;
};

/// Compares a document to the reference for its stage (or `expected_stage`).
Verdict validate_training_config(const nlohmann::json& document, std::optional<int> expected_stage = std::nullopt);
/// Throws Error(UnparseableDocument) if `text` is not a JSON object.
Verdict validate_training_config_text(std::string_view text, std::optional<int> expected_stage = std::nullopt);

nlohmann::ordered_json to_json(const Verdict& v);

}  // namespace volmo::train
