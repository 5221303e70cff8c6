#include "volmo/train_manifest.hpp"

#include <set>

#include "volmo/error.hpp"

namespace volmo::train {

const std::vector<std::string>& canonical_keys() {
  static const std::vector<std::string> keys{
      "stage",           "num_gpus",         "per_device_batch",    "grad_accum",          "precision",
      "zero_stage",      "learning_rate",    "scheduler",           "weight_decay",        "warmup_ratio",
      "image_resolution", "max_dynamic_patches", "downsample_ratio", "drop_path_rate",     "vision_select_layer",
      "freeze_backbone", "freeze_llm",       "freeze_mlp",          "max_seq_len",         "gradient_checkpointing",
      "group_by_length"};
  return keys;
}

TrainingConfig reference_config(int stage) {
  if (stage < 1 || stage > 3) throw Error(ErrorCode::InvalidArgument, "training stage must be 1, 2 or 3");
  TrainingConfig c;
  c.stage = stage;
  return c;
}

nlohmann::ordered_json to_json(const TrainingConfig& c) {
  nlohmann::ordered_json j;
  j["stage"] = c.stage;
  j["num_gpus"] = c.num_gpus;
  j["per_device_batch"] = c.per_device_batch;
  j["grad_accum"] = c.grad_accum;
  j["precision"] = c.precision;
  j["zero_stage"] = c.zero_stage;
  j["learning_rate"] = c.learning_rate;
  j["scheduler"] = c.scheduler;
  j["weight_decay"] = c.weight_decay;
  j["warmup_ratio"] = c.warmup_ratio;
  j["image_resolution"] = c.image_resolution;
  j["max_dynamic_patches"] = c.max_dynamic_patches;
  j["downsample_ratio"] = c.downsample_ratio;
  j["drop_path_rate"] = c.drop_path_rate;
  j["vision_select_layer"] = c.vision_select_layer;
  j["freeze_backbone"] = c.freeze_backbone;
  j["freeze_llm"] = c.freeze_llm;
  j["freeze_mlp"] = c.freeze_mlp;
  j["max_seq_len"] = c.max_seq_len;
  j["gradient_checkpointing"] = c.gradient_checkpointing;
  j["group_by_length"] = c.group_by_length;
  return j;
}

std::string emit_training_config(int stage) { return to_json(reference_config(stage)).dump(2) + "\n"; }

std::string emit_training_config(int stage, const nlohmann::json& overrides) {
  auto doc = to_json(reference_config(stage));
  if (!overrides.is_null() && !overrides.is_object())
    throw Error(ErrorCode::InvalidArgument, "training overrides must be an object");
  for (const auto& [key, value] : overrides.items()) {
    if (key == "stage" || !doc.contains(key)) throw Error(ErrorCode::InvalidArgument, "cannot override field " + key);
    const auto& ref = doc[key];
    bool same_type = ref.type() == value.type();
    if (ref.is_number_integer()) same_type = value.is_number_integer();
    if (ref.is_number_float()) same_type = value.is_number();
    if (!same_type) throw Error(ErrorCode::InvalidArgument, "override for " + key + " has the wrong type");
    doc[key] = ref.is_number_float() ? nlohmann::ordered_json(value.get<double>()) : nlohmann::ordered_json(value);
  }
  return doc.dump(2) + "\n";
}

namespace {

bool values_equal(const nlohmann::json& expected, const nlohmann::json& actual) {
  if (expected.is_number() && actual.is_number()) {
    if (expected.is_number_float() || actual.is_number_float()) return expected.get<double>() == actual.get<double>();
    return expected.get<std::int64_t>() == actual.get<std::int64_t>();
  }
  return expected == actual;
}

}  // namespace

Verdict validate_training_config(const nlohmann::json& document, std::optional<int> expected_stage) {
  if (!document.is_object()) throw Error(ErrorCode::UnparseableDocument, "training config must be a JSON object");
  Verdict v;

  int stage = expected_stage.value_or(1);
  if (!expected_stage) {
    const auto it = document.find("stage");
    if (it != document.end() && it->is_number_integer() && it->get<int>() >= 1 && it->get<int>() <= 3)
      stage = it->get<int>();
  }
  const auto reference = to_json(reference_config(stage));

  for (const auto& key : canonical_keys()) {
    const auto& expected = reference[key];
    const auto it = document.find(key);
    if (it == document.end()) {
      v.diffs.push_back({key, expected, nullptr});
    } else if (!values_equal(expected, *it)) {
      v.diffs.push_back({key, expected, *it});
    }
  }
  const std::set<std::string> known(canonical_keys().begin(), canonical_keys().end());
  for (const auto& [key, value] : document.items())
    if (!known.count(key)) v.diffs.push_back({key, nullptr, value});

  auto flag_bool = [&](const char* key, bool want, const char* message) {
    const auto it = document.find(key);
    if (it == document.end() || !it->is_boolean() || it->get<bool>() != want) v.invariant_violations.emplace_back(message);
  };
  flag_bool("freeze_backbone", true, "freeze_backbone must be true: the vision encoder stays frozen");
  flag_bool("freeze_llm", false, "freeze_llm must be false: the language model is trained");
  flag_bool("freeze_mlp", false, "freeze_mlp must be false: the projector is trained");
  if (auto it = document.find("learning_rate"); it == document.end() || !it->is_number() || !(it->get<double>() > 0.0))
    v.invariant_violations.emplace_back("learning_rate must be positive");
  if (auto it = document.find("warmup_ratio");
      it == document.end() || !it->is_number() || !(it->get<double>() >= 0.0 && it->get<double>() < 1.0))
    v.invariant_violations.emplace_back("warmup_ratio must lie in [0, 1)");

  v.ok = v.diffs.empty() && v.invariant_violations.empty();
  return v;
}

Verdict validate_training_config_text(std::string_view text, std::optional<int> expected_stage) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::UnparseableDocument, std::string("training config is not JSON: ") + e.what());
  }
  return validate_training_config(doc, expected_stage);
}

nlohmann::ordered_json to_json(const Verdict& v) {
  nlohmann::ordered_json j;
  j["ok"] = v.ok;
  j["diffs"] = nlohmann::ordered_json::array();
  for (const auto& d : v.diffs) j["diffs"].push_back({{"field", d.field}, {"expected", d.expected}, {"actual", d.actual}});
  j["invariant_violations"] = v.invariant_violations;
  return j;
}

}  // namespace volmo::train
