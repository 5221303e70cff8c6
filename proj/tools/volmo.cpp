// volmo: command-line front end for the corpus, instruction and evaluation pipeline.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "volmo/caption_revision.hpp"
#include "volmo/case_dialogue.hpp"
#include "volmo/embedding.hpp"
#include "volmo/error.hpp"
#include "volmo/instruction_schema.hpp"
#include "volmo/jats_corpus.hpp"
#include "volmo/metrics_classification.hpp"
#include "volmo/metrics_text.hpp"
#include "volmo/run_manifest.hpp"
#include "volmo/stats.hpp"
#include "volmo/text_util.hpp"
#include "volmo/train_manifest.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

void log_error(std::string_view code, int exit_code, std::string_view message) {
  ojson j;
  j["level"] = "error";
  j["code"] = code;
  j["exit"] = exit_code;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw volmo::Error(volmo::ErrorCode::Io, "cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (volmo::text::trim(line).empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw volmo::Error(volmo::ErrorCode::BadInput, fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
  return rows;
}

template <class Range>
std::string jsonl(const Range& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

/// Every long option of `sub` with its effective value, for the run manifest.
ojson config_snapshot(const CLI::App& sub) {
  ojson j = ojson::object();
  for (const auto* opt : sub.get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    const auto& name = opt->get_lnames().front();
    const auto res = opt->reduced_results();
    if (res.empty()) j[name] = opt->get_default_str();
    else if (res.size() == 1 && opt->get_expected_max() <= 1) j[name] = res.front();
    else j[name] = res;
  }
  return j;
}

struct Failure {
  std::string item;
  std::string code;
  std::string message;
};

ojson to_json(const Failure& f) { return {{"item", f.item}, {"code", f.code}, {"message", f.message}}; }

/// Exit class for a run whose items failed: external if any failure is.
int exit_for_failures(const std::vector<Failure>& failures) {
  int code = kExitOk;
  for (const auto& f : failures) {
    const auto ec = volmo::error_code_from_string(f.code).value_or(volmo::ErrorCode::BadInput);
    code = std::max(code, static_cast<int>(volmo::exit_class(ec)));
  }
  return code;
}

void write_failures(volmo::RunDirectory& run, const std::vector<Failure>& failures) {
  std::vector<ojson> rows;
  for (const auto& f : failures) rows.push_back(to_json(f));
  run.write("failures.jsonl", jsonl(rows));
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::vector<std::string> inputs;
  bool no_journal_filter = false;
  unsigned threads = default_threads();
};

int run_extract(const ExtractArgs& a, volmo::RunDirectory& run) {
  std::vector<fs::path> roots(a.inputs.begin(), a.inputs.end());
  const auto files = volmo::jats::collect_inputs(roots);
  if (files.empty()) throw volmo::Error(volmo::ErrorCode::Io, "no .xml or .nxml inputs found");
  for (const auto& f : files) run.add_input(f);

  const volmo::jats::JournalFilter filter;
  const volmo::jats::ParseOptions options;
  const auto corpus = volmo::jats::extract_corpus(files, options, a.no_journal_filter ? nullptr : &filter, a.threads);

  std::vector<ojson> articles, figures, cases;
  for (const auto& art : corpus.articles) {
    articles.push_back(volmo::jats::to_json(art.record));
    for (const auto& fig : art.figures) figures.push_back(volmo::jats::to_json(fig));
    if (volmo::jats::detect_case_report(art.record, art.body_text, options.case_reports))
      cases.push_back({{"pmcid", art.record.pmcid}, {"title", art.record.title}, {"body_text", art.body_text}});
  }
  std::vector<Failure> failures;
  for (const auto& f : corpus.failures) failures.push_back({f.path, f.code, f.message});

  run.write("articles.jsonl", jsonl(articles));
  run.write("figures.jsonl", jsonl(figures));
  run.write("case_reports.jsonl", jsonl(cases));
  write_failures(run, failures);
  ojson summary;
  summary["files"] = files.size();
  summary["articles"] = corpus.articles.size();
  summary["figures"] = figures.size();
  summary["case_reports"] = cases.size();
  summary["filtered_out"] = corpus.filtered_out;
  summary["failures"] = failures.size();
  run.write("summary.json", summary.dump(2) + "\n");
  return exit_for_failures(failures);
}

// ---------------------------------------------------------------------------

struct ReviseArgs {
  std::string input;
  std::string provider;
  std::string api_key;
  std::string model = "default";
  bool offline = false;
  bool no_fallback = false;
  int max_attempts = 3;
  unsigned max_in_flight = 4;
  double timeout = 60.0;
};

int run_revise(const ReviseArgs& a, volmo::RunDirectory& run) {
  run.add_input(a.input);
  std::vector<volmo::jats::FigurePair> figures;
  for (const auto& row : read_jsonl(a.input)) figures.push_back(volmo::jats::figure_from_json(row));

  volmo::revision::ProviderConfig provider;
  provider.endpoint_url = a.provider;
  provider.api_key = a.api_key;
  provider.model_name = a.model;
  provider.max_attempts = a.max_attempts;
  provider.max_in_flight = a.max_in_flight;
  provider.timeout_seconds = a.timeout;
  provider.validate();

  std::unique_ptr<volmo::revision::ChatClient> client;
  if (!a.offline && !a.provider.empty()) client = std::make_unique<volmo::revision::HttpChatClient>(provider);
  if (!a.offline && a.provider.empty() && a.no_fallback)
    throw volmo::Error(volmo::ErrorCode::ProviderUnreachable, "no provider URL configured (set --provider or VOLMO_LLM_URL)");

  volmo::revision::ReviseOptions options;
  options.offline_fallback = !a.no_fallback;
  const auto result = volmo::revision::revise_all(figures, provider, client.get(), options);

  std::vector<ojson> rows;
  for (const auto& f : result.figures) rows.push_back(volmo::jats::to_json(f));
  std::vector<Failure> failures;
  for (const auto& f : result.failures)
    failures.push_back({figures[f.index].article + "/" + figures[f.index].figure_id, f.code, f.message});
  run.write("revised_figures.jsonl", jsonl(rows));
  write_failures(run, failures);
  return exit_for_failures(failures);
}

// ---------------------------------------------------------------------------

struct ConvertArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> mappings;
  std::uint64_t seed = volmo::schema::SplitPolicy{}.seed;
  double test_fraction = 0.2;
};

int run_convert(const ConvertArgs& a, volmo::RunDirectory& run) {
  if (a.inputs.size() != a.mappings.size())
    throw volmo::Error(volmo::ErrorCode::InvalidArgument, "each --input needs a matching --mapping");
  volmo::schema::SplitPolicy policy{a.seed, a.test_fraction};
  volmo::schema::ManifestSet manifests;
  std::vector<ojson> instances, rejects;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    run.add_input(a.inputs[i]);
    run.add_input(a.mappings[i]);
    const auto mapping = volmo::schema::TableMapping::from_config_file(a.mappings[i]);
    const auto records = volmo::schema::load_table(a.inputs[i], mapping);
    const auto result = volmo::schema::convert_benchmark(records, mapping.manifest, policy, mapping.disease);
    for (const auto& s : result.screening) instances.push_back(volmo::schema::to_json(s));
    for (const auto& s : result.staging) instances.push_back(volmo::schema::to_json(s));
    for (const auto& r : result.rejects) rejects.push_back(volmo::schema::to_json(r));
    manifests.add(result.manifest);
  }
  run.write("instances.jsonl", jsonl(instances));
  run.write("rejects.jsonl", jsonl(rejects));
  run.write("manifest.json", manifests.to_json().dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DialogueArgs {
  std::string input;
  std::string answers;
};

int run_dialogues(const DialogueArgs& a, volmo::RunDirectory& run) {
  namespace dlg = volmo::dialogue;
  run.add_input(a.input);
  std::vector<ojson> scripts;
  std::vector<Failure> failures;
  std::size_t n = 0;
  for (const auto& row : read_jsonl(a.input)) {
    ++n;
    const std::string item = row.is_object() && row.contains("case_id") && row["case_id"].is_string()
                                 ? row["case_id"].get<std::string>()
                                 : fmt::format("line {}", n);
    try {
      scripts.push_back(dlg::to_json(dlg::build_dialogue(dlg::profile_from_json(row))));
    } catch (const volmo::Error& e) {
      failures.push_back({item, std::string(volmo::to_string(e.code())), e.what()});
    }
  }
  run.write("dialogues.jsonl", jsonl(scripts));

  if (!a.answers.empty()) {
    run.add_input(a.answers);
    std::vector<ojson> reports;
    for (const auto& row : read_jsonl(a.answers)) {
      const auto task = dlg::task_from_string(row.at("task").get<std::string>());
      ojson r;
      r["case_id"] = row.value("case_id", "");
      r["model_id"] = row.value("model_id", "");
      r["task"] = dlg::to_string(task);
      r["report"] = dlg::to_json(dlg::parse_structured_answer(task, row.at("raw_output").get<std::string>()));
      reports.push_back(std::move(r));
    }
    run.write("answer_reports.jsonl", jsonl(reports));
  }
  write_failures(run, failures);
  return failures.empty() ? kExitOk : exit_for_failures(failures);
}

// ---------------------------------------------------------------------------

struct EvalTextArgs {
  std::string input;
  std::string provider;
  std::string policy = "default";
  double beta = 1.0;
  bool raw_dot = false;
  unsigned threads = default_threads();
};

int run_eval_text(const EvalTextArgs& a, volmo::RunDirectory& run) {
  run.add_input(a.input);
  const bool file_provider = !a.provider.empty() && a.provider != "stub" && a.provider.rfind("http", 0) != 0;
  if (file_provider) run.add_input(a.provider);
  auto provider = volmo::embed::make_provider(a.provider);

  std::vector<volmo::metrics::TextPair> pairs;
  std::vector<std::string> models;
  for (const auto& row : read_jsonl(a.input)) {
    pairs.push_back({row.at("id").get<std::string>(), row.at("candidate").get<std::string>(),
                     row.at("reference").get<std::string>()});
    models.push_back(row.value("model_id", ""));
  }
  volmo::metrics::TextScoreConfig config{a.policy, a.beta, 4, a.raw_dot};
  const auto corpus = volmo::metrics::score_corpus(pairs, *provider, config, a.threads);

  std::vector<ojson> rows;
  std::map<std::string, std::vector<const volmo::metrics::TextScoreSet*>> by_model;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!corpus.scores[i]) continue;
    const auto& s = *corpus.scores[i];
    ojson r;
    r["instance_id"] = pairs[i].id;
    r["model_id"] = models[i];
    r["bleu1"] = s.bleu[0];
    r["bleu2"] = s.bleu[1];
    r["bleu3"] = s.bleu[2];
    r["bleu4"] = s.bleu[3];
    r["rouge_l"] = s.rouge_l.f;
    r["bertscore_f1"] = s.bertscore.f1;
    r["sbert"] = s.sbert;
    r["embedding_model"] = s.model_id;
    r["policy_id"] = s.policy_id;
    rows.push_back(std::move(r));
    by_model[models[i]].push_back(&s);
  }

  ojson summary;
  summary["policy_id"] = a.policy;
  summary["embedding_model"] = provider->model_id();
  summary["beta"] = a.beta;
  summary["models"] = ojson::object();
  for (const auto& [model, scores] : by_model) {
    const double n = static_cast<double>(scores.size());
    ojson m;
    m["pairs"] = scores.size();
    double b[4] = {0, 0, 0, 0}, r = 0, f = 0, sb = 0;
    for (const auto* s : scores) {
      for (int k = 0; k < 4; ++k) b[k] += s->bleu[static_cast<std::size_t>(k)];
      r += s->rouge_l.f;
      f += s->bertscore.f1;
      sb += s->sbert;
    }
    for (int k = 0; k < 4; ++k) m[fmt::format("bleu{}", k + 1)] = b[k] / n;
    m["rouge_l"] = r / n;
    m["bertscore_f1"] = f / n;
    m["sbert"] = sb / n;
    summary["models"][model] = std::move(m);
  }
  std::vector<Failure> failures;
  for (const auto& f : corpus.failures) failures.push_back({f.id, f.code, f.message});
  summary["failures"] = failures.size();

  run.write("per_instance.jsonl", jsonl(rows));
  run.write("text_scores.json", summary.dump(2) + "\n");
  write_failures(run, failures);
  return exit_for_failures(failures);
}

// ---------------------------------------------------------------------------

struct EvalClassifyArgs {
  std::string instances;
  std::string predictions;
  std::string manual;
};

int run_eval_classify(const EvalClassifyArgs& a, volmo::RunDirectory& run) {
  namespace m = volmo::metrics;
  run.add_input(a.instances);
  run.add_input(a.predictions);
  std::map<std::string, json> instances;
  for (auto& row : read_jsonl(a.instances)) instances.emplace(row.at("instance_id").get<std::string>(), std::move(row));

  struct BinaryGroup {
    std::vector<bool> golds;
    std::vector<m::ParsedLabel> preds;
  };
  struct StageGroup {
    std::vector<int> golds;
    std::vector<m::ParsedLabel> preds;
    std::set<int> valid;
  };
  // model -> condition / disease -> group
  std::map<std::string, std::map<std::string, BinaryGroup>> binary;
  std::map<std::string, std::map<std::string, StageGroup>> staging;
  std::vector<ojson> per_instance;
  std::vector<Failure> failures;

  for (const auto& p : read_jsonl(a.predictions)) {
    const auto id = p.at("instance_id").get<std::string>();
    const auto model = p.at("model_id").get<std::string>();
    const auto raw = p.at("raw_output").get<std::string>();
    auto it = instances.find(id);
    if (it == instances.end()) {
      failures.push_back({id, "BadInput", "prediction for an unknown instance"});
      continue;
    }
    const auto& inst = it->second;
    ojson rec;
    rec["instance_id"] = id;
    rec["model_id"] = model;
    if (inst.contains("condition")) {
      const bool gold = inst.at("gold").get<std::string>() == "TRUE";
      const auto label = m::parse_binary_label(raw);
      auto& g = binary[model][inst.at("condition").get<std::string>()];
      g.golds.push_back(gold);
      g.preds.push_back(label);
      rec["group"] = inst.at("condition");
      rec["gold"] = gold ? "TRUE" : "FALSE";
      rec["pred"] = label.invalid() ? "INVALID" : (label.kind == m::ParsedLabel::Kind::True ? "TRUE" : "FALSE");
    } else {
      const auto disease = volmo::schema::parse_staging_disease(inst.at("disease").get<std::string>());
      const auto stages = volmo::schema::valid_stages(disease);
      const std::set<int> valid(stages.begin(), stages.end());
      const auto label = m::parse_stage_label(raw, valid);
      auto& g = staging[model][std::string(volmo::schema::to_string(disease))];
      g.valid = valid;
      g.golds.push_back(inst.at("gold").get<int>());
      g.preds.push_back(label);
      rec["group"] = volmo::schema::to_string(disease);
      rec["gold"] = inst.at("gold");
      rec["pred"] = label.invalid() ? ojson("INVALID") : ojson(label.stage);
    }
    rec["rule_fired"] = rec["pred"] == "INVALID" ? "none" : "parsed";
    per_instance.push_back(std::move(rec));
  }

  ojson scores;
  scores["conventions"] = {{"invalid_prediction", "binary: opposite of gold; staging: reserved non-stage"},
                           {"zero_denominator", 0}};
  scores["models"] = ojson::object();
  std::set<std::string> models;
  for (const auto& [model, _] : binary) models.insert(model);
  for (const auto& [model, _] : staging) models.insert(model);
  for (const auto& model : models) {
    ojson mj;
    std::map<std::string, m::ClassificationScores> per_condition;
    ojson conds = ojson::object();
    for (const auto& [cond, g] : binary[model]) {
      const auto r = m::score_binary(g.golds, g.preds);
      per_condition[cond] = r.scores;
      auto cj = m::to_json(r.scores);
      cj["counts"] = m::to_json(r.counts);
      cj["invalid_rate"] = r.invalid_rate;
      conds[cond] = std::move(cj);
    }
    mj["per_condition"] = std::move(conds);
    if (!per_condition.empty()) {
      mj["macro"] = {{"positive_class_f1", m::macro_over_conditions(per_condition, m::F1Field::PositiveClass)},
                     {"class_macro_f1", m::macro_over_conditions(per_condition, m::F1Field::ClassMacro)}};
    }
    ojson stages = ojson::object();
    for (const auto& [disease, g] : staging[model]) stages[disease] = m::to_json(m::score_stages(g.golds, g.preds, g.valid));
    mj["per_stage"] = std::move(stages);
    scores["models"][model] = std::move(mj);
  }

  if (!a.manual.empty()) {
    run.add_input(a.manual);
    std::vector<m::RaterScore> ratings;
    for (const auto& row : read_jsonl(a.manual))
      ratings.push_back({row.at("model_id").get<std::string>(), row.at("sample_id").get<std::string>(),
                         row.at("rater_id").get<std::string>(), row.at("conciseness").get<int>(),
                         row.at("accuracy").get<int>(), row.at("readability").get<int>()});
    scores["manual"] = m::to_json(m::aggregate_manual(ratings));
  }

  run.write("per_instance.jsonl", jsonl(per_instance));
  run.write("scores.json", scores.dump(2) + "\n");
  write_failures(run, failures);
  return exit_for_failures(failures);
}

// ---------------------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> inputs;
  std::string model;
  std::string baseline;
  std::vector<std::string> metrics;
  std::uint64_t seed = 0;
  std::size_t repeats = 100;
  std::size_t sample_size = 30;
  unsigned threads = default_threads();
};

const std::set<std::string>& classification_metrics() {
  static const std::set<std::string> names{"f1", "class_macro_f1", "precision", "sensitivity", "specificity"};
  return names;
}

double classification_value(const volmo::metrics::ClassificationScores& s, const std::string& name) {
  if (name == "f1") return s.f1;
  if (name == "class_macro_f1") return s.class_macro_f1;
  if (name == "precision") return s.precision;
  if (name == "sensitivity") return s.recall;
  return s.specificity;
}

/// Replicate metric over per-instance records: the mean of a numeric field,
/// or a classification score recomputed on the drawn instances (in percent).
volmo::stats::ReplicateMetric make_metric(const std::vector<const json*>& rows, const std::string& name) {
  namespace m = volmo::metrics;
  if (!classification_metrics().count(name)) {
    std::vector<double> values;
    for (const auto* r : rows) {
      if (!r->contains(name) || !(*r)[name].is_number())
        throw volmo::Error(volmo::ErrorCode::BadInput, "record lacks numeric field " + name);
      values.push_back((*r)[name].get<double>());
    }
    return [values](std::span<const std::size_t> idx) {
      double s = 0.0;
      for (auto i : idx) s += values[i];
      return s / static_cast<double>(idx.size());
    };
  }
  const bool staged = rows.front()->at("gold").is_number();
  if (!staged) {
    std::vector<bool> golds;
    std::vector<m::ParsedLabel> preds;
    for (const auto* r : rows) {
      golds.push_back(r->at("gold") == "TRUE");
      m::ParsedLabel l;
      const auto p = r->at("pred").get<std::string>();
      l.kind = p == "TRUE" ? m::ParsedLabel::Kind::True : p == "FALSE" ? m::ParsedLabel::Kind::False : m::ParsedLabel::Kind::Invalid;
      preds.push_back(l);
    }
    return [golds, preds, name](std::span<const std::size_t> idx) {
      std::vector<bool> g;
      std::vector<m::ParsedLabel> p;
      for (auto i : idx) {
        g.push_back(golds[i]);
        p.push_back(preds[i]);
      }
      return 100.0 * classification_value(m::score_binary(g, p).scores, name);
    };
  }
  std::vector<int> golds;
  std::vector<m::ParsedLabel> preds;
  std::set<int> valid;
  for (const auto* r : rows) {
    golds.push_back(r->at("gold").get<int>());
    valid.insert(golds.back());
    m::ParsedLabel l;
    if (r->at("pred").is_number()) {
      l.kind = m::ParsedLabel::Kind::Stage;
      l.stage = r->at("pred").get<int>();
    }
    preds.push_back(l);
  }
  return [golds, preds, valid, name](std::span<const std::size_t> idx) {
    std::vector<int> g;
    std::vector<m::ParsedLabel> p;
    for (auto i : idx) {
      g.push_back(golds[i]);
      p.push_back(preds[i]);
    }
    return 100.0 * classification_value(m::score_stages(g, p, valid).overall, name);
  };
}

int run_compare(const CompareArgs& a, volmo::RunDirectory& run) {
  std::vector<json> all;
  for (const auto& in : a.inputs) {
    run.add_input(in);
    auto rows = read_jsonl(in);
    all.insert(all.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
  }
  std::map<std::string, const json*> model_rows, baseline_rows;
  for (const auto& r : all) {
    const auto model = r.at("model_id").get<std::string>();
    const auto id = r.at("instance_id").get<std::string>();
    if (model == a.model) model_rows[id] = &r;
    else if (model == a.baseline) baseline_rows[id] = &r;
  }
  std::vector<const json*> x, y;
  for (const auto& [id, row] : model_rows) {
    auto it = baseline_rows.find(id);
    if (it == baseline_rows.end()) continue;
    x.push_back(row);
    y.push_back(it->second);
  }
  if (x.empty())
    throw volmo::Error(volmo::ErrorCode::EmptyInput, "no instances scored for both " + a.model + " and " + a.baseline);

  const volmo::stats::BootstrapConfig config{a.sample_size, a.repeats, a.seed};
  const auto schedule = volmo::stats::ResampleSchedule::generate(x.size(), config);

  ojson out;
  out["model"] = a.model;
  out["baseline"] = a.baseline;
  out["paired_instances"] = x.size();
  out["config"] = volmo::stats::to_json(config);
  out["comparisons"] = ojson::array();
  for (const auto& metric : a.metrics) {
    const auto scale = classification_metrics().count(metric) ? volmo::stats::Scale::Percentage : volmo::stats::Scale::Text;
    const auto sm = volmo::stats::bootstrap(metric, schedule, make_metric(x, metric), a.threads);
    const auto sb = volmo::stats::bootstrap(metric, schedule, make_metric(y, metric), a.threads);
    ojson c;
    c["metric"] = metric;
    c["scale"] = scale == volmo::stats::Scale::Text ? "text" : "percentage";
    c["model"] = volmo::stats::to_json(sm);
    c["baseline"] = volmo::stats::to_json(sb);
    try {
      const auto w = volmo::stats::wilcoxon_signed_rank(sm.replicate_values, sb.replicate_values);
      c["wilcoxon"] = volmo::stats::to_json(w);
      c["formatted"] = volmo::stats::format_comparison(sm, sb, w, scale);
    } catch (const volmo::Error& e) {
      if (e.code() != volmo::ErrorCode::InsufficientPairs) throw;
      c["wilcoxon"] = {{"error", volmo::to_string(e.code())}, {"message", e.what()}};
      c["formatted"] = volmo::stats::format_summary(sm, scale);
    }
    out["comparisons"].push_back(std::move(c));
  }
  run.write("comparison.json", out.dump(2) + "\n");
  run.write("schedule.json", schedule.to_json().dump() + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::vector<int> stages{1, 2, 3};
  std::string overrides;
  std::string validate;
};

int run_emit_train(const TrainArgs& a, volmo::RunDirectory& run) {
  if (!a.validate.empty()) {
    run.add_input(a.validate);
    const auto verdict = volmo::train::validate_training_config_text(volmo::text::read_file(a.validate));
    run.write("validation.json", volmo::train::to_json(verdict).dump(2) + "\n");
    return verdict.ok ? kExitOk : static_cast<int>(volmo::ExitClass::Input);
  }
  json overrides;
  if (!a.overrides.empty()) {
    run.add_input(a.overrides);
    try {
      overrides = json::parse(volmo::text::read_file(a.overrides));
    } catch (const json::parse_error& e) {
      throw volmo::Error(volmo::ErrorCode::UnparseableDocument, e.what());
    }
  }
  for (int stage : a.stages)
    run.write(fmt::format("train.stage{}.json", stage), volmo::train::emit_training_config(stage, overrides));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ophthalmology corpus, instruction-data and evaluation toolkit"};
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.set_version_flag("--version", std::string(volmo::kToolVersion));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::string out_dir = "runs";
  app.add_option("--out-dir", out_dir, "Run directory for outputs");

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Parse JATS XML into article records and figure-caption pairs");
  extract->add_option("--input", ex.inputs, "XML files or directories")->required();
  extract->add_flag("--no-journal-filter", ex.no_journal_filter, "Keep articles from every journal");
  extract->add_option("--threads", ex.threads)->check(CLI::PositiveNumber);

  ReviseArgs rv;
  auto* revise = app.add_subcommand("revise", "Rewrite figure captions with a chat-completion model");
  revise->add_option("--input", rv.input, "figures.jsonl from extract")->required()->check(CLI::ExistingFile);
  revise->add_option("--provider", rv.provider, "Chat-completions endpoint URL")->envname("VOLMO_LLM_URL");
  revise->add_option("--api-key", rv.api_key)->envname("VOLMO_LLM_KEY");
  revise->add_option("--model", rv.model);
  revise->add_flag("--offline", rv.offline, "Skip the provider; clean captions locally");
  revise->add_flag("--no-fallback", rv.no_fallback, "Fail instead of cleaning locally when the provider fails");
  revise->add_option("--max-attempts", rv.max_attempts)->check(CLI::PositiveNumber);
  revise->add_option("--max-in-flight", rv.max_in_flight)->check(CLI::PositiveNumber);
  revise->add_option("--timeout", rv.timeout, "Request timeout in seconds")->check(CLI::PositiveNumber);

  ConvertArgs cv;
  auto* convert = app.add_subcommand("convert", "Convert labelled benchmark tables into instruction instances");
  convert->add_option("--input", cv.inputs, "CSV or JSONL label tables")->required()->check(CLI::ExistingFile);
  convert->add_option("--mapping", cv.mappings, "Column mapping per input (TOML)")->required()->check(CLI::ExistingFile);
  convert->add_option("--seed", cv.seed, "Seed for generated splits");
  convert->add_option("--test-fraction", cv.test_fraction)->check(CLI::Range(0.0, 1.0));

  DialogueArgs dg;
  auto* dialogues = app.add_subcommand("dialogues", "Build five-turn clinical dialogues from case profiles");
  dialogues->add_option("--input", dg.input, "Case profiles, one JSON object per line")->required()->check(CLI::ExistingFile);
  dialogues->add_option("--answers", dg.answers, "Model answers to parse ({case_id, task, raw_output})")
      ->check(CLI::ExistingFile);

  EvalTextArgs et;
  auto* eval_text = app.add_subcommand("eval-text", "BLEU, ROUGE-L, BERTScore and SBERT for generated text");
  eval_text->add_option("--input", et.input, "Pairs: {id, model_id, candidate, reference}")->required()->check(CLI::ExistingFile);
  eval_text->add_option("--provider", et.provider, "stub, an embedding service URL, or a precomputed JSONL file")
      ->envname("VOLMO_EMBED_URL");
  eval_text->add_option("--policy", et.policy, "Tokenization policy");
  eval_text->add_option("--beta", et.beta, "ROUGE-L beta")->check(CLI::PositiveNumber);
  eval_text->add_flag("--raw-dot", et.raw_dot, "BERTScore on raw dot products instead of cosine");
  eval_text->add_option("--threads", et.threads)->check(CLI::PositiveNumber);

  EvalClassifyArgs ec;
  auto* eval_classify = app.add_subcommand("eval-classify", "Screening and staging scores from model outputs");
  eval_classify->add_option("--instances", ec.instances, "instances.jsonl from convert")->required()->check(CLI::ExistingFile);
  eval_classify->add_option("--predictions", ec.predictions, "{instance_id, model_id, raw_output} lines")
      ->required()
      ->check(CLI::ExistingFile);
  eval_classify->add_option("--manual", ec.manual, "Manual ratings {model_id, sample_id, rater_id, ...}")
      ->check(CLI::ExistingFile);

  CompareArgs cp;
  auto* compare = app.add_subcommand("compare", "Paired bootstrap and Wilcoxon signed-rank comparison of two models");
  compare->add_option("--input", cp.inputs, "per_instance.jsonl files")->required()->check(CLI::ExistingFile);
  compare->add_option("--model", cp.model)->required();
  compare->add_option("--baseline", cp.baseline)->required();
  compare->add_option("--metric", cp.metrics, "Per-instance field or f1/class_macro_f1/precision/sensitivity/specificity")
      ->required();
  compare->add_option("--seed", cp.seed);
  compare->add_option("--repeats", cp.repeats)->check(CLI::PositiveNumber);
  compare->add_option("--sample-size", cp.sample_size)->check(CLI::PositiveNumber);
  compare->add_option("--threads", cp.threads)->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* emit_train = app.add_subcommand("emit-train-config", "Write or check training configuration documents");
  emit_train->add_option("--stage", tr.stages, "Stages to emit")->check(CLI::Range(1, 3));
  emit_train->add_option("--overrides", tr.overrides, "JSON object of per-stage overrides")->check(CLI::ExistingFile);
  emit_train->add_option("--validate", tr.validate, "Check an existing document instead of emitting")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    volmo::RunDirectory run(out_dir, sub->get_name(), config_snapshot(*sub));
    int code = kExitOk;
    if (sub == extract) code = run_extract(ex, run);
    else if (sub == revise) code = run_revise(rv, run);
    else if (sub == convert) code = run_convert(cv, run);
    else if (sub == dialogues) code = run_dialogues(dg, run);
    else if (sub == eval_text) code = run_eval_text(et, run);
    else if (sub == eval_classify) code = run_eval_classify(ec, run);
    else if (sub == compare) code = run_compare(cp, run);
    else if (sub == emit_train) code = run_emit_train(tr, run);
    run.finish();
    if (code != kExitOk) log_error("ItemFailures", code, "see failures.jsonl or validation.json in " + out_dir);
    return code;
  } catch (const volmo::Error& e) {
    const int code = static_cast<int>(volmo::exit_class(e.code()));
    log_error(volmo::to_string(e.code()), code, e.what());
    return code;
  } catch (const json::exception& e) {
    log_error("BadInput", 2, e.what());
    return static_cast<int>(volmo::ExitClass::Input);
  } catch (const std::filesystem::filesystem_error& e) {
    log_error("Io", 2, e.what());
    return static_cast<int>(volmo::ExitClass::Input);
  }
}
