#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "test_support.hpp"
#include "volmo/text_util.hpp"

using volmo::testing::data_dir;
using volmo::testing::TempDir;

namespace {

/// Runs the CLI with `args`, returning its exit status. Output goes to `log`.
int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string("\"") + VOLMO_CLI + "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) { return volmo::text::read_file(p.string()); }

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& p) {
  std::vector<nlohmann::json> rows;
  const auto data = slurp(p);
  for (auto line : volmo::text::split_lines(data))
    if (!volmo::text::trim(line).empty()) rows.push_back(nlohmann::json::parse(line));
  return rows;
}

}  // namespace

TEST_CASE("usage errors exit 1 and help exits 0") {
  TempDir dir;
  CHECK(run_cli("frobnicate", dir / "log") == 1);
  CHECK(run_cli("", dir / "log") == 1);
  CHECK(run_cli("--help", dir / "log") == 0);
  CHECK(run_cli("extract", dir / "log") == 1);
}

TEST_CASE("extract then offline revise") {
  TempDir dir;
  const auto jats = (data_dir() / "jats").string();
  REQUIRE(run_cli("--out-dir \"" + (dir / "ex").string() + "\" extract --input \"" + jats + "\"", dir / "log") == 2);
  // two unparseable fixtures land in failures.jsonl and set exit 2
  CHECK(read_jsonl(dir / "ex" / "failures.jsonl").size() == 2);
  const auto figures = read_jsonl(dir / "ex" / "figures.jsonl");
  CHECK(figures.size() == 3);
  CHECK(read_jsonl(dir / "ex" / "case_reports.jsonl").size() == 1);
  CHECK(std::filesystem::exists(dir / "ex" / "run_manifest.json"));

  const auto fig_path = (dir / "ex" / "figures.jsonl").string();
  REQUIRE(run_cli("--out-dir \"" + (dir / "rv").string() + "\" revise --offline --input \"" + fig_path + "\"", dir / "log") == 0);
  const auto revised = read_jsonl(dir / "rv" / "revised_figures.jsonl");
  REQUIRE(revised.size() == 3);
  for (const auto& f : revised) CHECK(f["provenance"] == "offline_cleaned");
}

TEST_CASE("revise exits 3 when the provider is down and fallback is off") {
  TempDir dir;
  const auto figures = dir / "figures.jsonl";
  std::ofstream(figures) << R"({"article":"PMC1","figure_id":"F1","graphic_uri":"g.jpg","raw_caption":"Drusen.","issues":[]})"
                         << "\n";
  const std::string url = "http://127.0.0.1:" + std::to_string(volmo::testing::closed_port()) + "/v1/chat/completions";
  CHECK(run_cli("--out-dir \"" + (dir / "rv").string() + "\" revise --no-fallback --max-attempts 1 --timeout 2 --provider " +
                    url + " --input \"" + figures.string() + "\"",
                dir / "log") == 3);
}

TEST_CASE("convert, eval-classify and a byte-identical compare") {
  TempDir dir;
  std::ofstream(dir / "map.toml") << "dataset_name = \"toy\"\nmodality = \"CFP\"\nimage_column = \"file\"\n"
                                     "id_column = \"id\"\nsplit_column = \"split\"\n[conditions]\nglc = \"glaucoma\"\n";
  {
    std::ofstream csv(dir / "labels.csv");
    csv << "id,file,split,glc\n";
    for (int i = 0; i < 60; ++i) csv << i << ",img" << i << ".png,test," << (i % 3 == 0 ? 1 : 0) << "\n";
    csv << "60,,test,1\n";
  }
  REQUIRE(run_cli("--out-dir \"" + (dir / "cv").string() + "\" convert --input \"" + (dir / "labels.csv").string() +
                      "\" --mapping \"" + (dir / "map.toml").string() + "\"",
                  dir / "log") == 0);
  const auto instances = read_jsonl(dir / "cv" / "instances.jsonl");
  CHECK(instances.size() == 60);
  CHECK(read_jsonl(dir / "cv" / "rejects.jsonl").size() == 1);

  {
    std::ofstream preds(dir / "preds.jsonl");
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const auto id = instances[i]["instance_id"].get<std::string>();
      const bool gold = instances[i]["gold"] == "TRUE";
      const bool a_right = i % 5 != 0, b_right = i % 3 != 0;
      preds << nlohmann::json{{"instance_id", id}, {"model_id", "A"}, {"raw_output", (gold == a_right) ? "TRUE" : "FALSE"}}.dump()
            << "\n";
      preds << nlohmann::json{{"instance_id", id}, {"model_id", "B"}, {"raw_output", (gold == b_right) ? "TRUE" : "FALSE"}}.dump()
            << "\n";
    }
  }
  REQUIRE(run_cli("--out-dir \"" + (dir / "ec").string() + "\" eval-classify --instances \"" +
                      (dir / "cv" / "instances.jsonl").string() + "\" --predictions \"" + (dir / "preds.jsonl").string() + "\"",
                  dir / "log") == 0);
  const auto scores = nlohmann::json::parse(slurp(dir / "ec" / "scores.json"));
  CHECK(scores["models"]["A"]["per_condition"].contains("glaucoma"));

  const std::string per_instance = (dir / "ec" / "per_instance.jsonl").string();
  const std::string args = " compare --input \"" + per_instance + "\" --model A --baseline B --metric f1 --metric specificity"
                           " --seed 3 --repeats 50 --sample-size 20";
  REQUIRE(run_cli("--out-dir \"" + (dir / "c1").string() + "\"" + args, dir / "log") == 0);
  REQUIRE(run_cli("--out-dir \"" + (dir / "c2").string() + "\"" + args + " --threads 4", dir / "log") == 0);
  CHECK(slurp(dir / "c1" / "comparison.json") == slurp(dir / "c2" / "comparison.json"));
  CHECK(slurp(dir / "c1" / "schedule.json") == slurp(dir / "c2" / "schedule.json"));
  const auto cmp = nlohmann::json::parse(slurp(dir / "c1" / "comparison.json"));
  CHECK(cmp["comparisons"].size() == 2);
  CHECK(cmp["comparisons"][0]["scale"] == "percentage");
}

TEST_CASE("eval-text with the stub provider and a TOML config file") {
  TempDir dir;
  {
    std::ofstream pairs(dir / "pairs.jsonl");
    pairs << R"({"id":"1","model_id":"A","candidate":"Soft drusen.","reference":"Soft drusen."})" << "\n";
    pairs << R"({"id":"2","model_id":"A","candidate":"","reference":"Hard exudates."})" << "\n";
  }
  std::ofstream(dir / "cfg.toml") << "[eval-text]\nprovider = \"stub\"\nbeta = 1.0\n";
  CHECK(run_cli("--config \"" + (dir / "cfg.toml").string() + "\" --out-dir \"" + (dir / "et").string() +
                    "\" eval-text --input \"" + (dir / "pairs.jsonl").string() + "\"",
                dir / "log") == 2);
  const auto rows = read_jsonl(dir / "et" / "per_instance.jsonl");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0]["bleu1"] == 1.0);
  CHECK(rows[0]["embedding_model"] == "onehot-stub");
  CHECK(read_jsonl(dir / "et" / "failures.jsonl").size() == 1);
}

TEST_CASE("emit-train-config writes and validates documents") {
  TempDir dir;
  REQUIRE(run_cli("--out-dir \"" + (dir / "tr").string() + "\" emit-train-config", dir / "log") == 0);
  for (int s = 1; s <= 3; ++s) CHECK(std::filesystem::exists(dir / "tr" / ("train.stage" + std::to_string(s) + ".json")));
  const auto doc = (dir / "tr" / "train.stage2.json").string();
  CHECK(run_cli("--out-dir \"" + (dir / "v1").string() + "\" emit-train-config --validate \"" + doc + "\"", dir / "log") == 0);
  auto j = nlohmann::json::parse(slurp(doc));
  j["learning_rate"] = 1.0;
  std::ofstream(dir / "bad.json") << j.dump();
  CHECK(run_cli("--out-dir \"" + (dir / "v2").string() + "\" emit-train-config --validate \"" + (dir / "bad.json").string() + "\"",
                dir / "log") == 2);
  const auto verdict = nlohmann::json::parse(slurp(dir / "v2" / "validation.json"));
  CHECK(verdict.dump().find("learning_rate") != std::string::npos);
}

TEST_CASE("dialogues builds scripts and parses answers") {
  TempDir dir;
  {
    std::ofstream profiles(dir / "profiles.jsonl");
    profiles << R"({"case_id":"c1","medical_history":["Hypertension"],"symptoms":[{"description":"Blurred vision"}],)"
                R"("differential_diagnoses":[{"diagnosis":"CRVO","severity":"Severe"}]})"
             << "\n";
    profiles << R"({"case_id":"c2","symptoms":[{"description":""}]})" << "\n";
  }
  std::ofstream(dir / "answers.jsonl") << R"({"case_id":"c1","model_id":"A","task":"differential",)"
                                          R"("raw_output":"1. Diagnosis: CRVO; Severity: Severe\n2. Severity: Mild"})"
                                       << "\n";
  CHECK(run_cli("--out-dir \"" + (dir / "dg").string() + "\" dialogues --input \"" + (dir / "profiles.jsonl").string() +
                    "\" --answers \"" + (dir / "answers.jsonl").string() + "\"",
                dir / "log") == 2);
  const auto scripts = read_jsonl(dir / "dg" / "dialogues.jsonl");
  REQUIRE(scripts.size() == 1);
  CHECK(scripts[0]["turns"].size() == 5);
  CHECK(scripts[0]["turns"][0]["prompt_only"] == false);
  CHECK(scripts[0]["turns"][1]["prompt_only"] == true);
  const auto failures = read_jsonl(dir / "dg" / "failures.jsonl");
  REQUIRE(failures.size() == 1);
  CHECK(failures[0].dump().find("InvalidProfile") != std::string::npos);
  const auto reports = read_jsonl(dir / "dg" / "answer_reports.jsonl");
  REQUIRE(reports.size() == 1);
  CHECK(reports[0]["report"]["well_formed"] == 1);
  CHECK(reports[0]["report"]["malformed"] == 1);
}
