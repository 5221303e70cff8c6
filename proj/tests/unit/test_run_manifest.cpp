#include <doctest.h>

#include <fstream>

#include "test_support.hpp"
#include "volmo/error.hpp"
#include "volmo/run_manifest.hpp"

using namespace volmo;

TEST_CASE("run directory records inputs and outputs") {
  volmo::testing::TempDir dir;
  const auto input = dir / "input.txt";
  std::ofstream(input) << "abc";
  RunDirectory run(dir / "run", "extract", {{"threads", 2}});
  run.add_input(input);
  run.write("out/result.jsonl", "{}\n");
  const auto m = run.finish();
  CHECK(m.command == "extract");
  REQUIRE(m.inputs.size() == 1);
  CHECK(m.inputs[0].sha256 == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(m.outputs == std::vector<std::string>{"out/result.jsonl"});
  CHECK(m.tool_version == kToolVersion);
  CHECK(std::filesystem::exists(dir / "run" / "run_manifest.json"));

  const auto back = run_manifest_from_json(nlohmann::json::parse(text::read_file((dir / "run" / "run_manifest.json").string())));
  CHECK(back.run_id == m.run_id);
  CHECK(back.config == m.config);
  CHECK(stale_inputs(back).empty());
  std::ofstream(input) << "changed";
  CHECK(stale_inputs(back) == std::vector<std::string>{m.inputs[0].path});
}

TEST_CASE("finish refuses a missing output") {
  volmo::testing::TempDir dir;
  RunDirectory run(dir / "run", "convert", nlohmann::ordered_json::object());
  run.write("a.json", "1");
  std::filesystem::remove(dir / "run" / "a.json");
  try {
    (void)run.finish();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}

TEST_CASE("atomic write replaces content and timestamps are UTC") {
  volmo::testing::TempDir dir;
  write_atomic(dir / "f.txt", "one");
  write_atomic(dir / "f.txt", "two");
  CHECK(text::read_file((dir / "f.txt").string()) == "two");
  const auto ts = utc_timestamp();
  CHECK(ts.size() == 20);
  CHECK(ts.back() == 'Z');
}
