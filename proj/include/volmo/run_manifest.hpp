#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace volmo {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// UTC, second resolution, e.g. "2024-01-01T00:00:00Z".
std::string utc_timestamp();

struct InputDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string run_id;
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<InputDigest> inputs;
  std::vector<std::string> outputs;  // relative to the run directory
  std::string started;
  std::string finished;
  std::string tool_version = std::string(kToolVersion);
};

nlohmann::ordered_json to_json(const RunManifest& m);
RunManifest run_manifest_from_json(const nlohmann::json& j);

/// Collects outputs for one subcommand invocation and writes
/// run_manifest.json last, once every listed output exists.
class RunDirectory {
 public:
  RunDirectory(std::filesystem::path dir, std::string command, nlohmann::ordered_json config);

  const std::filesystem::path& path() const noexcept { return dir_; }

  /// Hashes a file (or every regular file below a directory) as an input.
  void add_input(const std::filesystem::path& path);
  /// Atomically writes `name` (relative) and records it as an output.
  void write(const std::string& name, std::string_view content);

  /// Writes run_manifest.json. Throws Error(Io) if a listed output is missing.
  RunManifest finish();

 private:
  std::filesystem::path dir_;
  RunManifest manifest_;
};

/// Inputs from `manifest` whose current content no longer matches the digest.
std::vector<std::string> stale_inputs(const RunManifest& manifest);

}  // namespace volmo
