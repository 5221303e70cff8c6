#include "volmo/run_manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "volmo/digest.hpp"
#include "volmo/error.hpp"

namespace volmo {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  const fs::path tmp = path.string() + fmt::format(".tmp{:016x}", rng());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::Io, "cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["run_id"] = m.run_id;
  j["command"] = m.command;
  j["config"] = m.config;
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& i : m.inputs) j["inputs"].push_back({{"path", i.path}, {"sha256", i.sha256}});
  j["outputs"] = m.outputs;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["tool_version"] = m.tool_version;
  return j;
}

RunManifest run_manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    for (const auto& i : j.at("inputs")) m.inputs.push_back({i.at("path").get<std::string>(), i.at("sha256").get<std::string>()});
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadInput, std::string("bad run manifest: ") + e.what());
  }
}

RunDirectory::RunDirectory(fs::path dir, std::string command, nlohmann::ordered_json config) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  manifest_.command = std::move(command);
  manifest_.config = std::move(config);
  manifest_.started = utc_timestamp();
  const auto stamp = std::chrono::duration_cast<std::chrono::nanoseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
  manifest_.run_id = fmt::format("{}-{}", manifest_.command,
                                 sha256_hex(manifest_.config.dump() + std::to_string(stamp)).substr(0, 12));
}

void RunDirectory::add_input(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) manifest_.inputs.push_back({f.string(), sha256_file_hex(f.string())});
    return;
  }
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::Io, "input not found: " + path.string());
  manifest_.inputs.push_back({path.string(), sha256_file_hex(path.string())});
}

void RunDirectory::write(const std::string& name, std::string_view content) {
  write_atomic(dir_ / name, content);
  manifest_.outputs.push_back(name);
}

RunManifest RunDirectory::finish() {
  for (const auto& o : manifest_.outputs)
    if (!fs::exists(dir_ / o)) throw Error(ErrorCode::Io, "declared output is missing: " + o);
  manifest_.finished = utc_timestamp();
  write_atomic(dir_ / "run_manifest.json", to_json(manifest_).dump(2) + "\n");
  return manifest_;
}

std::vector<std::string> stale_inputs(const RunManifest& manifest) {
  std::vector<std::string> out;
  for (const auto& i : manifest.inputs) {
    if (!fs::is_regular_file(i.path) || sha256_file_hex(i.path) != i.sha256) out.push_back(i.path);
  }
  return out;
}

}  // namespace volmo
