#pragma once

// Provenance record for a pipeline stage. The manifest digest covers tool
// version, configuration, input digests and seed; timestamps are recorded
// but excluded so that reruns produce identical digests.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "phasescope/error.hpp"
#include "phasescope/hash.hpp"
#include "phasescope/version.hpp"

namespace phasescope {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct InputFile {
  std::string path;
  std::string digest;
};

struct RunManifest {
  std::string tool_version = kToolVersion;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::vector<InputFile>> inputs;  // role -> files
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;

  void add_input(const std::string& role, const std::string& path) {
    inputs[role].push_back({path, digest_file(path)});
  }

  std::string config_digest() const { return digest_string(config.dump()); }

  /// Paths are not part of the digest, only file contents.
  std::string digest() const {
    nlohmann::ordered_json j;
    j["tool_version"] = tool_version;
    j["config_digest"] = config_digest();
    nlohmann::ordered_json in = nlohmann::ordered_json::object();
    for (const auto& [role, files] : inputs) {
      auto& arr = in[role] = nlohmann::ordered_json::array();
      for (const auto& f : files) arr.push_back(f.digest);
    }
    j["inputs"] = in;
    j["seed"] = seed;
    return digest_string(j.dump());
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool_version"] = tool_version;
    j["config"] = config;
    j["config_digest"] = config_digest();
    nlohmann::ordered_json in = nlohmann::ordered_json::object();
    for (const auto& [role, files] : inputs) {
      auto& arr = in[role] = nlohmann::ordered_json::array();
      for (const auto& f : files) arr.push_back({{"path", f.path}, {"digest", f.digest}});
    }
    j["inputs"] = in;
    j["seed"] = seed;
    j["started"] = started;
    j["finished"] = finished;
    j["digest"] = digest();
    return j;
  }

  static RunManifest from_json(const nlohmann::ordered_json& j) {
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config = j.at("config");
    for (const auto& [role, files] : j.at("inputs").items()) {
      for (const auto& f : files) {
        m.inputs[role].push_back({f.at("path").get<std::string>(), f.at("digest").get<std::string>()});
      }
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    return m;
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << to_json().dump(2) << '\n';
  }

  static RunManifest read(const std::string& path, std::string* stored_digest = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ": " + e.what());
    }
    if (stored_digest) *stored_digest = j.value("digest", "");
    return from_json(j);
  }
};

/// Re-hashes every recorded input and the manifest itself. Returns one
/// message per mismatch; empty means the manifest verifies.
inline std::vector<std::string> verify_manifest(const std::string& path) {
  std::string stored;
  const auto m = RunManifest::read(path, &stored);
  std::vector<std::string> problems;
  for (const auto& [role, files] : m.inputs) {
    for (const auto& f : files) {
      try {
        if (digest_file(f.path) != f.digest) problems.push_back(role + " input changed: " + f.path);
      } catch (const IoError&) {
        problems.push_back(role + " input missing: " + f.path);
      }
    }
  }
  if (m.digest() != stored) problems.push_back("manifest digest mismatch");
  return problems;
}

}  // namespace phasescope
