#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pidet {

inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// "fnv1a64:" + 16 hex digits over the file bytes.
inline std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file_fingerprint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

struct InputRecord {
  std::string path;
  std::string fingerprint;
};

// Sidecar written next to every artifact a command produces, recording what
// ran and on which inputs. Timings live only here, never in the artifact,
// so artifacts stay byte-reproducible.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<InputRecord> inputs;
  std::vector<std::string> outputs;
  double elapsed_seconds = 0.0;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& in : m.inputs)
    inputs.push_back({{"path", in.path}, {"fingerprint", in.fingerprint}});
  return {{"command", m.command}, {"config", m.config},   {"seed", m.seed},
          {"inputs", inputs},     {"outputs", m.outputs}, {"elapsed_seconds", m.elapsed_seconds}};
}

inline void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
  out << manifest_to_json(m).dump(2) << "\n";
}

}  // namespace pidet
