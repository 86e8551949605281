#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace stvg {

// FNV-1a 64 over the file bytes, as a hex string.
std::string file_hash(const std::string& path);

// Reproducibility sidecar written next to each command's primary output.
// The manifest is the only artifact carrying wall-clock time; metric outputs
// stay byte-identical across reruns.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> input_hashes;  // path, hash
  std::vector<std::string> outputs;
  double wall_clock_sec = 0.0;

  void add_input(const std::string& path);
  void write(const std::string& path) const;
};

}  // namespace stvg
