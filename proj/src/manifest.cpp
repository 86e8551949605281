#include "stvg/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "stvg/errors.hpp"
#include "stvg/rng.hpp"

namespace stvg {

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for hashing: " + path);
  uint64_t h = 1469598103934665603ULL;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

void RunManifest::add_input(const std::string& path) {
  input_hashes.emplace_back(path, file_hash(path));
}

void RunManifest::write(const std::string& path) const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [p, h] : input_hashes) inputs.push_back({{"path", p}, {"hash", h}});
  j["inputs"] = std::move(inputs);
  j["outputs"] = outputs;
  j["wall_clock_sec"] = wall_clock_sec;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace stvg
