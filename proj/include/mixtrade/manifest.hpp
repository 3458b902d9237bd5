#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace mixtrade {

// Artifact version stamped into every manifest and checkpoint-free
// output; bump on format changes.
inline constexpr const char* kVersionTag = "mixtrade-0.1.0";

// FNV-1a, 64-bit: tiny, dependency-free, stable across platforms --
// plenty for verifying an input file is the one the manifest names.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t v);

// What a run needs to be reproduced: the command, its config and data
// (with hashes), the seed and where the artifacts went. Written to
// manifest.json in the output directory before any work starts.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_hash = "none";
  std::string data_path;
  std::string data_hash = "none";
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string version = kVersionTag;
};

nlohmann::json manifest_json(const RunManifest& m);

// Creates the directory if needed and writes manifest.json into it.
void write_manifest(const RunManifest& m, const std::string& dir);

}  // namespace mixtrade
