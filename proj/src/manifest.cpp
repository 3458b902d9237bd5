#include "mixtrade/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mixtrade/errors.hpp"

namespace mixtrade {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("hash: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return std::string(buf);
}

nlohmann::json manifest_json(const RunManifest& m) {
  return nlohmann::json{{"command", m.command},
                        {"config_path", m.config_path},
                        {"config_hash", m.config_hash},
                        {"data_path", m.data_path},
                        {"data_hash", m.data_hash},
                        {"seed", m.seed},
                        {"output_dir", m.output_dir},
                        {"version", m.version}};
}

void write_manifest(const RunManifest& m, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("manifest: cannot create directory " + dir);
  const std::string path = dir + "/manifest.json";
  std::ofstream out(path);
  if (!out) throw DataError("manifest: cannot write " + path);
  out << manifest_json(m).dump(2) << "\n";
  if (!out) throw DataError("manifest: failed while writing " + path);
}

}  // namespace mixtrade
