#pragma once

#include <map>
#include <string>

namespace tdgfn {

inline constexpr const char* kVersionTag = "0.1.0";

std::string fnv64_hex(const std::string& bytes);
std::string fnv64_file(const std::string& path);

// Per-experiment record of the resolved config and a checksum for every
// stage artifact. Later stages refuse to run when an upstream file no longer
// matches its recorded hash.
struct Manifest {
  std::string version = kVersionTag;
  std::string config_snapshot;
  struct StageEntry {
    std::string file;
    std::string fnv64;
  };
  std::map<std::string, StageEntry> stages;

  void record(const std::string& stage, const std::string& file);
  // Throws ConfigError when the artifact is missing or its hash changed.
  void require(const std::string& stage, const std::string& file) const;
};

void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

}  // namespace tdgfn
