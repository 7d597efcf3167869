#include "tdgfn/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tdgfn/errors.hpp"

namespace tdgfn {

std::string fnv64_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string fnv64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open for hashing: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv64_hex(ss.str());
}

void Manifest::record(const std::string& stage, const std::string& file) {
  stages[stage] = StageEntry{file, fnv64_file(file)};
}

void Manifest::require(const std::string& stage, const std::string& file) const {
  const auto it = stages.find(stage);
  if (it == stages.end())
    throw ConfigError("manifest has no record of stage '" + stage +
                      "'; run the producing stage first");
  const std::string actual = fnv64_file(file);
  if (actual != it->second.fnv64)
    throw ConfigError("stage '" + stage + "' artifact " + file +
                      " does not match its manifest hash (expected " +
                      it->second.fnv64 + ", found " + actual + ")");
}

void save_manifest(const Manifest& m, const std::string& path) {
  nlohmann::json j;
  j["format"] = "tdgfn-manifest-v1";
  j["version"] = m.version;
  j["config"] = m.config_snapshot;
  auto& stages = j["stages"] = nlohmann::json::object();
  for (const auto& [name, entry] : m.stages)
    stages[name] = {{"file", entry.file}, {"fnv64", entry.fnv64}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": bad manifest: " + e.what());
  }
  if (j.value("format", "") != "tdgfn-manifest-v1")
    throw ConfigError(path + ": unknown manifest format");
  Manifest m;
  m.version = j.value("version", "");
  m.config_snapshot = j.value("config", "");
  for (const auto& [name, entry] : j.at("stages").items())
    m.stages[name] = Manifest::StageEntry{entry.at("file").get<std::string>(),
                                          entry.at("fnv64").get<std::string>()};
  return m;
}

}  // namespace tdgfn
