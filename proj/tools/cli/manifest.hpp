#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace cale::cli {

inline constexpr const char* kVersion = "0.1.0";

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  // role -> {path, sha256}
  std::map<std::string, std::pair<std::string, std::string>> inputs;
  std::uint64_t seed = 0;
  std::string version = kVersion;

  void add_input(const std::string& role, const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

}  // namespace cale::cli
