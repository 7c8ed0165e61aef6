#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"

namespace knowdis {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Content-hashed record of one stage's inputs and outputs.
///
/// `output_hash` is derived from output contents only (never paths or
/// timestamps), so two runs over identical inputs agree on it even though
/// `timestamp` differs.
struct DatasetManifest {
  std::string stage;
  std::map<std::string, std::string> input_hashes;
  std::map<std::string, std::string> output_files;  // file name -> sha256
  std::string output_hash;
  std::map<std::string, std::int64_t> counts;
  std::string config;  // verbatim config text
  nlohmann::json overrides = nlohmann::json::object();
  std::string timestamp;

  /// output_hash := sha256 over "name:hash\n" of output_files in name order.
  void seal();

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static DatasetManifest load(const std::filesystem::path& path);
};

std::string utc_timestamp();

}  // namespace knowdis
