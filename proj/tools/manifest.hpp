#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json_io.hpp"

namespace cdi::cli {

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

struct OutputDigest {
  std::string path;
  std::string sha256;
};

/// Everything needed to rerun a command and check its outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;  // argv without the program name
  Json parameters;                // effective values, defaults included
  std::uint64_t seed = 0;
  std::string library_version;
  double wall_time_ms = 0.0;
  std::vector<OutputDigest> outputs;
};

Json to_json(const RunManifest& m);
RunManifest manifest_from_json(const Json& j);

/// Manifest path for an output file.
std::string manifest_path(const std::string& output_path);

}  // namespace cdi::cli
