#include "manifest.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include "cdi/errors.hpp"

namespace cdi::cli {

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError(fmt::format("cannot read {}", path));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DomainError(fmt::format("cannot write {}", path));
  out << bytes;
  if (!out) throw DomainError(fmt::format("write to {} failed", path));
}

Json to_json(const RunManifest& m) {
  Json j;
  j["command"] = m.command;
  j["args"] = m.args;
  j["parameters"] = m.parameters;
  j["seed"] = m.seed;
  j["library_version"] = m.library_version;
  j["wall_time_ms"] = m.wall_time_ms;
  Json outs = Json::array();
  for (const OutputDigest& o : m.outputs) outs.push_back({{"path", o.path}, {"sha256", o.sha256}});
  j["outputs"] = outs;
  return j;
}

RunManifest manifest_from_json(const Json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.parameters = j.value("parameters", Json::object());
    m.seed = j.value("seed", std::uint64_t{0});
    m.library_version = j.value("library_version", std::string{});
    m.wall_time_ms = j.value("wall_time_ms", 0.0);
    for (const Json& o : j.at("outputs")) {
      m.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(fmt::format("malformed manifest: {}", e.what()));
  }
  return m;
}

std::string manifest_path(const std::string& output_path) { return output_path + ".manifest.json"; }

}  // namespace cdi::cli
