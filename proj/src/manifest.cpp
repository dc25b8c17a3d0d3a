#include "seqgp/manifest.hpp"

#include "seqgp/io.hpp"

#include <chrono>
#include <fstream>

namespace seqgp {

using nlohmann::json;

RunManifest RunManifest::create(const std::string& command, const Config& config,
                                std::uint64_t seed) {
  RunManifest manifest;
  manifest.doc["command"] = command;
  manifest.doc["seed"] = seed;
  json cfg = json::object();
  for (const auto& [section, entries] : config.sections()) {
    json sec = json::object();
    for (const auto& [key, value] : entries) sec[key] = value;
    cfg[section] = sec;
  }
  manifest.doc["config"] = cfg;
  manifest.doc["stages"] = json::array();
  manifest.doc["outputs"] = json::array();
  manifest.doc["created_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
  return manifest;
}

void RunManifest::set_grid(const Grid& grid) {
  doc["grid"] = {{"dim", grid.dim},
                 {"shape", grid.shape},
                 {"spacing", grid.spacing},
                 {"origin", grid.origin}};
}

void RunManifest::set_kernel(const PriorModel& model) {
  doc["kernel"] = {{"family", to_string(model.kernel.family)},
                   {"sigma0", model.kernel.sigma0},
                   {"lambda0", model.kernel.lambda0},
                   {"m0", model.m0}};
}

void RunManifest::log_stage(const std::string& op_kind, Index p, double tau2) {
  doc["stages"].push_back({{"op_kind", op_kind},
                           {"p", p},
                           {"tau2", tau2},
                           {"unix_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                           std::chrono::system_clock::now().time_since_epoch())
                                           .count()}});
}

void RunManifest::set_storage_bytes(std::uint64_t bytes) { doc["storage_bytes"] = bytes; }

void RunManifest::add_output(const std::string& relative_path) {
  doc["outputs"].push_back(relative_path);
}

void RunManifest::write(const std::filesystem::path& path) const {
  atomic_write_text(path, doc.dump(2) + "\n");
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  RunManifest manifest;
  try {
    manifest.doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  return manifest;
}

}  // namespace seqgp
