// Run manifests: enough to reproduce a run bit-for-bit given the same build.
#pragma once

#include "seqgp/config.hpp"
#include "seqgp/grid.hpp"
#include "seqgp/kernels.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace seqgp {

struct RunManifest {
  nlohmann::json doc;

  static RunManifest create(const std::string& command, const Config& config,
                            std::uint64_t seed);
  void set_grid(const Grid& grid);
  void set_kernel(const PriorModel& model);
  void log_stage(const std::string& op_kind, Index p, double tau2);
  void set_storage_bytes(std::uint64_t bytes);
  void add_output(const std::string& relative_path);
  void write(const std::filesystem::path& path) const;

  static RunManifest read(const std::filesystem::path& path);
};

}  // namespace seqgp
