// The CLI command bodies and the deterministic design generators they use.
// Kept apart from main() so tests can drive the commands directly.
#pragma once

#include "seqgp/config.hpp"
#include "seqgp/design.hpp"

#include <filesystem>
#include <utility>
#include <vector>

namespace seqgp {

struct CommandOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  bool validate_only = false;
  bool resume = false;
};

/// Frequencies (u, v) in 1..M x 1..M ordered by ascending l-infinity norm
/// (ties lexicographic), skipping the conjugate partner of an already
/// emitted frequency: for a real field those rows duplicate information and
/// make noiseless stages singular. At most `count` frequencies.
std::vector<std::pair<int, int>> fourier_frequency_order(Index big_m, Index count);

/// Space-filling pointwise design: Halton(2,3) points snapped to grid cells,
/// duplicates skipped.
std::vector<Index> space_filling_sites(const Grid& grid2d, Index count);

/// One station above each top-layer cell, at the cell top face + standoff.
Matrix default_surface_sites(const Grid& grid3d, double standoff);

/// CSV site list: one "x,y,z" row per line, '#' comments and an optional
/// header allowed. Exact duplicate rows are dropped.
Matrix load_sites_csv(const std::filesystem::path& path);

void cmd_fourier_demo(const Config& config, const CommandOptions& options);
void cmd_grav_campaign(const Config& config, const CommandOptions& options);
void cmd_fit(const Config& config, const CommandOptions& options);
void cmd_sample(const Config& config, const CommandOptions& options);

}  // namespace seqgp
