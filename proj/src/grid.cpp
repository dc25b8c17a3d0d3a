#include "seqgp/grid.hpp"

#include <sstream>

namespace seqgp {

std::array<Index, 3> Grid::multi_index(Index flat) const {
  std::array<Index, 3> idx{0, 0, 0};
  for (int a = dim - 1; a >= 0; --a) {
    idx[a] = flat % shape[a];
    flat /= shape[a];
  }
  return idx;
}

Index Grid::flat_index(const std::array<Index, 3>& multi) const {
  Index flat = 0;
  for (int a = 0; a < dim; ++a) flat = flat * shape[a] + multi[a];
  return flat;
}

Grid build_grid(int dim, const std::vector<Index>& shape, const std::vector<double>& spacing,
                const std::vector<double>& origin) {
  if (dim < 1 || dim > 3) throw ConfigError("grid dim must be 1, 2 or 3");
  if (shape.size() != static_cast<std::size_t>(dim) ||
      spacing.size() != static_cast<std::size_t>(dim) ||
      origin.size() != static_cast<std::size_t>(dim))
    throw ConfigError("grid shape/spacing/origin must each have dim entries");
  Index m = 1;
  for (int a = 0; a < dim; ++a) {
    if (shape[a] < 1) throw ConfigError("grid shape entries must be >= 1");
    if (!(spacing[a] > 0.0)) throw ConfigError("grid spacing must be positive");
    m *= shape[a];
  }

  Grid g;
  g.dim = dim;
  g.shape = shape;
  g.spacing = spacing;
  g.origin = origin;
  g.cell_volume = 1.0;
  for (int a = 0; a < dim; ++a) g.cell_volume *= spacing[a];

  g.points.resize(m, dim);
  std::array<Index, 3> idx{0, 0, 0};
  for (Index i = 0; i < m; ++i) {
    for (int a = 0; a < dim; ++a) g.points(i, a) = origin[a] + static_cast<double>(idx[a]) * spacing[a];
    for (int a = dim - 1; a >= 0; --a) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  return g;
}

ChunkPlan plan_chunks(Index m, Index chunk_size) {
  if (chunk_size < 1) throw ConfigError("chunk size must be >= 1");
  if (m < 0) throw ConfigError("negative point count");
  ChunkPlan plan;
  plan.chunk_size = chunk_size;
  for (Index begin = 0; begin < m; begin += chunk_size)
    plan.ranges.emplace_back(begin, std::min(begin + chunk_size, m));
  return plan;
}

ChunkPlan plan_chunks(const Grid& grid, Index chunk_size) {
  return plan_chunks(grid.size(), chunk_size);
}

}  // namespace seqgp
