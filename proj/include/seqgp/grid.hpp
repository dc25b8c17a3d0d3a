// Regular grid discretization of the domain and chunked index traversal.
#pragma once

#include "seqgp/common.hpp"

#include <array>
#include <utility>
#include <vector>

namespace seqgp {

/// Ordered discretization of a box domain. Flat indices are row-major over
/// the axes (last axis fastest); all vectors and operator columns in the
/// engine are ordered by this flat index.
struct Grid {
  int dim = 0;
  std::vector<Index> shape;      // points per axis
  std::vector<double> spacing;   // meters per axis
  std::vector<double> origin;    // meters per axis
  Matrix points;                 // m x dim, row i = coordinates of flat index i
  double cell_volume = 0.0;      // product of spacings

  Index size() const { return points.rows(); }

  std::array<Index, 3> multi_index(Index flat) const;
  Index flat_index(const std::array<Index, 3>& multi) const;
  Vector point(Index flat) const { return points.row(flat).transpose(); }
};

Grid build_grid(int dim, const std::vector<Index>& shape, const std::vector<double>& spacing,
                const std::vector<double>& origin);

/// Row partition of 0..m-1 used by all block computations.
struct ChunkPlan {
  Index chunk_size = 0;
  std::vector<std::pair<Index, Index>> ranges;  // half-open [begin, end)
};

ChunkPlan plan_chunks(Index m, Index chunk_size);
ChunkPlan plan_chunks(const Grid& grid, Index chunk_size);

inline constexpr Index kDefaultChunkSize = 2000;

}  // namespace seqgp
