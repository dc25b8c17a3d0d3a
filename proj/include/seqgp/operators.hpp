// Builders for discretized observation operators: pointwise, weighted,
// 2D DFT rows, and the gravimetric prism operator.
#pragma once

#include "seqgp/common.hpp"
#include "seqgp/grid.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace seqgp {

/// A discretized bounded linear functional stack: p rows of weights on the
/// m grid points.
struct Operator {
  Matrix mat;                         // p x m
  std::string kind;                   // pointwise | weighted | dft | gravity
  std::vector<std::string> labels;    // optional per-row metadata
  std::vector<Index> degenerate_rows; // all-zero rows, kept but flagged

  Index rows() const { return mat.rows(); }
  Index cols() const { return mat.cols(); }
};

/// One assimilation stage: operator, observed values, noise variance.
struct DataStage {
  Operator op;
  Vector y;
  double tau2 = 0.0;
};

DataStage make_stage(Operator op, Vector y, double tau2);

/// Rows are canonical basis rows (discretized Dirac deltas), in the order of
/// `flat_indices`. Indices must be distinct and in range.
Operator pointwise_operator(const Grid& grid, const std::vector<Index>& flat_indices);

/// General weighted rows; entry (i, j) is the weight given for index j in
/// row i, zero elsewhere. Empty rows are valid but flagged degenerate.
Operator weighted_operator(const Grid& grid,
                           const std::vector<std::vector<std::pair<Index, double>>>& rows);

/// Real/imaginary row pair per frequency (u, v), 1 <= u, v <= M, for a
/// square M x M grid. The (k, l) weight pair is cos(theta), -sin(theta) with
/// theta = 2*pi*(u*k + v*l)/M and k, l counted from 1.
Operator dft_operator(const Grid& grid2d, const std::vector<std::pair<int, int>>& freqs);

struct Prism {
  double x_l, x_h, y_l, y_h, z_l, z_h;  // meters, low < high per axis
};

struct GravityConfig {
  double gamma_n = 6.674e-11;  // gravitational constant, m^3 kg^-1 s^-2
  double output_unit = 1e5;    // mGal per m/s^2
};

/// Vertical gravity (mGal) of a uniform prism at an exterior station,
/// oriented to match the Green kernel (x3 - s3)/|x - s|^3. Closed form over
/// the eight corner sign combinations.
double banerjee_gz(const Prism& prism, const std::array<double, 3>& station, double density,
                   const GravityConfig& cfg);

/// The cell with flat index `flat`, as the prism centered on its grid point.
Prism cell_prism(const Grid& grid3d, Index flat);

/// G(i, j) = banerjee_gz(cell j, station i, density 1). Every station must
/// lie strictly outside every cell closure.
Operator gravity_operator(const Grid& grid3d, const Matrix& stations, const GravityConfig& cfg);

}  // namespace seqgp
