#include "seqgp/operators.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace seqgp {

DataStage make_stage(Operator op, Vector y, double tau2) {
  if (y.size() != op.rows()) throw ConfigError("stage: data length must equal operator rows");
  if (tau2 < 0.0) throw ConfigError("stage: noise variance must be >= 0");
  return DataStage{std::move(op), std::move(y), tau2};
}

Operator pointwise_operator(const Grid& grid, const std::vector<Index>& flat_indices) {
  const Index m = grid.size();
  std::set<Index> seen;
  Operator op;
  op.kind = "pointwise";
  op.mat = Matrix::Zero(static_cast<Index>(flat_indices.size()), m);
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    const Index j = flat_indices[i];
    if (j < 0 || j >= m) throw ConfigError("pointwise_operator: index out of range");
    if (!seen.insert(j).second) throw ConfigError("pointwise_operator: duplicate index");
    op.mat(static_cast<Index>(i), j) = 1.0;
    op.labels.push_back("delta " + std::to_string(j));
  }
  return op;
}

Operator weighted_operator(const Grid& grid,
                           const std::vector<std::vector<std::pair<Index, double>>>& rows) {
  const Index m = grid.size();
  Operator op;
  op.kind = "weighted";
  op.mat = Matrix::Zero(static_cast<Index>(rows.size()), m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].empty()) op.degenerate_rows.push_back(static_cast<Index>(i));
    for (const auto& [j, w] : rows[i]) {
      if (j < 0 || j >= m) throw ConfigError("weighted_operator: index out of range");
      op.mat(static_cast<Index>(i), j) = w;
    }
  }
  return op;
}

Operator dft_operator(const Grid& grid2d, const std::vector<std::pair<int, int>>& freqs) {
  if (grid2d.dim != 2 || grid2d.shape[0] != grid2d.shape[1])
    throw ConfigError("dft_operator: grid must be 2D square");
  const Index big_m = grid2d.shape[0];
  const Index m = grid2d.size();

  Operator op;
  op.kind = "dft";
  op.mat = Matrix::Zero(2 * static_cast<Index>(freqs.size()), m);
  for (std::size_t f = 0; f < freqs.size(); ++f) {
    const auto [u, v] = freqs[f];
    if (u < 1 || u > big_m || v < 1 || v > big_m)
      throw ConfigError("dft_operator: frequency index out of range 1..M");
    const Index re = 2 * static_cast<Index>(f);
    const Index im = re + 1;
    for (Index j = 0; j < m; ++j) {
      const auto idx = grid2d.multi_index(j);
      const double k = static_cast<double>(idx[0] + 1);
      const double l = static_cast<double>(idx[1] + 1);
      const double theta = 2.0 * M_PI * (u * k + v * l) / static_cast<double>(big_m);
      op.mat(re, j) = std::cos(theta);
      op.mat(im, j) = -std::sin(theta);
    }
    op.labels.push_back("F(" + std::to_string(u) + "," + std::to_string(v) + ") re");
    op.labels.push_back("F(" + std::to_string(u) + "," + std::to_string(v) + ") im");
  }
  return op;
}

namespace {

// log((r+t)/(r-t)) = 2 atanh(t/r); the atanh form avoids cancellation in the
// denominator and is used away from |t| ~ r.
double log_ratio(double t, double r) {
  const double q = t / r;
  if (std::abs(q) < 0.9) return 2.0 * std::atanh(q);
  return std::log((r + t) / (r - t));
}

// Antiderivative terms at one (shifted) corner. Factors that multiply an
// exactly-zero coordinate are dropped: those are the finite limits of the
// corresponding 0 * inf corner expressions.
double corner_term(double x, double y, double z) {
  const double r = std::sqrt(x * x + y * y + z * z);
  double t = 0.0;
  if (x != 0.0) t += x * log_ratio(y, r);
  if (y != 0.0) t += y * log_ratio(x, r);
  // Principal-branch arctan: full-plane atan2 picks up +-pi offsets on the
  // z < 0 corners that do not cancel across the eight-corner sum when the
  // station sits directly above or below the prism.
  if (z != 0.0) t -= 2.0 * z * std::atan(x * y / (z * r));
  return t;
}

bool inside_closed(const Prism& p, const std::array<double, 3>& s) {
  return s[0] >= p.x_l && s[0] <= p.x_h && s[1] >= p.y_l && s[1] <= p.y_h && s[2] >= p.z_l &&
         s[2] <= p.z_h;
}

}  // namespace

double banerjee_gz(const Prism& prism, const std::array<double, 3>& station, double density,
                   const GravityConfig& cfg) {
  if (!(prism.x_l < prism.x_h && prism.y_l < prism.y_h && prism.z_l < prism.z_h))
    throw ConfigError("banerjee_gz: prism bounds must satisfy low < high on every axis");
  if (inside_closed(prism, station))
    throw ConfigError("banerjee_gz: station inside the closed prism");

  const double xs[2] = {prism.x_l - station[0], prism.x_h - station[0]};
  const double ys[2] = {prism.y_l - station[1], prism.y_h - station[1]};
  const double zs[2] = {prism.z_l - station[2], prism.z_h - station[2]};
  double total = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const double sign = ((i + j + k) % 2 == 1) ? -1.0 : 1.0;
        total += sign * corner_term(xs[1 - i], ys[1 - j], zs[1 - k]);  // +1 at (h,h,h)
      }
  // The corner sum integrates (s3 - x3)/|x - s|^3; negate so the result
  // matches the Green kernel orientation (x3 - s3)/|x - s|^3.
  return -0.5 * cfg.gamma_n * density * total * cfg.output_unit;
}

Prism cell_prism(const Grid& grid3d, Index flat) {
  if (grid3d.dim != 3) throw ConfigError("cell_prism: grid must be 3D");
  const Vector c = grid3d.point(flat);
  const double hx = 0.5 * grid3d.spacing[0];
  const double hy = 0.5 * grid3d.spacing[1];
  const double hz = 0.5 * grid3d.spacing[2];
  return Prism{c[0] - hx, c[0] + hx, c[1] - hy, c[1] + hy, c[2] - hz, c[2] + hz};
}

Operator gravity_operator(const Grid& grid3d, const Matrix& stations, const GravityConfig& cfg) {
  if (grid3d.dim != 3) throw ConfigError("gravity_operator: grid must be 3D");
  if (stations.cols() != 3) throw ConfigError("gravity_operator: stations must be s x 3");
  const Index m = grid3d.size();
  Operator op;
  op.kind = "gravity";
  op.mat.resize(stations.rows(), m);
  for (Index i = 0; i < stations.rows(); ++i) {
    const std::array<double, 3> s{stations(i, 0), stations(i, 1), stations(i, 2)};
    for (Index j = 0; j < m; ++j) {
      const Prism cell = cell_prism(grid3d, j);
      if (inside_closed(cell, s)) {
        std::ostringstream msg;
        msg << "gravity_operator: station " << i << " (" << s[0] << ", " << s[1] << ", " << s[2]
            << ") lies inside cell " << j;
        throw ConfigError(msg.str());
      }
      op.mat(i, j) = banerjee_gz(cell, s, 1.0, cfg);
    }
    std::ostringstream label;
    label << "station " << s[0] << " " << s[1] << " " << s[2];
    op.labels.push_back(label.str());
  }
  return op;
}

}  // namespace seqgp
