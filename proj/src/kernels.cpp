#include "seqgp/kernels.hpp"

#include <cassert>
#include <cmath>
#include <sstream>

namespace seqgp {

namespace {
const double kSqrt3 = std::sqrt(3.0);
const double kSqrt5 = std::sqrt(5.0);
}  // namespace

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "exponential") return KernelFamily::Exponential;
  if (name == "matern32") return KernelFamily::Matern32;
  if (name == "matern52") return KernelFamily::Matern52;
  throw ConfigError("unknown kernel family '" + name +
                    "' (expected exponential, matern32 or matern52)");
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Exponential: return "exponential";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Matern52: return "matern52";
  }
  return "?";
}

void validate(const Kernel& kernel) {
  if (!(kernel.sigma0 > 0.0)) throw ConfigError("kernel sigma0 must be positive");
  if (!(kernel.lambda0 > 0.0)) throw ConfigError("kernel lambda0 must be positive");
}

double correlation(KernelFamily family, double h) {
  assert(h >= 0.0);
  switch (family) {
    case KernelFamily::Exponential:
      return std::exp(-h);
    case KernelFamily::Matern32: {
      const double t = kSqrt3 * h;
      return (1.0 + t) * std::exp(-t);
    }
    case KernelFamily::Matern52: {
      const double t = kSqrt5 * h;
      return (1.0 + t + 5.0 * h * h / 3.0) * std::exp(-t);
    }
  }
  return 0.0;
}

double kernel_eval(const Kernel& kernel, double d) {
  assert(d >= 0.0);
  return kernel.sigma0 * kernel.sigma0 * correlation(kernel.family, d / kernel.lambda0);
}

double practical_range(const Kernel& kernel) {
  validate(kernel);
  // r is strictly decreasing, so bracket then bisect on normalized distance.
  double lo = 0.0, hi = 1.0;
  while (correlation(kernel.family, hi) > 0.05) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (correlation(kernel.family, mid) > 0.05)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-10 * hi) break;
  }
  return 0.5 * (lo + hi) * kernel.lambda0;
}

namespace {
double point_distance(const Matrix& a, Index i, const Matrix& b, Index j) {
  double s = 0.0;
  for (Index k = 0; k < a.cols(); ++k) {
    const double d = a(i, k) - b(j, k);
    s += d * d;
  }
  return std::sqrt(s);
}
}  // namespace

Matrix cross_cov_block(const PriorModel& model, const Matrix& points_a, const Matrix& points_b) {
  if (points_a.cols() != points_b.cols())
    throw ConfigError("cross_cov_block: point sets have different dimensions");
  Matrix block(points_a.rows(), points_b.rows());
  for (Index i = 0; i < points_a.rows(); ++i)
    for (Index j = 0; j < points_b.rows(); ++j)
      block(i, j) = kernel_eval(model.kernel, point_distance(points_a, i, points_b, j));
  return block;
}

std::size_t prior_covmul_workset_bytes(const ChunkPlan& plan, Index q) {
  const std::size_t mc = static_cast<std::size_t>(plan.chunk_size);
  return (mc * mc + mc * static_cast<std::size_t>(q)) * sizeof(double);
}

Matrix prior_covmul(const PriorModel& model, const Grid& grid, const Matrix& a,
                    const ChunkPlan& plan) {
  const Index m = grid.size();
  const Index q = a.cols();
  if (a.rows() != m) throw ConfigError("prior_covmul: A must have one row per grid point");
  if (plan.ranges.empty() && m > 0) throw ConfigError("prior_covmul: empty chunk plan");

  const std::size_t workers = static_cast<std::size_t>(std::min<Index>(num_threads(),
                                                            static_cast<Index>(plan.ranges.size())));
  if (prior_covmul_workset_bytes(plan, q) * std::max<std::size_t>(workers, 1) > memory_budget()) {
    std::ostringstream msg;
    msg << "prior_covmul: working set of " << prior_covmul_workset_bytes(plan, q)
        << " bytes per worker exceeds the memory budget of " << memory_budget() << " bytes";
    throw BudgetError(msg.str());
  }

  Matrix result(m, q);
  const auto& ranges = plan.ranges;
  parallel_for(static_cast<Index>(ranges.size()), [&](Index ri) {
    const auto [rb, re] = ranges[ri];
    const Index rows = re - rb;
    Matrix acc = Matrix::Zero(rows, q);
    for (const auto& [cb, ce] : ranges) {
      const Index cols = ce - cb;
      Matrix block(rows, cols);
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
          block(i, j) =
              kernel_eval(model.kernel, point_distance(grid.points, rb + i, grid.points, cb + j));
      acc.noalias() += block * a.middleRows(cb, cols);
      add_flops(static_cast<std::uint64_t>(rows) * cols * q);
    }
    result.middleRows(rb, rows) = acc;
  });
  return result;
}

}  // namespace seqgp
