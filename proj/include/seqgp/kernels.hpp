// Stationary covariance families and the chunked prior-covariance product.
#pragma once

#include "seqgp/common.hpp"
#include "seqgp/grid.hpp"

#include <string>

namespace seqgp {

enum class KernelFamily { Exponential, Matern32, Matern52 };

KernelFamily kernel_family_from_string(const std::string& name);
std::string to_string(KernelFamily family);

struct Kernel {
  KernelFamily family = KernelFamily::Matern32;
  double sigma0 = 1.0;   // prior standard deviation (field units)
  double lambda0 = 1.0;  // length scale (meters)
};

struct PriorModel {
  Kernel kernel;
  double m0 = 0.0;  // constant prior mean (field units)
};

void validate(const Kernel& kernel);

/// Correlation r(h) at normalized distance h = d / lambda0; r(0) = 1.
double correlation(KernelFamily family, double h);

/// Covariance at distance d: sigma0^2 * r(d / lambda0).
double kernel_eval(const Kernel& kernel, double d);

/// Distance at which the covariance falls to 5% of sigma0^2, located by
/// bracketed bisection to 1e-10 relative tolerance.
double practical_range(const Kernel& kernel);

/// Dense covariance block between two point sets (rows = points).
Matrix cross_cov_block(const PriorModel& model, const Matrix& points_a, const Matrix& points_b);

/// K0 * A evaluated chunk-by-chunk: each kernel block is built on demand and
/// discarded, so no m x m matrix is ever materialized. Row chunks may run in
/// parallel; within a chunk, column blocks accumulate in ascending order, so
/// the result is deterministic for a fixed plan.
Matrix prior_covmul(const PriorModel& model, const Grid& grid, const Matrix& a,
                    const ChunkPlan& plan);

/// Working-set bytes prior_covmul needs per worker for q right-hand columns.
std::size_t prior_covmul_workset_bytes(const ChunkPlan& plan, Index q);

}  // namespace seqgp
