// Marginal likelihood, mean concentration, the two-level fit procedure and
// held-out validation metrics.
#pragma once

#include "seqgp/implicit.hpp"

#include <vector>

namespace seqgp {

/// Negative marginal log likelihood of one stage under the model. All
/// products with the prior covariance are chunked, so the m x m matrix is
/// never formed.
double nmll(const PriorModel& model, const Grid& grid, const ChunkPlan& plan,
            const DataStage& stage);

/// Closed-form optimum of the constant prior mean for fixed kernel:
/// (1^T G^T R^-1 G 1)^-1 y^T R^-1 G 1.
double concentrated_m0(const Kernel& kernel, const Grid& grid, const ChunkPlan& plan,
                       const DataStage& stage);

struct FitRecord {
  double lambda0 = 0.0;
  double sigma0 = 0.0;
  double m0 = 0.0;
  double nmll = 0.0;
  bool converged = false;
};

struct FitResult {
  std::vector<FitRecord> records;  // one per length scale, ascending
  FitRecord best;
  std::vector<double> lambda_grid;
};

/// Two-level fit: brute-force scan over the length-scale grid; for each
/// value, scalar descent on log sigma0 of the concentrated likelihood
/// (sigma0 factors out of the correlation matrix, so each inner step only
/// touches the p x p data-space matrices). Ties pick the smaller lambda0.
/// `budget` caps inner-loop evaluations per scan point; exhausting it marks
/// the record unconverged without aborting the scan.
FitResult fit(const Grid& grid, const ChunkPlan& plan, const DataStage& data,
              KernelFamily family, std::vector<double> lambda_grid, double sigma_init,
              int budget = 200);

struct PredictiveMetrics {
  double rmse = 0.0;
  double nlpd = 0.0;
};

/// Conditions on `train` and scores `test` under the posterior predictive.
PredictiveMetrics predictive_metrics(const PriorModel& model, const Grid& grid,
                                     const ChunkPlan& plan, const DataStage& train,
                                     const DataStage& test);

}  // namespace seqgp
