// Bayesian set estimation: coverage fields, Vorob'ev quantiles and
// expectation, Robbins expected volume, plug-in estimate, detection metrics.
#pragma once

#include "seqgp/common.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace seqgp {

/// Pointwise excursion probabilities over the grid.
struct CoverageField {
  Vector p;               // in [0, 1]
  double threshold = 0.0; // field units
  double cell_volume = 0.0;
};

struct ExcursionEstimate {
  std::vector<std::uint8_t> mask;
  double alpha = 0.0;   // quantile level used (NaN for plug-in)
  double volume = 0.0;  // count(mask) * cell_volume
};

/// p_i = P[field_i >= T] under Gaussian marginals. Variances in
/// [-1e-8*sigma0^2, 0) clip to zero (degenerate marginal, indicator rule);
/// anything more negative is an error.
CoverageField coverage(const Vector& mean, const Vector& var, double threshold,
                       double cell_volume, double sigma0);

/// Super-level set {p >= alpha}; membership is closed.
ExcursionEstimate vorobev_quantile(const CoverageField& field, double alpha);

/// Robbins: expected excursion volume = integral of the coverage function.
double expected_volume(const CoverageField& field);

/// The quantile whose volume brackets the expected volume: the largest
/// attained alpha with volume(Q_alpha) >= E[V].
std::pair<double, ExcursionEstimate> vorobev_expectation(const CoverageField& field);

ExcursionEstimate plugin_estimate(const Vector& mean, double threshold, double cell_volume);

struct DetectionMetrics {
  double tp = 0.0;  // |est ∩ truth| / |truth|
  double fp = 0.0;  // |est \ truth| / |D \ truth|
};

DetectionMetrics detection_metrics(const std::vector<std::uint8_t>& estimate,
                                   const std::vector<std::uint8_t>& truth);

}  // namespace seqgp
