#include "seqgp/excursion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seqgp {

CoverageField coverage(const Vector& mean, const Vector& var, double threshold,
                       double cell_volume, double sigma0) {
  if (mean.size() != var.size()) throw ConfigError("coverage: mean/var size mismatch");
  const double tol = 1e-8 * sigma0 * sigma0;

  CoverageField field;
  field.threshold = threshold;
  field.cell_volume = cell_volume;
  field.p.resize(mean.size());
  for (Index i = 0; i < mean.size(); ++i) {
    double v = var[i];
    if (v < -tol) throw NumericalError("coverage: variance below -1e-8*sigma0^2 at index " +
                                       std::to_string(i));
    if (v < 0.0) v = 0.0;
    if (v == 0.0)
      field.p[i] = (mean[i] >= threshold) ? 1.0 : 0.0;
    else
      field.p[i] = 1.0 - normal_cdf((threshold - mean[i]) / std::sqrt(v));
  }
  return field;
}

ExcursionEstimate vorobev_quantile(const CoverageField& field, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("vorobev_quantile: alpha must be in (0,1]");
  ExcursionEstimate est;
  est.alpha = alpha;
  est.mask.resize(static_cast<std::size_t>(field.p.size()));
  Index count = 0;
  for (Index i = 0; i < field.p.size(); ++i) {
    const bool in = field.p[i] >= alpha;
    est.mask[static_cast<std::size_t>(i)] = in ? 1 : 0;
    count += in;
  }
  est.volume = static_cast<double>(count) * field.cell_volume;
  return est;
}

double expected_volume(const CoverageField& field) { return field.cell_volume * field.p.sum(); }

std::pair<double, ExcursionEstimate> vorobev_expectation(const CoverageField& field) {
  const double target = expected_volume(field);

  // Candidate levels: the attained positive coverage values plus 1.0,
  // scanned in descending order. Exact on a discrete grid.
  std::vector<double> levels(field.p.data(), field.p.data() + field.p.size());
  levels.push_back(1.0);
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  for (double alpha : levels) {
    if (!(alpha > 0.0)) break;
    ExcursionEstimate est = vorobev_quantile(field, alpha);
    if (est.volume >= target) return {alpha, std::move(est)};
  }
  // All-zero coverage: empty estimate at alpha = 1 by convention.
  ExcursionEstimate empty = vorobev_quantile(field, 1.0);
  return {1.0, std::move(empty)};
}

ExcursionEstimate plugin_estimate(const Vector& mean, double threshold, double cell_volume) {
  ExcursionEstimate est;
  est.alpha = std::numeric_limits<double>::quiet_NaN();
  est.mask.resize(static_cast<std::size_t>(mean.size()));
  Index count = 0;
  for (Index i = 0; i < mean.size(); ++i) {
    const bool in = mean[i] >= threshold;
    est.mask[static_cast<std::size_t>(i)] = in ? 1 : 0;
    count += in;
  }
  est.volume = static_cast<double>(count) * cell_volume;
  return est;
}

DetectionMetrics detection_metrics(const std::vector<std::uint8_t>& estimate,
                                   const std::vector<std::uint8_t>& truth) {
  if (estimate.size() != truth.size()) throw ConfigError("detection_metrics: mask size mismatch");
  std::size_t n_truth = 0, n_outside = 0, hit = 0, false_hit = 0, n_est = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] != 0;
    const bool e = estimate[i] != 0;
    n_truth += t;
    n_outside += !t;
    n_est += e;
    hit += (e && t);
    false_hit += (e && !t);
  }
  DetectionMetrics metrics;
  if (n_truth == 0)
    metrics.tp = (n_est == 0) ? 1.0 : 0.0;
  else
    metrics.tp = static_cast<double>(hit) / static_cast<double>(n_truth);
  metrics.fp = (n_outside == 0) ? 0.0 : static_cast<double>(false_hit) / static_cast<double>(n_outside);
  return metrics;
}

}  // namespace seqgp
