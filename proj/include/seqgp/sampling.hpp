// Prior ensembles and residual-kriging transport of prior samples into
// posterior samples; empirical excursion-volume distributions.
#pragma once

#include "seqgp/implicit.hpp"

#include <array>
#include <vector>

namespace seqgp {

enum class Provenance { Prior, Posterior };

struct Ensemble {
  Matrix samples;  // m x N
  std::uint64_t seed = 0;
  Provenance provenance = Provenance::Prior;
  int stage = 0;  // conditioning stage for posterior ensembles

  Index size() const { return samples.cols(); }
};

/// Draws N prior realizations by dense symmetric factorization of the prior
/// covariance (desk scale only). Deterministic in the seed: sample s,
/// component i uses counter-stream (seed, s).
Ensemble sample_prior(const PriorModel& model, const Grid& grid, Index n_samples,
                      std::uint64_t seed);

/// Residual kriging: each prior sample Z' observes its own simulated data
/// y'_i = G_i Z' + eps'_i (fresh noise), runs the mean recursion through the
/// shared stage records of `post`, and is output as m(y) + (Z' - m'(y')).
/// `stages` must be the stages `post` was built from.
Ensemble residual_update(const Ensemble& prior_ens, const std::vector<DataStage>& stages,
                         const ImplicitPosterior& post, std::uint64_t noise_seed);

struct VolumeDistribution {
  std::vector<double> volumes;        // sorted ascending
  std::array<double, 5> quantiles{};  // at 5, 27.5, 50, 72.5, 95%
  double mean = 0.0;
};

inline constexpr std::array<double, 5> kVolumeQuantileProbs{0.05, 0.275, 0.50, 0.725, 0.95};

/// Per-sample excursion volume above the threshold.
VolumeDistribution volume_distribution(const Ensemble& posterior_ens, double threshold,
                                       const Grid& grid);

}  // namespace seqgp
