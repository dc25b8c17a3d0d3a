#include "seqgp/sampling.hpp"

#include "seqgp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace seqgp {

Ensemble sample_prior(const PriorModel& model, const Grid& grid, Index n_samples,
                      std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("ensemble size must be positive");
  const Index m = grid.size();
  const std::size_t dense_bytes = static_cast<std::size_t>(m) * static_cast<std::size_t>(m) * sizeof(double);
  if (dense_bytes > memory_budget()) {
    std::ostringstream msg;
    msg << "sample_prior: dense " << m << " x " << m
        << " factorization exceeds the memory budget";
    throw BudgetError(msg.str());
  }

  const Matrix k = cross_cov_block(model, grid.points, grid.points);
  const CholFactor chol = chol_with_jitter(k, "prior covariance");
  const Matrix l = chol.llt.matrixL();

  Ensemble ens;
  ens.seed = seed;
  ens.provenance = Provenance::Prior;
  ens.samples.resize(m, n_samples);
  Vector xi(m);
  for (Index s = 0; s < n_samples; ++s) {
    NormalStream stream(seed, static_cast<std::uint64_t>(s));
    for (Index i = 0; i < m; ++i) xi[i] = stream.next();
    ens.samples.col(s) = Vector::Constant(m, model.m0) + l * xi;
  }
  return ens;
}

Ensemble residual_update(const Ensemble& prior_ens, const std::vector<DataStage>& stages,
                         const ImplicitPosterior& post, std::uint64_t noise_seed) {
  if (prior_ens.provenance != Provenance::Prior)
    throw ConfigError("residual_update: input ensemble must have prior provenance");
  if (static_cast<int>(stages.size()) != post.stage_count())
    throw ConfigError("residual_update: stage count mismatch with the posterior");
  const Index m = post.grid().size();
  if (prior_ens.samples.rows() != m)
    throw ConfigError("residual_update: ensemble/grid size mismatch");

  for (int i = 0; i < post.stage_count(); ++i) {
    const auto& record = post.stage(i);
    const auto& stage = stages[static_cast<std::size_t>(i)];
    if (record.p() != stage.op.rows() || record.tau2 != stage.tau2)
      throw ConfigError("residual_update: stage " + std::to_string(i + 1) +
                        " does not match the posterior");
    // Deep check when the posterior still holds the operator (not the case
    // for posteriors rebuilt from disk records).
    if (record.op.mat.size() > 0 && record.op.mat != stage.op.mat)
      throw ConfigError("residual_update: stage " + std::to_string(i + 1) +
                        " operator differs from the posterior record");
  }

  const Index n = prior_ens.size();
  if (stages.empty()) {
    Ensemble out = prior_ens;
    out.provenance = Provenance::Posterior;
    out.stage = 0;
    return out;
  }

  Matrix cond_mean = Matrix::Constant(m, n, post.model().m0);  // per-sample m'(y')
  for (int i = 0; i < post.stage_count(); ++i) {
    const auto& record = post.stage(i);
    const auto& stage = stages[static_cast<std::size_t>(i)];
    const Index p = record.p();

    Matrix sim = stage.op.mat * prior_ens.samples;  // p x N
    if (stage.tau2 > 0.0) {
      const double tau = std::sqrt(stage.tau2);
      for (Index s = 0; s < n; ++s) {
        NormalStream noise(noise_seed,
                           (static_cast<std::uint64_t>(i) << 32) ^ static_cast<std::uint64_t>(s));
        for (Index r = 0; r < p; ++r) sim(r, s) += tau * noise.next();
      }
    }
    sim.noalias() -= stage.op.mat * cond_mean;
    const Matrix coeff =
        record.inv_inner_factor * (record.inv_inner_factor.transpose() * sim).eval();
    record.lambda.visit([&](const auto& lambda) { cond_mean.noalias() += lambda * coeff; });
  }

  Ensemble out;
  out.seed = prior_ens.seed;
  out.provenance = Provenance::Posterior;
  out.stage = post.stage_count();
  out.samples = (post.mean().replicate(1, n) + prior_ens.samples - cond_mean).eval();
  return out;
}

VolumeDistribution volume_distribution(const Ensemble& posterior_ens, double threshold,
                                       const Grid& grid) {
  if (posterior_ens.provenance != Provenance::Posterior)
    throw ConfigError("volume_distribution: ensemble must have posterior provenance");
  const Index n = posterior_ens.size();

  VolumeDistribution dist;
  dist.volumes.resize(static_cast<std::size_t>(n));
  for (Index s = 0; s < n; ++s) {
    const Index count = (posterior_ens.samples.col(s).array() >= threshold).count();
    dist.volumes[static_cast<std::size_t>(s)] = static_cast<double>(count) * grid.cell_volume;
  }
  std::sort(dist.volumes.begin(), dist.volumes.end());
  for (double v : dist.volumes) dist.mean += v;
  dist.mean /= static_cast<double>(n);

  // Linear interpolation between order statistics.
  for (std::size_t qi = 0; qi < kVolumeQuantileProbs.size(); ++qi) {
    const double h = kVolumeQuantileProbs[qi] * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, static_cast<std::size_t>(n - 1));
    const double w = h - static_cast<double>(lo);
    dist.quantiles[qi] = (1.0 - w) * dist.volumes[lo] + w * dist.volumes[hi];
  }
  return dist;
}

}  // namespace seqgp
