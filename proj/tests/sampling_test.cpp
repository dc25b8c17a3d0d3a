#include "seqgp/sampling.hpp"

#include "seqgp/excursion.hpp"
#include "seqgp/posterior_explicit.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace seqgp;
using testsup::TestRng;

TEST_CASE("prior ensembles are seed-deterministic") {
  TestRng rng(401);
  const Grid grid = testsup::random_grid_1d(rng, 15);
  const PriorModel model = testsup::random_model(rng);
  const Ensemble a = sample_prior(model, grid, 8, 1234);
  const Ensemble b = sample_prior(model, grid, 8, 1234);
  CHECK((a.samples.array() == b.samples.array()).all());
  const Ensemble c = sample_prior(model, grid, 8, 1235);
  CHECK((a.samples - c.samples).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("prior ensembles collapse to the mean as sigma0 vanishes") {
  const Grid grid = build_grid(1, {10}, {1.0}, {0.0});
  PriorModel model{{KernelFamily::Matern32, 1e-12, 1.0}, 3.25};
  const Ensemble ens = sample_prior(model, grid, 5, 7);
  CHECK((ens.samples.array() - 3.25).abs().maxCoeff() < 1e-10);
}

TEST_CASE("prior ensemble moments converge to the prior") {
  TestRng rng(409);
  const Grid grid = build_grid(1, {25}, {0.7}, {0.0});
  const PriorModel model{{KernelFamily::Matern52, 1.4, 2.0}, -0.5};
  const double s2 = model.kernel.sigma0 * model.kernel.sigma0;

  const Index n = 10000;
  const Ensemble ens = sample_prior(model, grid, n, 99);
  const Vector mean = ens.samples.rowwise().mean();
  Matrix centered = ens.samples.colwise() - mean;
  const Matrix emp_cov = centered * centered.transpose() / static_cast<double>(n - 1);
  const Matrix k = cross_cov_block(model, grid.points, grid.points);
  CHECK(testsup::max_abs_diff(emp_cov, k) <= 5.0 * std::sqrt(2.0 / n) * s2);
}

TEST_CASE("sample_prior rejects grids beyond the dense budget") {
  const Grid grid = build_grid(1, {4000}, {1.0}, {0.0});
  const PriorModel model{{KernelFamily::Matern32, 1.0, 1.0}, 0.0};
  const std::size_t saved = memory_budget();
  set_memory_budget(1 << 20);  // 4000^2 doubles are 128 MB
  CHECK_THROWS_AS(sample_prior(model, grid, 1, 5), BudgetError);
  set_memory_budget(saved);
  CHECK_THROWS_AS(sample_prior(model, grid, 0, 5), ConfigError);
}

TEST_CASE("residual update with no stages is the identity") {
  TestRng rng(419);
  const Grid grid = testsup::random_grid_1d(rng, 12);
  const PriorModel model = testsup::random_model(rng);
  const ImplicitPosterior post(model, grid, plan_chunks(grid, 5));
  const Ensemble prior_ens = sample_prior(model, grid, 6, 11);
  const Ensemble out = residual_update(prior_ens, {}, post, 17);
  CHECK((out.samples.array() == prior_ens.samples.array()).all());
  CHECK(out.provenance == Provenance::Posterior);
}

TEST_CASE("full noiseless observation collapses every sample onto the data") {
  TestRng rng(421);
  const Grid grid = testsup::random_grid_1d(rng, 10);
  const PriorModel model = testsup::random_model(rng);

  std::vector<Index> all_sites(10);
  for (Index i = 0; i < 10; ++i) all_sites[static_cast<std::size_t>(i)] = i;
  Operator identity = pointwise_operator(grid, all_sites);
  Vector y(10);
  for (Index i = 0; i < 10; ++i) y[i] = rng.uniform(-2.0, 2.0);
  const DataStage stage = make_stage(identity, y, 0.0);

  ImplicitPosterior post(model, grid, plan_chunks(grid, 4));
  post.assimilate(stage);
  const Ensemble prior_ens = sample_prior(model, grid, 7, 23);
  const Ensemble out = residual_update(prior_ens, {stage}, post, 29);
  for (Index s = 0; s < out.size(); ++s)
    CHECK((out.samples.col(s) - y).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("residual kriging matches the explicit posterior moments") {
  TestRng rng(431);
  const Grid grid = build_grid(1, {20}, {0.5}, {0.0});
  const PriorModel model{{KernelFamily::Matern32, 1.2, 1.5}, 0.4};
  const double s2 = model.kernel.sigma0 * model.kernel.sigma0;
  const ChunkPlan plan = plan_chunks(grid, 8);

  Operator op = testsup::random_operator(rng, grid, 3);
  Vector y(3);
  y << 1.0, -0.3, 0.8;
  const DataStage stage = make_stage(op, y, 0.02);

  ImplicitPosterior post(model, grid, plan);
  post.assimilate(stage);
  const auto explicit_post = condition_batch(model, grid, stage);

  const Index n = 20000;
  const Ensemble prior_ens = sample_prior(model, grid, n, 311);
  const Ensemble out = residual_update(prior_ens, {stage}, post, 313);

  const Vector emp_mean = out.samples.rowwise().mean();
  const double sd_max = explicit_post.cov.diagonal().maxCoeff();
  CHECK((emp_mean - explicit_post.mean).cwiseAbs().maxCoeff() <=
        4.0 * std::sqrt(sd_max) / std::sqrt(static_cast<double>(n)));

  Matrix centered = out.samples.colwise() - emp_mean;
  const Matrix emp_cov = centered * centered.transpose() / static_cast<double>(n - 1);
  CHECK(testsup::max_abs_diff(emp_cov, explicit_post.cov) <=
        5.0 * std::sqrt(2.0 / n) * s2);

  // Transported spread never exceeds the prior marginal spread + MC noise.
  for (Index i = 0; i < grid.size(); ++i)
    CHECK(emp_cov(i, i) <= s2 + 5.0 * std::sqrt(2.0 / n) * s2);
}

TEST_CASE("noiseless Dirac sites pin every posterior sample") {
  TestRng rng(433);
  const Grid grid = testsup::random_grid_1d(rng, 15);
  const PriorModel model = testsup::random_model(rng);
  Vector y(2);
  y << 0.9, -1.1;
  const DataStage stage = make_stage(pointwise_operator(grid, {3, 12}), y, 0.0);

  ImplicitPosterior post(model, grid, plan_chunks(grid, 6));
  post.assimilate(stage);
  const Ensemble out = residual_update(sample_prior(model, grid, 40, 5), {stage}, post, 7);
  for (Index s = 0; s < out.size(); ++s) {
    CHECK(std::abs(out.samples(3, s) - 0.9) <= 1e-8);
    CHECK(std::abs(out.samples(12, s) + 1.1) <= 1e-8);
  }
}

TEST_CASE("residual update validates provenance and stage lists") {
  TestRng rng(439);
  const Grid grid = testsup::random_grid_1d(rng, 8);
  const PriorModel model = testsup::random_model(rng);
  ImplicitPosterior post(model, grid, plan_chunks(grid, 4));
  Vector y(1);
  y << 1.0;
  const DataStage stage = make_stage(pointwise_operator(grid, {2}), y, 0.01);
  post.assimilate(stage);

  Ensemble prior_ens = sample_prior(model, grid, 3, 1);
  CHECK_THROWS_AS(residual_update(prior_ens, {}, post, 2), ConfigError);

  DataStage other = make_stage(pointwise_operator(grid, {5}), y, 0.01);
  CHECK_THROWS_AS(residual_update(prior_ens, {other}, post, 2), ConfigError);

  Ensemble tampered = prior_ens;
  tampered.provenance = Provenance::Posterior;
  CHECK_THROWS_AS(residual_update(tampered, {stage}, post, 2), ConfigError);
}

TEST_CASE("volume distribution limits and quantiles") {
  TestRng rng(443);
  const Grid grid = build_grid(1, {12}, {2.0}, {0.0});
  Ensemble ens;
  ens.provenance = Provenance::Posterior;
  ens.samples.resize(12, 5);
  for (Index i = 0; i < ens.samples.size(); ++i) ens.samples(i) = rng.uniform(0.0, 1.0);

  // Threshold below every sample value: every volume is the domain volume.
  const auto all_in = volume_distribution(ens, -1.0, grid);
  for (double v : all_in.volumes) CHECK(v == doctest::Approx(24.0));
  CHECK(all_in.quantiles[0] == doctest::Approx(24.0));

  Ensemble single;
  single.provenance = Provenance::Posterior;
  single.samples = ens.samples.col(0);
  const auto degenerate = volume_distribution(single, 0.5, grid);
  CHECK(degenerate.volumes.size() == 1);
  for (double q : degenerate.quantiles) CHECK(q == doctest::Approx(degenerate.volumes[0]));

  Ensemble prior_prov = ens;
  prior_prov.provenance = Provenance::Prior;
  CHECK_THROWS_AS(volume_distribution(prior_prov, 0.5, grid), ConfigError);
}

TEST_CASE("volume distribution mean agrees with Robbins") {
  TestRng rng(449);
  const Grid grid = build_grid(1, {15}, {1.0}, {0.0});
  const PriorModel model{{KernelFamily::Exponential, 1.0, 2.0}, 0.0};
  Operator op = testsup::random_operator(rng, grid, 2);
  Vector y(2);
  y << 0.6, -0.2;
  const DataStage stage = make_stage(op, y, 0.05);

  ImplicitPosterior post(model, grid, plan_chunks(grid, 5));
  post.assimilate(stage);
  const double threshold = 0.5;

  const Index n = 10000;
  const Ensemble out = residual_update(sample_prior(model, grid, n, 601), {stage}, post, 607);
  const auto dist = volume_distribution(out, threshold, grid);

  const CoverageField field =
      coverage(post.mean(), post.variance_diag(), threshold, grid.cell_volume,
               model.kernel.sigma0);
  const double robbins = expected_volume(field);

  double var_vol = 0.0;
  for (double v : dist.volumes) var_vol += (v - dist.mean) * (v - dist.mean);
  var_vol /= static_cast<double>(n - 1);
  const double se = std::sqrt(var_vol / static_cast<double>(n));
  CHECK(std::abs(dist.mean - robbins) <= 3.0 * se + 1e-9);
}
