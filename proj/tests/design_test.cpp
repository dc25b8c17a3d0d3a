#include "seqgp/design.hpp"

#include "seqgp/posterior_explicit.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace seqgp;
using testsup::TestRng;

namespace {

// Weighted variance drop computed by explicit two-state differencing:
// condition on the candidate, subtract the diagonals.
double explicit_variance_drop(const PriorModel& model, const Grid& grid,
                              const ExplicitPosterior& state, const Matrix& row, double tau2,
                              const Vector& weight) {
  (void)model;
  DataStage stage;
  stage.op.mat = row;
  stage.y = Vector::Zero(1);  // variance does not depend on the data
  stage.tau2 = tau2;
  const ExplicitPosterior next = update_stage_explicit(state, stage);
  const Vector drop = state.cov.diagonal() - next.cov.diagonal();
  return drop.dot(weight) * grid.cell_volume;
}

}  // namespace

TEST_CASE("wivr on the prior with a Dirac candidate has a closed form") {
  TestRng rng(501);
  const Grid grid = testsup::random_grid_1d(rng, 25);
  const PriorModel model = testsup::random_model(rng);
  const ImplicitPosterior post(model, grid, plan_chunks(grid, 9));

  const Index site = 13;
  const Operator cand = pointwise_operator(grid, {site});
  const Vector weight = Vector::Ones(grid.size());
  const double value = wivr(post, cand, 0.0, weight);

  const Matrix k = cross_cov_block(model, grid.points, grid.points);
  const double expected = k.col(site).squaredNorm() / k(site, site) * grid.cell_volume;
  CHECK(value == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("wivr equals explicit before/after variance differencing") {
  TestRng rng(503);
  for (int trial = 0; trial < 6; ++trial) {
    const Index m = 30;
    const Grid grid = testsup::random_grid_1d(rng, m);
    const PriorModel model = testsup::random_model(rng);
    const double tau2 = 0.01 * model.kernel.sigma0 * model.kernel.sigma0;

    ImplicitPosterior post(model, grid, plan_chunks(grid, 11));
    ExplicitPosterior state;
    state.mean = Vector::Constant(m, model.m0);
    state.cov = cross_cov_block(model, grid.points, grid.points);
    for (int i = 0; i < 2; ++i) {
      Operator op = testsup::random_operator(rng, grid, 1);
      Vector y(1);
      y << rng.uniform(-1.0, 1.0);
      const DataStage stage = make_stage(op, y, tau2);
      post.assimilate(stage);
      state = update_stage_explicit(state, stage);
    }

    Vector weight(m);
    for (Index i = 0; i < m; ++i) weight[i] = rng.uniform(0.0, 1.0);

    Operator cand = testsup::random_operator(rng, grid, 1);
    const double via_engine = wivr(post, cand, tau2, weight);
    const double via_explicit =
        explicit_variance_drop(model, grid, state, cand.mat, tau2, weight);
    CHECK(via_engine == doctest::Approx(via_explicit).epsilon(1e-8));
    CHECK(via_engine >= 0.0);
  }
}

TEST_CASE("wivr degenerate weights and guards") {
  TestRng rng(509);
  const Grid grid = testsup::random_grid_1d(rng, 12);
  const PriorModel model = testsup::random_model(rng);
  const ImplicitPosterior post(model, grid, plan_chunks(grid, 5));
  const Operator cand = pointwise_operator(grid, {4});

  CHECK(wivr(post, cand, 0.1, Vector::Zero(grid.size())) == 0.0);
  Vector negative = Vector::Constant(grid.size(), -1.0);
  CHECK_THROWS_AS(wivr(post, cand, 0.1, negative), ConfigError);
}

TEST_CASE("candidate sets honor the radius, fallback and completion") {
  Matrix sites(4, 3);
  sites << 0, 0, 0, 1, 0, 0, 5, 0, 0, 11, 0, 0;
  std::vector<std::uint8_t> visited{1, 0, 0, 0};

  // Huge radius: all unvisited sites.
  CHECK(candidate_set(sites, visited, 0, 100.0) == std::vector<Index>{1, 2, 3});
  // Moderate radius keeps the near ones.
  CHECK(candidate_set(sites, visited, 0, 1.5) == std::vector<Index>{1});
  // Radius below the closest spacing falls back to the nearest unvisited.
  visited = {1, 1, 0, 0};
  CHECK(candidate_set(sites, visited, 1, 0.5) == std::vector<Index>{2});
  // Everything visited: campaign complete.
  visited = {1, 1, 1, 1};
  CHECK(candidate_set(sites, visited, 0, 100.0).empty());

  Matrix dup(3, 3);
  dup << 0, 0, 0, 0, 0, 0, 1, 1, 1;
  CHECK(dedup_sites(dup).rows() == 2);
}

TEST_CASE("uniform-weight first step maximizes the closed-form score") {
  TestRng rng(521);
  const Grid grid = testsup::random_grid_1d(rng, 30);
  const PriorModel model = testsup::random_model(rng);
  const double tau2 = 0.04;
  const ImplicitPosterior post(model, grid, plan_chunks(grid, 10));

  std::vector<Index> all(30);
  for (Index i = 0; i < 30; ++i) all[static_cast<std::size_t>(i)] = i;
  const Operator cands = pointwise_operator(grid, all);
  const Vector values = wivr_batch(post, cands, tau2, Vector::Ones(30));

  const Matrix k = cross_cov_block(model, grid.points, grid.points);
  Index best_direct = 0;
  double best_score = -1.0;
  for (Index s = 0; s < 30; ++s) {
    const double score = k.col(s).squaredNorm() / (k(s, s) + tau2);
    if (score > best_score) {
      best_score = score;
      best_direct = s;
    }
  }
  Index best_engine = 0;
  for (Index s = 1; s < 30; ++s)
    if (values[s] > values[best_engine]) best_engine = s;
  CHECK(best_engine == best_direct);
}

namespace {

struct ToyCampaign {
  // Anisotropic spacing so no two candidate sites are symmetry-equivalent
  // (a symmetric layout produces exact criterion ties).
  Grid grid = build_grid(3, {4, 4, 2}, {10.0, 13.0, 9.0}, {0.0, 0.0, 0.0});
  PriorModel model{{KernelFamily::Matern32, 1.0, 15.0}, 0.0};
  Matrix sites;
  Operator site_op;
  Vector truth;

  ToyCampaign() {
    sites = default_surface_sites_local();
    site_op = gravity_operator(grid, sites, GravityConfig{});
    const Ensemble ens = sample_prior(model, grid, 1, 4242);
    truth = ens.samples.col(0);
  }

  Matrix default_surface_sites_local() const {
    Matrix s(16, 3);
    Index row = 0;
    for (Index ix = 0; ix < 4; ++ix)
      for (Index iy = 0; iy < 4; ++iy, ++row) {
        s(row, 0) = grid.points(grid.flat_index({ix, iy, 1}), 0);
        s(row, 1) = grid.points(grid.flat_index({ix, iy, 1}), 1);
        s(row, 2) = grid.origin[2] + 1.5 * grid.spacing[2] + 1.0;
      }
    return s;
  }

  CampaignConfig config(int steps) const {
    CampaignConfig c;
    c.threshold = 0.8;
    c.candidate_radius = 15.0;
    c.tau2 = 1e-4;
    c.start_site = 5;
    c.n_steps = steps;
    c.seed = 31337;
    return c;
  }
};

}  // namespace

TEST_CASE("myopic choice matches exhaustive explicit search") {
  const ToyCampaign toy;
  CampaignConfig config = toy.config(1);

  const CampaignResult result = run_campaign(toy.model, toy.grid, plan_chunks(toy.grid, 16),
                                             toy.sites, toy.site_op, toy.truth, config);
  REQUIRE(result.visited.size() == 1);

  // Exhaustive search with the explicit posterior over the same candidates.
  std::vector<std::uint8_t> visited(16, 0);
  const auto candidates = candidate_set(toy.sites, visited, config.start_site,
                                        config.candidate_radius);
  ExplicitPosterior prior_state;
  prior_state.mean = Vector::Constant(toy.grid.size(), toy.model.m0);
  prior_state.cov = cross_cov_block(toy.model, toy.grid.points, toy.grid.points);
  const CoverageField field = coverage(prior_state.mean, prior_state.cov.diagonal(),
                                       config.threshold, toy.grid.cell_volume,
                                       toy.model.kernel.sigma0);

  Index best_site = -1;
  double best_value = -1.0;
  double engine_choice_value = -1.0;
  for (Index site : candidates) {
    const double value = explicit_variance_drop(
        toy.model, toy.grid, prior_state, toy.site_op.mat.row(site), config.tau2, field.p);
    if (value > best_value) {
      best_value = value;
      best_site = site;
    }
    if (site == result.visited[0]) engine_choice_value = value;
  }
  CHECK(result.visited[0] == best_site);
  CHECK(engine_choice_value == doctest::Approx(best_value).epsilon(1e-8));
  CHECK(result.trajectory[1].criterion == doctest::Approx(best_value).epsilon(1e-8));
}

TEST_CASE("campaigns are reproducible and log sane metrics") {
  const ToyCampaign toy;
  const CampaignConfig config = toy.config(5);
  const ChunkPlan plan = plan_chunks(toy.grid, 16);

  const CampaignResult a = run_campaign(toy.model, toy.grid, plan, toy.sites, toy.site_op,
                                        toy.truth, config);
  const CampaignResult b = run_campaign(toy.model, toy.grid, plan, toy.sites, toy.site_op,
                                        toy.truth, config);
  REQUIRE(a.trajectory.size() == 6);  // baseline + 5 steps
  REQUIRE(b.trajectory.size() == 6);
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].site == b.trajectory[i].site);
    CHECK(a.trajectory[i].tp == b.trajectory[i].tp);
    CHECK(a.trajectory[i].fp == b.trajectory[i].fp);
    CHECK(a.trajectory[i].tp >= 0.0);
    CHECK(a.trajectory[i].tp <= 1.0);
    CHECK(a.trajectory[i].fp >= 0.0);
    CHECK(a.trajectory[i].fp <= 1.0);
  }
  // Visited sites stay distinct.
  for (std::size_t i = 0; i < a.visited.size(); ++i)
    for (std::size_t j = i + 1; j < a.visited.size(); ++j)
      CHECK(a.visited[i] != a.visited[j]);
}

TEST_CASE("zero-step campaigns report the prior baseline") {
  const ToyCampaign toy;
  const CampaignResult result = run_campaign(toy.model, toy.grid, plan_chunks(toy.grid, 16),
                                             toy.sites, toy.site_op, toy.truth, toy.config(0));
  REQUIRE(result.trajectory.size() == 1);
  CHECK(result.trajectory[0].step == 0);
  CHECK(result.trajectory[0].site == -1);
  CHECK(result.visited.empty());
}

TEST_CASE("static replay follows the given design") {
  const ToyCampaign toy;
  CampaignConfig config = toy.config(3);
  config.strategy = Strategy::Static;
  config.static_design = {2, 9, 14};
  const CampaignResult result = run_campaign(toy.model, toy.grid, plan_chunks(toy.grid, 16),
                                             toy.sites, toy.site_op, toy.truth, config);
  CHECK(result.visited == std::vector<Index>{2, 9, 14});
}

TEST_CASE("random-walk strategy stays within candidate sets") {
  const ToyCampaign toy;
  CampaignConfig config = toy.config(6);
  config.strategy = Strategy::RandomWalk;
  const CampaignResult result = run_campaign(toy.model, toy.grid, plan_chunks(toy.grid, 16),
                                             toy.sites, toy.site_op, toy.truth, config);
  CHECK(result.visited.size() == 6);
  for (std::size_t i = 1; i < result.visited.size(); ++i) {
    const double dist =
        (toy.sites.row(result.visited[i]) - toy.sites.row(result.visited[i - 1])).norm();
    CHECK(dist <= config.candidate_radius + 1e-9);
  }
}

TEST_CASE("limiting distribution is batch-size invariant and floors variance") {
  const ToyCampaign toy;
  const ChunkPlan plan = plan_chunks(toy.grid, 16);
  const double tau2 = 1e-4;

  const LimitingDistribution one =
      limiting_distribution(toy.model, toy.grid, plan, toy.site_op, tau2, toy.truth, 0.8, 5, 1);
  const LimitingDistribution ten =
      limiting_distribution(toy.model, toy.grid, plan, toy.site_op, tau2, toy.truth, 0.8, 5, 10);
  CHECK((one.variance - ten.variance).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((one.coverage.p - ten.coverage.p).cwiseAbs().maxCoeff() < 1e-8);

  // A campaign that visits a subset of the sites cannot beat the limit.
  CampaignConfig config = toy.config(6);
  const CampaignResult result =
      run_campaign(toy.model, toy.grid, plan, toy.sites, toy.site_op, toy.truth, config);
  const Vector campaign_var = result.posterior.variance_diag();
  CHECK((campaign_var - one.variance).minCoeff() >= -1e-8);
}

TEST_CASE("limiting distribution with all noiseless Diracs has zero variance") {
  TestRng rng(541);
  const Grid grid = testsup::random_grid_1d(rng, 18);
  const PriorModel model = testsup::random_model(rng);
  std::vector<Index> all(18);
  for (Index i = 0; i < 18; ++i) all[static_cast<std::size_t>(i)] = i;
  const Operator diracs = pointwise_operator(grid, all);
  Vector truth(18);
  for (Index i = 0; i < 18; ++i) truth[i] = rng.uniform(-1.0, 1.0);

  const LimitingDistribution limit = limiting_distribution(
      model, grid, plan_chunks(grid, 6), diracs, 0.0, truth, 0.0, 3, 4);
  CHECK(limit.variance.cwiseAbs().maxCoeff() <=
        1e-8 * model.kernel.sigma0 * model.kernel.sigma0);
}

TEST_CASE("campaign persistence resumes bitwise") {
  const ToyCampaign toy;
  const ChunkPlan plan = plan_chunks(toy.grid, 16);
  const auto dir_full = std::filesystem::temp_directory_path() / "seqgp_campaign_full";
  const auto dir_resume = std::filesystem::temp_directory_path() / "seqgp_campaign_resume";
  std::filesystem::remove_all(dir_full);
  std::filesystem::remove_all(dir_resume);

  CampaignConfig config = toy.config(6);
  config.persist_dir = dir_full;
  const CampaignResult full =
      run_campaign(toy.model, toy.grid, plan, toy.sites, toy.site_op, toy.truth, config);

  CampaignConfig head = config;
  head.persist_dir = dir_resume;
  head.n_steps = 3;
  run_campaign(toy.model, toy.grid, plan, toy.sites, toy.site_op, toy.truth, head);
  CampaignConfig tail = config;
  tail.persist_dir = dir_resume;
  const CampaignResult resumed =
      run_campaign(toy.model, toy.grid, plan, toy.sites, toy.site_op, toy.truth, tail, 3);

  REQUIRE(resumed.trajectory.size() == full.trajectory.size());
  for (std::size_t i = 0; i < full.trajectory.size(); ++i) {
    CHECK(resumed.trajectory[i].site == full.trajectory[i].site);
    CHECK(resumed.trajectory[i].tp == full.trajectory[i].tp);
    CHECK(resumed.trajectory[i].fp == full.trajectory[i].fp);
  }
  CHECK((resumed.posterior.mean() - full.posterior.mean()).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove_all(dir_full);
  std::filesystem::remove_all(dir_resume);
}
