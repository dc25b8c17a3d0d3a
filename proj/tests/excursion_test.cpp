#include "seqgp/excursion.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace seqgp;
using testsup::TestRng;

TEST_CASE("coverage closed form") {
  Vector mean(3), var(3);
  mean << 1.0, 2.0, 0.5;
  var << 0.25, 0.0, 0.0;
  const CoverageField field = coverage(mean, var, 1.0, 2.0, 1.0);
  CHECK(field.p[0] == doctest::Approx(0.5));   // mean at the threshold
  CHECK(field.p[1] == 1.0);                    // degenerate, above
  CHECK(field.p[2] == 0.0);                    // degenerate, below

  Vector bad_var(3);
  bad_var << 0.25, -1e-9, 0.0;
  CHECK_NOTHROW(coverage(mean, bad_var, 1.0, 2.0, 1.0));  // clipped to zero
  bad_var[1] = -1e-6;
  CHECK_THROWS_AS(coverage(mean, bad_var, 1.0, 2.0, 1.0), NumericalError);
}

TEST_CASE("coverage matches Monte Carlo frequencies") {
  TestRng rng(301);
  const int n_draws = 100000;
  for (int trial = 0; trial < 4; ++trial) {
    const double mu = rng.uniform(-1.0, 1.0);
    const double sd = rng.uniform(0.3, 2.0);
    const double threshold = rng.uniform(-1.0, 1.5);

    Vector mean(1), var(1);
    mean << mu;
    var << sd * sd;
    const double p = coverage(mean, var, threshold, 1.0, 1.0).p[0];

    int hits = 0;
    for (int i = 0; i < n_draws; ++i)
      if (mu + sd * rng.normal() >= threshold) ++hits;
    const double freq = static_cast<double>(hits) / n_draws;
    const double se = std::sqrt(std::max(p * (1.0 - p), 1e-8) / n_draws);
    CHECK(std::abs(freq - p) <= 3.0 * se);
  }
}

TEST_CASE("coverage is monotone decreasing in the threshold") {
  TestRng rng(307);
  Vector mean(20), var(20);
  for (Index i = 0; i < 20; ++i) {
    mean[i] = rng.uniform(-2.0, 2.0);
    var[i] = rng.uniform(0.0, 4.0);
  }
  Vector last = coverage(mean, var, -3.0, 1.0, 2.0).p;
  for (double threshold : {-1.0, 0.0, 1.0, 3.0}) {
    const Vector p = coverage(mean, var, threshold, 1.0, 2.0).p;
    CHECK((last - p).minCoeff() >= 0.0);
    last = p;
  }
}

TEST_CASE("vorobev quantiles are nested and closed") {
  TestRng rng(311);
  CoverageField field;
  field.cell_volume = 1.0;
  field.threshold = 0.0;
  field.p.resize(50);
  for (Index i = 0; i < 50; ++i) field.p[i] = rng.uniform();

  const double pmax = field.p.maxCoeff();
  const double pmin = field.p.minCoeff();
  CHECK(vorobev_quantile(field, std::min(1.0, pmax + 1e-9)).volume == 0.0);
  CHECK(vorobev_quantile(field, pmin).volume == 50.0);  // closed membership

  const auto q_lo = vorobev_quantile(field, 0.3);
  const auto q_hi = vorobev_quantile(field, 0.7);
  for (std::size_t i = 0; i < q_hi.mask.size(); ++i)
    if (q_hi.mask[i]) CHECK(q_lo.mask[i]);

  CHECK_THROWS_AS(vorobev_quantile(field, 0.0), ConfigError);
  CHECK_THROWS_AS(vorobev_quantile(field, 1.5), ConfigError);
}

TEST_CASE("expected volume is the coverage integral") {
  CoverageField field;
  field.cell_volume = 0.5;
  field.p = Vector::Constant(40, 0.5);
  CHECK(expected_volume(field) == doctest::Approx(10.0));  // V / 2 with V = 20
  field.p.setOnes();
  CHECK(expected_volume(field) == doctest::Approx(20.0));
}

TEST_CASE("vorobev expectation on a two-cell field") {
  CoverageField field;
  field.cell_volume = 1.0;
  field.p.resize(2);
  field.p << 0.9, 0.1;
  const auto [alpha, estimate] = vorobev_expectation(field);
  CHECK(expected_volume(field) == doctest::Approx(1.0));
  CHECK(alpha == doctest::Approx(0.9));
  CHECK(estimate.volume == 1.0);
  CHECK(estimate.mask[0] == 1);
  CHECK(estimate.mask[1] == 0);
}

TEST_CASE("constant coverage selects the full domain at its level") {
  CoverageField field;
  field.cell_volume = 2.0;
  field.p = Vector::Constant(12, 0.37);
  const auto [alpha, estimate] = vorobev_expectation(field);
  CHECK(alpha == doctest::Approx(0.37));
  CHECK(estimate.volume == doctest::Approx(24.0));
}

TEST_CASE("all-zero coverage yields the empty estimate at alpha one") {
  CoverageField field;
  field.cell_volume = 1.0;
  field.p = Vector::Zero(8);
  const auto [alpha, estimate] = vorobev_expectation(field);
  CHECK(alpha == 1.0);
  CHECK(estimate.volume == 0.0);
}

TEST_CASE("vorobev bracket holds exactly on random coverage fields") {
  TestRng rng(313);
  for (int trial = 0; trial < 100; ++trial) {
    CoverageField field;
    field.cell_volume = rng.uniform(0.5, 3.0);
    const Index n = 1 + rng.index(40);
    field.p.resize(n);
    for (Index i = 0; i < n; ++i)
      field.p[i] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();

    const double target = expected_volume(field);
    const auto [alpha_v, estimate] = vorobev_expectation(field);
    CHECK(estimate.volume >= target);

    // mu(Q_alpha) <= E[V] for every attained alpha strictly above alpha_V.
    for (Index i = 0; i < n; ++i) {
      const double alpha = field.p[i];
      if (alpha > alpha_v) CHECK(vorobev_quantile(field, alpha).volume <= target);
    }
  }
}

TEST_CASE("plug-in estimate thresholds the mean") {
  Vector mean = Vector::Constant(6, 1.0);
  const auto full = plugin_estimate(mean, 1.0, 1.0);
  CHECK(full.volume == 6.0);  // closed inequality
  const auto empty = plugin_estimate(mean, 1.5, 1.0);
  CHECK(empty.volume == 0.0);
}

TEST_CASE("zero-variance posterior: plug-in equals the Vorobev expectation") {
  TestRng rng(317);
  Vector mean(15);
  for (Index i = 0; i < 15; ++i) mean[i] = rng.uniform(-2.0, 2.0);
  const Vector var = Vector::Zero(15);
  const double threshold = 0.2;

  const CoverageField field = coverage(mean, var, threshold, 1.0, 1.0);
  const auto [alpha, vorobev] = vorobev_expectation(field);
  const auto plugin = plugin_estimate(mean, threshold, 1.0);
  CHECK(vorobev.mask == plugin.mask);
}

TEST_CASE("detection metrics") {
  const std::vector<std::uint8_t> truth{1, 1, 0, 0, 1, 0};
  const auto perfect = detection_metrics(truth, truth);
  CHECK(perfect.tp == 1.0);
  CHECK(perfect.fp == 0.0);

  const std::vector<std::uint8_t> empty(6, 0);
  const auto none = detection_metrics(empty, truth);
  CHECK(none.tp == 0.0);
  CHECK(none.fp == 0.0);

  const std::vector<std::uint8_t> everything(6, 1);
  const auto all = detection_metrics(everything, truth);
  CHECK(all.tp == 1.0);
  CHECK(all.fp == 1.0);

  // Empty truth: tp is 1 only for the empty estimate.
  CHECK(detection_metrics(empty, empty).tp == 1.0);
  CHECK(detection_metrics(everything, empty).tp == 0.0);
}

TEST_CASE("tp is monotone under estimate union") {
  TestRng rng(331);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> truth(30), a(30), u(30);
    for (int i = 0; i < 30; ++i) {
      truth[static_cast<std::size_t>(i)] = rng.uniform() < 0.4 ? 1 : 0;
      a[static_cast<std::size_t>(i)] = rng.uniform() < 0.3 ? 1 : 0;
      u[static_cast<std::size_t>(i)] =
          a[static_cast<std::size_t>(i)] | (rng.uniform() < 0.3 ? 1 : 0);
    }
    const auto ma = detection_metrics(a, truth);
    const auto mu = detection_metrics(u, truth);
    CHECK(ma.tp >= 0.0);
    CHECK(ma.tp <= 1.0);
    CHECK(ma.fp >= 0.0);
    CHECK(ma.fp <= 1.0);
    CHECK(mu.tp >= ma.tp);
  }
}
