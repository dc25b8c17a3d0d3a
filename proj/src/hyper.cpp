#include "seqgp/hyper.hpp"

#include <algorithm>
#include <cmath>

namespace seqgp {

namespace {

// G (K G^T) with the prior product chunked; p x p result, symmetrized.
Matrix data_space_gram(const PriorModel& model, const Grid& grid, const ChunkPlan& plan,
                       const Operator& op) {
  const Matrix kgt = prior_covmul(model, grid, op.mat.transpose(), plan);
  Matrix s = op.mat * kgt;
  return 0.5 * (s + s.transpose()).eval();
}

}  // namespace

double nmll(const PriorModel& model, const Grid& grid, const ChunkPlan& plan,
            const DataStage& stage) {
  const Index p = stage.op.rows();
  Matrix r = data_space_gram(model, grid, plan, stage.op);
  r.diagonal().array() += stage.tau2;
  const CholFactor chol = chol_with_jitter(r, "nmll data covariance");
  const Vector innov = stage.y - stage.op.mat * Vector::Constant(grid.size(), model.m0);
  return 0.5 * chol.log_det() + 0.5 * innov.dot(chol.solve(innov)) +
         0.5 * static_cast<double>(p) * std::log(2.0 * M_PI);
}

double concentrated_m0(const Kernel& kernel, const Grid& grid, const ChunkPlan& plan,
                       const DataStage& stage) {
  PriorModel model{kernel, 0.0};
  Matrix r = data_space_gram(model, grid, plan, stage.op);
  r.diagonal().array() += stage.tau2;
  const CholFactor chol = chol_with_jitter(r, "concentrated_m0 data covariance");
  const Vector g1 = stage.op.mat * Vector::Ones(grid.size());
  const Vector rinv_g1 = chol.solve(g1);
  const double sensitivity = g1.dot(rinv_g1);
  if (!(sensitivity > 0.0))
    throw NumericalError("concentrated_m0: operator annihilates constant fields (zero sensitivity)");
  return stage.y.dot(rinv_g1) / sensitivity;
}

namespace {

// Concentrated nmll over sigma0 for one length scale, after a single
// eigendecomposition of the unit-variance Gram matrix: R = sigma0^2 C + tau2 I
// diagonalizes along with C, so each evaluation is O(p).
struct ConcentratedScan {
  Vector d;       // eigenvalues of C, clamped at 0
  Vector ut_g1;   // U^T G 1
  Vector ut_y;    // U^T y
  double tau2;
  Index p;

  struct Eval {
    double nmll;
    double m0;
  };

  Eval at(double sigma0) const {
    const double s2 = sigma0 * sigma0;
    Vector w = (s2 * d.array() + tau2).matrix();
    const double wmax = w.maxCoeff();
    if (!(wmax > 0.0)) return {std::numeric_limits<double>::infinity(), 0.0};
    // Relative floor keeps noiseless rank-deficient cases finite; mirrors
    // the jitter ladder used by the direct solvers.
    const double floor = 1e-12 * wmax;
    w = w.cwiseMax(floor);

    double s_gg = 0.0, s_gy = 0.0;
    for (Index i = 0; i < p; ++i) {
      s_gg += ut_g1[i] * ut_g1[i] / w[i];
      s_gy += ut_g1[i] * ut_y[i] / w[i];
    }
    if (!(s_gg > 0.0)) return {std::numeric_limits<double>::infinity(), 0.0};
    const double m0 = s_gy / s_gg;

    double quad = 0.0, logdet = 0.0;
    for (Index i = 0; i < p; ++i) {
      const double resid = ut_y[i] - m0 * ut_g1[i];
      quad += resid * resid / w[i];
      logdet += std::log(w[i]);
    }
    return {0.5 * logdet + 0.5 * quad + 0.5 * static_cast<double>(p) * std::log(2.0 * M_PI), m0};
  }
};

}  // namespace

FitResult fit(const Grid& grid, const ChunkPlan& plan, const DataStage& data,
              KernelFamily family, std::vector<double> lambda_grid, double sigma_init,
              int budget) {
  if (lambda_grid.empty()) throw ConfigError("fit: lambda grid must be nonempty");
  if (!(sigma_init > 0.0)) throw ConfigError("fit: sigma_init must be positive");
  std::sort(lambda_grid.begin(), lambda_grid.end());

  FitResult result;
  result.lambda_grid = lambda_grid;

  for (double lambda0 : lambda_grid) {
    PriorModel unit{Kernel{family, 1.0, lambda0}, 0.0};
    Matrix c = data_space_gram(unit, grid, plan, data.op);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c);

    ConcentratedScan scan;
    scan.d = eig.eigenvalues().cwiseMax(0.0);
    scan.ut_g1 = eig.eigenvectors().transpose() * (data.op.mat * Vector::Ones(grid.size()));
    scan.ut_y = eig.eigenvectors().transpose() * data.y;
    scan.tau2 = data.tau2;
    scan.p = data.op.rows();

    // Coarse scan in log sigma0, then golden-section refinement.
    int evals = 0;
    const double lo0 = std::log(sigma_init) - 6.0;
    const double hi0 = std::log(sigma_init) + 6.0;
    const int coarse = 49;
    double best_t = lo0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int i = 0; i < coarse && evals < budget; ++i, ++evals) {
      const double t = lo0 + (hi0 - lo0) * i / (coarse - 1);
      const double v = scan.at(std::exp(t)).nmll;
      if (v < best_v) {
        best_v = v;
        best_t = t;
      }
    }
    const double step = (hi0 - lo0) / (coarse - 1);
    double a = best_t - step, b = best_t + step;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = scan.at(std::exp(x1)).nmll;
    double f2 = scan.at(std::exp(x2)).nmll;
    evals += 2;
    bool converged = false;
    while (evals < budget) {
      if (b - a < 1e-6) {  // relative in sigma0, since t is log sigma0
        converged = true;
        break;
      }
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = scan.at(std::exp(x1)).nmll;
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = scan.at(std::exp(x2)).nmll;
      }
      ++evals;
    }

    FitRecord record;
    record.lambda0 = lambda0;
    record.sigma0 = std::exp(0.5 * (a + b));
    record.converged = converged;
    const auto final_eval = scan.at(record.sigma0);
    record.nmll = final_eval.nmll;
    record.m0 = final_eval.m0;
    result.records.push_back(record);
  }

  result.best = result.records.front();
  for (const auto& record : result.records)
    if (record.nmll < result.best.nmll) result.best = record;  // ties keep smaller lambda0
  return result;
}

PredictiveMetrics predictive_metrics(const PriorModel& model, const Grid& grid,
                                     const ChunkPlan& plan, const DataStage& train,
                                     const DataStage& test) {
  ImplicitPosterior post(model, grid, plan);
  post.assimilate(train);

  const Vector pred_mean = test.op.mat * post.mean();
  const Matrix u = post.covmul(test.op.mat.transpose());  // m x p_test
  const Index p = test.op.rows();

  PredictiveMetrics metrics;
  double sq = 0.0, nlpd = 0.0;
  for (Index i = 0; i < p; ++i) {
    const double resid = test.y[i] - pred_mean[i];
    sq += resid * resid;
    const double var = test.op.mat.row(i).dot(u.col(i)) + test.tau2;
    nlpd -= normal_logpdf(test.y[i], pred_mean[i], var);
  }
  metrics.rmse = std::sqrt(sq / static_cast<double>(p));
  metrics.nlpd = nlpd / static_cast<double>(p);
  return metrics;
}

}  // namespace seqgp
