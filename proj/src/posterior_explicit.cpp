#include "seqgp/posterior_explicit.hpp"

#include <sstream>

namespace seqgp {

namespace {
void symmetrize(Matrix& c) { c = 0.5 * (c + c.transpose()).eval(); }
}  // namespace

ExplicitPosterior condition_batch(const PriorModel& model, const Grid& grid,
                                  const DataStage& stage) {
  const Index m = grid.size();
  if (stage.op.cols() != m) throw ConfigError("condition_batch: operator/grid size mismatch");

  const Matrix k = cross_cov_block(model, grid.points, grid.points);
  const Vector prior_mean = Vector::Constant(m, model.m0);

  const Matrix kgt = k * stage.op.mat.transpose();          // m x p
  Matrix s = stage.op.mat * kgt;                            // p x p
  s.diagonal().array() += stage.tau2;
  symmetrize(s);
  const CholFactor chol = chol_with_jitter(s, "condition_batch data covariance");

  const Vector innovation = stage.y - stage.op.mat * prior_mean;
  ExplicitPosterior post;
  post.stage = 1;
  post.mean = prior_mean + kgt * chol.solve(innovation);
  post.cov = k - kgt * chol.solve(kgt.transpose());
  symmetrize(post.cov);
  return post;
}

ExplicitPosterior update_stage_explicit(const ExplicitPosterior& post, const DataStage& stage) {
  if (stage.op.cols() != post.mean.size())
    throw ConfigError("update_stage_explicit: operator/posterior size mismatch");

  const Matrix gk = stage.op.mat * post.cov;                // p x m, G K^(n-1)
  Matrix s = gk * stage.op.mat.transpose();                 // p x p
  s.diagonal().array() += stage.tau2;
  symmetrize(s);
  const CholFactor chol = chol_with_jitter(s, "update_stage data covariance");
  const Matrix weights = chol.solve(gk);                    // p x m, S^-1 G K^(n-1)

  ExplicitPosterior next;
  next.stage = post.stage + 1;
  next.mean = post.mean + weights.transpose() * (stage.y - stage.op.mat * post.mean);
  next.cov = post.cov - weights.transpose() * s * weights;
  symmetrize(next.cov);
  return next;
}

ExplicitPosterior condition_via_representing_sequence(const PriorModel& model, const Grid& grid,
                                                      const Operator& op, const Vector& y) {
  const Index m = grid.size();
  const Index p = op.rows();
  if (op.cols() != m) throw ConfigError("representing sequence: operator/grid size mismatch");
  if (y.size() != p) throw ConfigError("representing sequence: data length mismatch");

  const Matrix k = cross_cov_block(model, grid.points, grid.points);
  Matrix c_nu = op.mat * k * op.mat.transpose();
  symmetrize(c_nu);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(c_nu);
  const Vector ev = eig.eigenvalues();
  const double floor = 1e-12 * ev.sum() / static_cast<double>(p);
  if (ev.minCoeff() <= floor) {
    Index rank = 0;
    for (Index i = 0; i < p; ++i)
      if (ev[i] > floor) ++rank;
    std::ostringstream msg;
    msg << "representing sequence: C_nu rank deficient (estimated rank " << rank << " of " << p
        << ")";
    throw NumericalError(msg.str());
  }
  // Symmetric inverse square root; column i is y_i*.
  const Matrix rep =
      eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();

  const Vector prior_mean = Vector::Constant(m, model.m0);
  const Vector innov = y - op.mat * prior_mean;
  const Matrix kgt = k * op.mat.transpose();  // m x p

  ExplicitPosterior post;
  post.stage = 1;
  post.mean = prior_mean;
  post.cov = k;
  for (Index i = 0; i < p; ++i) {
    const Vector yi = rep.col(i);
    const Vector push = kgt * yi;  // C_mu G* y_i* on the grid
    post.mean += innov.dot(yi) * push;
    post.cov -= push * push.transpose();
  }
  symmetrize(post.cov);
  return post;
}

}  // namespace seqgp
