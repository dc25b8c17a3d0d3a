// Shared aliases, error types, runtime knobs and small numeric helpers.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace seqgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Invalid user input: bad grid shapes, malformed configs, geometry violations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: singular data covariance after the jitter ladder, etc.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested computation does not fit the configured memory budget.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Process-wide knobs, set once by the CLI at startup. Default budget is 1 GB
// per worker; default is single-threaded.
std::size_t memory_budget();
void set_memory_budget(std::size_t bytes);
int num_threads();
void set_num_threads(int n);

// Multiply-add counter; the chunked products report into it so measured
// costs can be compared against the analytic estimates.
void add_flops(std::uint64_t n);
void reset_flop_count();
std::uint64_t flop_count();

double normal_cdf(double x);
double normal_quantile(double p);
double normal_logpdf(double x, double mean, double var);

/// Cholesky factor of a symmetric matrix obtained through the jitter ladder.
/// `jitter` is the absolute value that was added to the diagonal (0 if none
/// was needed).
struct CholFactor {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;

  template <class Derived>
  auto solve(const Eigen::MatrixBase<Derived>& b) const {
    return llt.solve(b);
  }
  /// Upper-triangular F with F F^T equal to the inverse of the factored
  /// matrix (F is the inverse transpose of the Cholesky L).
  Matrix inverse_factor() const;
  double log_det() const;
};

/// Factors S with escalating relative diagonal jitter {0, 1e-10, 1e-8, 1e-6}.
/// Throws NumericalError (naming `what` and the estimated rank) if even the
/// largest jitter leaves the matrix numerically indefinite.
CholFactor chol_with_jitter(const Matrix& s, const std::string& what);

/// Runs fn(0..n-1) across the configured worker threads. Tasks must write to
/// disjoint state; iteration-to-thread assignment is deterministic.
void parallel_for(Index n, const std::function<void(Index)>& fn);

}  // namespace seqgp
