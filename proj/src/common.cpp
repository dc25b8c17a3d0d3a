#include "seqgp/common.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>
#include <vector>

namespace seqgp {

namespace {
std::atomic<std::size_t> g_memory_budget{std::size_t{1} << 30};
std::atomic<int> g_num_threads{1};
std::atomic<std::uint64_t> g_flops{0};
}  // namespace

std::size_t memory_budget() { return g_memory_budget.load(); }
void set_memory_budget(std::size_t bytes) {
  if (bytes == 0) throw ConfigError("memory budget must be positive");
  g_memory_budget.store(bytes);
}

int num_threads() { return g_num_threads.load(); }
void set_num_threads(int n) {
  if (n < 1) throw ConfigError("thread count must be positive");
  g_num_threads.store(n);
}

void add_flops(std::uint64_t n) { g_flops.fetch_add(n, std::memory_order_relaxed); }
void reset_flop_count() { g_flops.store(0); }
std::uint64_t flop_count() { return g_flops.load(); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw NumericalError("normal_quantile: p must be in (0,1)");
  // Acklam's rational approximation, sharpened by one Halley step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = normal_cdf(x) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

double normal_logpdf(double x, double mean, double var) {
  if (!(var > 0.0)) throw NumericalError("normal_logpdf: variance must be positive");
  const double z = x - mean;
  return -0.5 * (std::log(2.0 * M_PI * var) + z * z / var);
}

Matrix CholFactor::inverse_factor() const {
  const Index n = llt.matrixL().rows();
  Matrix f = Matrix::Identity(n, n);
  llt.matrixL().transpose().solveInPlace(f);
  return f;  // upper triangular, F F^T = S^{-1}
}

double CholFactor::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

namespace {
// Pivot-ratio guard: a "successful" LLT with a vanishing pivot would poison
// later solves, so it is treated as a failure and the ladder escalates.
bool llt_acceptable(const Eigen::LLT<Matrix>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const auto diag = llt.matrixLLT().diagonal();
  const double dmin = diag.minCoeff();
  const double dmax = diag.maxCoeff();
  if (!(dmin > 0.0) || !std::isfinite(dmax)) return false;
  return (dmax / dmin) * (dmax / dmin) < 1e14;
}

Index estimate_rank(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  const auto& ev = eig.eigenvalues();
  const double tol = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-12;
  Index r = 0;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev[i] > tol) ++r;
  return r;
}
}  // namespace

CholFactor chol_with_jitter(const Matrix& s, const std::string& what) {
  if (s.rows() != s.cols()) throw NumericalError(what + ": matrix not square");
  double scale = s.diagonal().mean();
  if (!(scale > 0.0)) scale = 1.0;
  static const double ladder[] = {0.0, 1e-10, 1e-8, 1e-6};
  for (double rel : ladder) {
    CholFactor out;
    out.jitter = rel * scale;
    Matrix shifted = s;
    if (out.jitter > 0.0) shifted.diagonal().array() += out.jitter;
    out.llt.compute(shifted);
    if (llt_acceptable(out.llt)) return out;
  }
  std::ostringstream msg;
  msg << what << ": matrix of size " << s.rows()
      << " not positive definite after jitter ladder (estimated rank "
      << estimate_rank(s) << " of " << s.rows() << ")";
  throw NumericalError(msg.str());
}

void parallel_for(Index n, const std::function<void(Index)>& fn) {
  const int workers = std::min<Index>(num_threads(), n);
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (Index i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace seqgp
