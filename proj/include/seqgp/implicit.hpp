// The matrix-free posterior covariance: an updatable multiplication oracle
// with per-stage low-rank state. Products with the stage-n covariance are
//
//   K^(n) A = K^(0) A - sum_i Lambda_i S_i^-1 Lambda_i^T A,
//
// where Lambda_i = K^(i-1) G_i^T and S_i = G_i K^(i-1) G_i^T + tau_i^2 I.
// The prior term is evaluated in chunks and each correction as two thin
// products, so no m x m matrix ever exists.
#pragma once

#include "seqgp/io.hpp"
#include "seqgp/kernels.hpp"
#include "seqgp/operators.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

namespace seqgp {

/// In-memory or mmap-backed m x p matrix. Spilled pushforwards stay on disk
/// and participate in products through the map.
class MatrixStore {
 public:
  MatrixStore() = default;
  explicit MatrixStore(Matrix dense) : dense_(std::make_shared<Matrix>(std::move(dense))) {}
  static MatrixStore mapped(const std::filesystem::path& path) {
    MatrixStore s;
    s.mapped_ = std::make_shared<MappedMatrix>(path);
    return s;
  }

  Index rows() const { return dense_ ? dense_->rows() : mapped_->rows(); }
  Index cols() const { return dense_ ? dense_->cols() : mapped_->cols(); }
  bool is_mapped() const { return mapped_ != nullptr; }
  std::size_t resident_bytes() const {
    return dense_ ? static_cast<std::size_t>(dense_->size()) * sizeof(double) : 0;
  }

  template <class F>
  decltype(auto) visit(F&& f) const {
    if (dense_) return f(*dense_);
    return f(mapped_->map());
  }

  Matrix to_matrix() const {
    return visit([](const auto& m) { return Matrix(m); });
  }

 private:
  std::shared_ptr<Matrix> dense_;
  std::shared_ptr<MappedMatrix> mapped_;
};

/// Per-stage low-rank state. `inv_inner_factor` is an upper-triangular F
/// with F F^T = S_i^-1; the operator is kept for audit and serialization.
struct StageRecord {
  MatrixStore lambda;       // m x p_i pushforward K^(i-1) G_i^T
  Matrix inv_inner_factor;  // p_i x p_i
  Vector mean_coeff;        // S_i^-1 (y_i - G_i m^(i-1)), persisted for replay
  Operator op;
  double tau2 = 0.0;
  double jitter = 0.0;  // absolute jitter the factorization needed

  Index p() const { return inv_inner_factor.rows(); }
};

class ImplicitPosterior {
 public:
  /// Stage-0 object: covmul is the prior product, mean is constant m0.
  ImplicitPosterior(PriorModel model, Grid grid, ChunkPlan plan);

  /// K^(n) A for an m x q right-hand side.
  Matrix covmul(const Matrix& a) const;

  /// Appends one stage: computes the pushforward through the current
  /// covariance, factors the inner matrix, and updates the mean.
  void assimilate(const DataStage& stage);

  /// diag(K^(n)) without materializing K^(n): the prior diagonal minus the
  /// row-wise squared norms of Lambda_i F_i.
  Vector variance_diag() const;

  /// Bytes needed to hold the representation: per stage m*p_i + p_i^2
  /// scalars, plus the mean.
  std::uint64_t storage_bytes(int bytes_per_scalar) const;

  /// Leading-order multiply-add count of covmul with q columns:
  /// m^2 q + sum_i (m p_i q + p_i^2 q).
  std::uint64_t flop_estimate(Index q) const;

  /// Leading-order cost of having built the stage-n representation:
  /// m^2 p + m p^2 + p^2 p_c with p the total data size and p_c the mean
  /// stage size.
  std::uint64_t flop_estimate_build() const;

  const Vector& mean() const { return mean_; }
  int stage_count() const { return static_cast<int>(stages_.size()); }
  const StageRecord& stage(int i) const { return stages_.at(static_cast<std::size_t>(i)); }
  const PriorModel& model() const { return model_; }
  const Grid& grid() const { return grid_; }
  const ChunkPlan& plan() const { return plan_; }

  /// Directory for pushforwards that do not fit the memory budget; without
  /// one, overflowing assimilations fail with BudgetError.
  void set_spill_dir(const std::filesystem::path& dir) { spill_dir_ = dir; }

  /// Persists stage i as <dir>/stage_<i>/{lambda.bin,s_factor.bin,meta.json};
  /// `extra_meta` (a JSON object as text) is merged into the meta file.
  void save_stage(int i, const std::filesystem::path& run_dir,
                  const std::string& extra_meta = "") const;

  /// Rebuilds a posterior from persisted stage records, replaying the mean
  /// recursion with the recorded data. Pushforwards are mapped, not loaded.
  static ImplicitPosterior load_stages(PriorModel model, Grid grid, ChunkPlan plan,
                                       const std::filesystem::path& run_dir, int n_stages);

 private:
  PriorModel model_;
  Grid grid_;
  ChunkPlan plan_;
  std::vector<StageRecord> stages_;
  Vector mean_;
  std::optional<std::filesystem::path> spill_dir_;
  std::size_t resident_lambda_bytes_ = 0;

  void append_stage(StageRecord record, const Vector& y);
};

}  // namespace seqgp
