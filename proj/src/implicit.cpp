#include "seqgp/implicit.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace seqgp {

using nlohmann::json;

ImplicitPosterior::ImplicitPosterior(PriorModel model, Grid grid, ChunkPlan plan)
    : model_(std::move(model)), grid_(std::move(grid)), plan_(std::move(plan)) {
  validate(model_.kernel);
  mean_ = Vector::Constant(grid_.size(), model_.m0);
}

Matrix ImplicitPosterior::covmul(const Matrix& a) const {
  const Index m = grid_.size();
  const Index q = a.cols();
  if (a.rows() != m) throw ConfigError("covmul: A must have one row per grid point");
  if (static_cast<std::size_t>(m) * static_cast<std::size_t>(q) * sizeof(double) > memory_budget()) {
    std::ostringstream msg;
    msg << "covmul: " << m << " x " << q << " result exceeds the memory budget";
    throw BudgetError(msg.str());
  }

  Matrix result = prior_covmul(model_, grid_, a, plan_);
  for (const auto& stage : stages_) {
    const Index p = stage.p();
    stage.lambda.visit([&](const auto& lambda) {
      Matrix t = lambda.transpose() * a;                          // p x q
      t = stage.inv_inner_factor * (stage.inv_inner_factor.transpose() * t).eval();
      result.noalias() -= lambda * t;
    });
    add_flops(static_cast<std::uint64_t>(p) * q * (2 * m + 2 * p));
  }
  return result;
}

void ImplicitPosterior::append_stage(StageRecord record, const Vector& y) {
  // Mean update uses the pre-update pushforward: c = S^-1 (y - G mean).
  const Vector innov = y - record.op.mat * mean_;
  record.mean_coeff =
      record.inv_inner_factor * (record.inv_inner_factor.transpose() * innov).eval();
  record.lambda.visit([&](const auto& lambda) { mean_ += lambda * record.mean_coeff; });
  resident_lambda_bytes_ += record.lambda.resident_bytes();
  stages_.push_back(std::move(record));
}

void ImplicitPosterior::assimilate(const DataStage& stage) {
  const Index m = grid_.size();
  const Index p = stage.op.rows();
  if (stage.op.cols() != m) throw ConfigError("assimilate: operator/grid size mismatch");
  if (stage.y.size() != p) throw ConfigError("assimilate: data length mismatch");
  if (p < 1) throw ConfigError("assimilate: stage must have at least one row");

  const std::size_t lambda_bytes =
      static_cast<std::size_t>(m) * static_cast<std::size_t>(p) * sizeof(double);
  if (lambda_bytes > memory_budget()) {
    std::ostringstream msg;
    msg << "assimilate: " << m << " x " << p << " pushforward exceeds the memory budget";
    throw BudgetError(msg.str());
  }

  Matrix lambda = covmul(stage.op.mat.transpose());  // m x p, K^(n) G^T
  Matrix s = stage.op.mat * lambda;                  // p x p
  s.diagonal().array() += stage.tau2;
  s = 0.5 * (s + s.transpose()).eval();
  const CholFactor chol = chol_with_jitter(s, "assimilate inner matrix");

  StageRecord record;
  record.inv_inner_factor = chol.inverse_factor();
  record.op = stage.op;
  record.tau2 = stage.tau2;
  record.jitter = chol.jitter;

  // Spill to disk if keeping this pushforward resident would blow the budget.
  if (resident_lambda_bytes_ + lambda_bytes > memory_budget()) {
    if (!spill_dir_) {
      std::ostringstream msg;
      msg << "assimilate: resident pushforwards would exceed the memory budget ("
          << resident_lambda_bytes_ + lambda_bytes << " bytes) and no spill directory is set";
      throw BudgetError(msg.str());
    }
    std::filesystem::create_directories(*spill_dir_);
    const auto path = *spill_dir_ / ("lambda_spill_" + std::to_string(stages_.size() + 1) + ".bin");
    write_matrix(path, lambda, ScalarKind::F64);
    lambda.resize(0, 0);
    record.lambda = MatrixStore::mapped(path);
  } else {
    record.lambda = MatrixStore(std::move(lambda));
  }

  append_stage(std::move(record), stage.y);
}

Vector ImplicitPosterior::variance_diag() const {
  const Index m = grid_.size();
  Vector var = Vector::Constant(m, kernel_eval(model_.kernel, 0.0));
  for (const auto& stage : stages_) {
    stage.lambda.visit([&](const auto& lambda) {
      for (const auto& [rb, re] : plan_.ranges) {
        const Index rows = re - rb;
        var.segment(rb, rows) -=
            (lambda.middleRows(rb, rows) * stage.inv_inner_factor).rowwise().squaredNorm();
      }
    });
  }
  return var;
}

std::uint64_t ImplicitPosterior::storage_bytes(int bytes_per_scalar) const {
  const std::uint64_t m = static_cast<std::uint64_t>(grid_.size());
  std::uint64_t scalars = m;  // the mean
  for (const auto& stage : stages_) {
    const std::uint64_t p = static_cast<std::uint64_t>(stage.p());
    scalars += m * p + p * p;
  }
  return scalars * static_cast<std::uint64_t>(bytes_per_scalar);
}

std::uint64_t ImplicitPosterior::flop_estimate(Index q) const {
  const std::uint64_t m = static_cast<std::uint64_t>(grid_.size());
  const std::uint64_t qq = static_cast<std::uint64_t>(q);
  std::uint64_t total = m * m * qq;
  for (const auto& stage : stages_) {
    const std::uint64_t p = static_cast<std::uint64_t>(stage.p());
    total += m * p * qq + p * p * qq;
  }
  return total;
}

std::uint64_t ImplicitPosterior::flop_estimate_build() const {
  if (stages_.empty()) return 0;
  const std::uint64_t m = static_cast<std::uint64_t>(grid_.size());
  std::uint64_t p_total = 0;
  for (const auto& stage : stages_) p_total += static_cast<std::uint64_t>(stage.p());
  const std::uint64_t p_c = p_total / static_cast<std::uint64_t>(stages_.size());
  return m * m * p_total + m * p_total * p_total + p_total * p_total * p_c;
}

namespace {
std::filesystem::path stage_dir(const std::filesystem::path& run_dir, int stage_1based) {
  std::ostringstream name;
  name << "stage_" << stage_1based;
  return run_dir / name.str();
}
}  // namespace

void ImplicitPosterior::save_stage(int i, const std::filesystem::path& run_dir,
                                   const std::string& extra_meta) const {
  const auto& record = stages_.at(static_cast<std::size_t>(i));
  const auto dir = stage_dir(run_dir, i + 1);
  std::filesystem::create_directories(dir);
  record.lambda.visit([&](const auto& lambda) { write_matrix(dir / "lambda.bin", Matrix(lambda)); });
  write_matrix(dir / "s_factor.bin", record.inv_inner_factor);

  json meta;
  meta["stage"] = i + 1;
  meta["p"] = record.p();
  meta["tau2"] = record.tau2;
  meta["jitter"] = record.jitter;
  meta["op_kind"] = record.op.kind;
  meta["labels"] = record.op.labels;
  meta["mean_coeff"] = std::vector<double>(record.mean_coeff.data(),
                                           record.mean_coeff.data() + record.mean_coeff.size());
  if (!extra_meta.empty()) {
    const json extra = json::parse(extra_meta);
    for (const auto& [key, value] : extra.items()) meta[key] = value;
  }
  atomic_write_text(dir / "meta.json", meta.dump(2) + "\n");
}

ImplicitPosterior ImplicitPosterior::load_stages(PriorModel model, Grid grid, ChunkPlan plan,
                                                 const std::filesystem::path& run_dir,
                                                 int n_stages) {
  ImplicitPosterior post(std::move(model), std::move(grid), std::move(plan));
  for (int i = 1; i <= n_stages; ++i) {
    const auto dir = stage_dir(run_dir, i);
    std::ifstream meta_in(dir / "meta.json");
    if (!meta_in) throw ConfigError("missing stage record " + (dir / "meta.json").string());
    const json meta = json::parse(meta_in);

    StageRecord record;
    // Resident by default so a resumed run reproduces the original
    // arithmetic bit-for-bit; map only when the budget forbids residency.
    {
      const auto lambda_path = dir / "lambda.bin";
      const auto bytes = static_cast<std::size_t>(std::filesystem::file_size(lambda_path));
      if (post.resident_lambda_bytes_ + bytes > memory_budget())
        record.lambda = MatrixStore::mapped(lambda_path);
      else
        record.lambda = MatrixStore(read_matrix(lambda_path));
    }
    record.inv_inner_factor = read_matrix(dir / "s_factor.bin");
    record.tau2 = meta.at("tau2").get<double>();
    record.jitter = meta.value("jitter", 0.0);
    record.op.kind = meta.value("op_kind", std::string("unknown"));
    if (meta.contains("labels")) record.op.labels = meta.at("labels").get<std::vector<std::string>>();

    // The mean recursion is replayed from the persisted innovation
    // coefficients; the operator matrix itself is not needed.
    const auto coeff = meta.at("mean_coeff").get<std::vector<double>>();
    if (static_cast<Index>(coeff.size()) != record.p())
      throw ConfigError("stage record " + dir.string() + ": bad mean_coeff length");
    record.mean_coeff = Eigen::Map<const Vector>(coeff.data(), static_cast<Index>(coeff.size()));
    record.lambda.visit([&](const auto& lambda) { post.mean_ += lambda * record.mean_coeff; });
    post.resident_lambda_bytes_ += record.lambda.resident_bytes();
    post.stages_.push_back(std::move(record));
  }
  return post;
}

}  // namespace seqgp
