#include "seqgp/design.hpp"

#include "seqgp/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace seqgp {

using nlohmann::json;

Vector wivr_batch(const ImplicitPosterior& post, const Operator& candidates, double tau2,
                  const Vector& weight) {
  const Index m = post.grid().size();
  if (candidates.cols() != m) throw ConfigError("wivr: candidate operator/grid size mismatch");
  if (weight.size() != m) throw ConfigError("wivr: weight/grid size mismatch");
  if (weight.minCoeff() < 0.0) throw ConfigError("wivr: weights must be nonnegative");

  const Index q = candidates.rows();
  const Matrix u = post.covmul(candidates.mat.transpose());  // m x q
  const double cell = post.grid().cell_volume;

  Vector values(q);
  for (Index c = 0; c < q; ++c) {
    const double s2 = candidates.mat.row(c).dot(u.col(c)) + tau2;
    if (!(s2 > 0.0)) {
      std::ostringstream msg;
      msg << "wivr: candidate " << c << " has nonpositive predictive variance " << s2;
      throw NumericalError(msg.str());
    }
    values[c] = u.col(c).array().square().matrix().dot(weight) / s2 * cell;
  }
  return values;
}

double wivr(const ImplicitPosterior& post, const Operator& candidate, double tau2,
            const Vector& weight) {
  if (candidate.rows() != 1) throw ConfigError("wivr: expected a single-row candidate");
  return wivr_batch(post, candidate, tau2, weight)[0];
}

Matrix dedup_sites(const Matrix& sites) {
  std::vector<Index> keep;
  for (Index i = 0; i < sites.rows(); ++i) {
    bool dup = false;
    for (Index j : keep)
      if ((sites.row(i) - sites.row(j)).norm() == 0.0) {
        dup = true;
        break;
      }
    if (!dup) keep.push_back(i);
  }
  Matrix out(static_cast<Index>(keep.size()), sites.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Index>(i)) = sites.row(keep[i]);
  return out;
}

std::vector<Index> candidate_set(const Matrix& sites, const std::vector<std::uint8_t>& visited,
                                 Index last_site, double radius) {
  if (sites.rows() == 0) throw ConfigError("candidate_set: no surface sites");
  if (static_cast<Index>(visited.size()) != sites.rows())
    throw ConfigError("candidate_set: visited mask size mismatch");

  std::vector<Index> ball;
  Index nearest = -1;
  double nearest_dist = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < sites.rows(); ++i) {
    if (visited[static_cast<std::size_t>(i)]) continue;
    const double dist = (sites.row(i) - sites.row(last_site)).norm();
    if (dist <= radius) ball.push_back(i);
    if (dist < nearest_dist) {
      nearest_dist = dist;
      nearest = i;
    }
  }
  if (!ball.empty()) return ball;
  if (nearest >= 0) return {nearest};
  return {};  // every site visited: campaign complete
}

namespace {

DetectionMetrics current_metrics(const ImplicitPosterior& post, double threshold,
                                 const std::vector<std::uint8_t>& truth_mask) {
  const CoverageField field = coverage(post.mean(), post.variance_diag(), threshold,
                                       post.grid().cell_volume, post.model().kernel.sigma0);
  const auto [alpha, estimate] = vorobev_expectation(field);
  (void)alpha;
  return detection_metrics(estimate.mask, truth_mask);
}

Operator site_row_operator(const Operator& site_op, Index site) {
  Operator op;
  op.kind = site_op.kind;
  op.mat = site_op.mat.row(site);
  if (static_cast<std::size_t>(site) < site_op.labels.size())
    op.labels.push_back(site_op.labels[static_cast<std::size_t>(site)]);
  return op;
}

constexpr std::uint64_t kNoiseStream = stream_id("campaign-observation-noise");
constexpr std::uint64_t kWalkStream = stream_id("campaign-random-walk");
constexpr std::uint64_t kEnsembleStream = stream_id("campaign-prior-ensemble");
constexpr std::uint64_t kResidualStream = stream_id("campaign-residual-noise");

}  // namespace

CampaignResult run_campaign(const PriorModel& model, const Grid& grid, const ChunkPlan& plan,
                            const Matrix& sites, const Operator& site_op, const Vector& truth,
                            const CampaignConfig& config, int resume_from) {
  if (site_op.rows() != sites.rows())
    throw ConfigError("run_campaign: site operator must have one row per site");
  if (truth.size() != grid.size()) throw ConfigError("run_campaign: truth/grid size mismatch");
  if (config.start_site < 0 || config.start_site >= sites.rows())
    throw ConfigError("run_campaign: start site out of range");
  if (config.strategy == Strategy::Static &&
      static_cast<int>(config.static_design.size()) < config.n_steps)
    throw ConfigError("run_campaign: static design shorter than n_steps");
  if (resume_from > 0 && !config.persist_dir)
    throw ConfigError("run_campaign: resume requires a persist directory");

  std::vector<std::uint8_t> truth_mask(static_cast<std::size_t>(truth.size()));
  for (Index i = 0; i < truth.size(); ++i)
    truth_mask[static_cast<std::size_t>(i)] = truth[i] >= config.threshold ? 1 : 0;

  CampaignResult result{
      {}, ImplicitPosterior(model, grid, plan), {}, {}, {}};
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(sites.rows()), 0);

  if (resume_from > 0) {
    result.posterior =
        ImplicitPosterior::load_stages(model, grid, plan, *config.persist_dir, resume_from);
  }
  if (config.persist_dir) {
    std::filesystem::create_directories(*config.persist_dir);
    result.posterior.set_spill_dir(*config.persist_dir / "spill");
  }

  // Baseline row: metrics of the prior's Vorob'ev expectation.
  {
    ImplicitPosterior prior_state(model, grid, plan);
    const DetectionMetrics metrics = current_metrics(prior_state, config.threshold, truth_mask);
    result.trajectory.push_back(
        {0, -1, std::numeric_limits<double>::quiet_NaN(), metrics.tp, metrics.fp});
  }

  // Replay persisted steps: visited sites, stages and logged metrics.
  for (int step = 1; step <= resume_from; ++step) {
    const auto dir = *config.persist_dir / ("stage_" + std::to_string(step));
    std::ifstream meta_in(dir / "meta.json");
    if (!meta_in) throw ConfigError("run_campaign: missing stage record for step " +
                                    std::to_string(step));
    const json meta = json::parse(meta_in);
    const Index site = meta.at("site").get<Index>();
    visited[static_cast<std::size_t>(site)] = 1;
    result.visited.push_back(site);
    const auto yvals = meta.at("y").get<std::vector<double>>();
    result.stages.push_back(make_stage(
        site_row_operator(site_op, site),
        Eigen::Map<const Vector>(yvals.data(), static_cast<Index>(yvals.size())), config.tau2));
    result.trajectory.push_back({step, site, meta.at("criterion").get<double>(),
                                 meta.at("tp").get<double>(), meta.at("fp").get<double>()});
  }

  Index last_site = result.visited.empty() ? config.start_site : result.visited.back();

  for (int step = resume_from + 1; step <= config.n_steps; ++step) {
    Index chosen = -1;
    double criterion = std::numeric_limits<double>::quiet_NaN();

    if (config.strategy == Strategy::Static) {
      chosen = config.static_design[static_cast<std::size_t>(step - 1)];
      if (chosen < 0 || chosen >= sites.rows())
        throw ConfigError("run_campaign: static design site out of range");
    } else {
      const std::vector<Index> candidates =
          candidate_set(sites, visited, last_site, config.candidate_radius);
      if (candidates.empty()) break;  // campaign complete

      if (config.strategy == Strategy::RandomWalk) {
        chosen = candidates[static_cast<std::size_t>(rng_index(
            config.seed, kWalkStream, static_cast<std::uint64_t>(step), candidates.size()))];
      } else {
        Vector weight;
        if (config.weight_mode == WeightMode::Coverage) {
          const CoverageField field =
              coverage(result.posterior.mean(), result.posterior.variance_diag(),
                       config.threshold, grid.cell_volume, model.kernel.sigma0);
          weight = field.p;
        } else {
          weight = Vector::Ones(grid.size());
        }
        Operator cand;
        cand.kind = site_op.kind;
        cand.mat.resize(static_cast<Index>(candidates.size()), grid.size());
        for (std::size_t c = 0; c < candidates.size(); ++c)
          cand.mat.row(static_cast<Index>(c)) = site_op.mat.row(candidates[c]);
        const Vector values = wivr_batch(result.posterior, cand, config.tau2, weight);
        // Largest weighted variance reduction wins; ties take the smallest
        // site index (candidates are ascending).
        Index best = 0;
        for (Index c = 1; c < values.size(); ++c)
          if (values[c] > values[best]) best = c;
        chosen = candidates[static_cast<std::size_t>(best)];
        criterion = values[best];
      }
    }

    // Observe the ground truth at the chosen site with fresh noise.
    Operator op = site_row_operator(site_op, chosen);
    Vector y = op.mat * truth;
    if (config.tau2 > 0.0) {
      NormalStream noise(config.seed, kNoiseStream ^ static_cast<std::uint64_t>(step));
      y[0] += std::sqrt(config.tau2) * noise.next();
    }
    const DataStage stage = make_stage(std::move(op), y, config.tau2);
    result.posterior.assimilate(stage);
    result.stages.push_back(stage);
    visited[static_cast<std::size_t>(chosen)] = 1;
    result.visited.push_back(chosen);
    last_site = chosen;

    const DetectionMetrics metrics =
        current_metrics(result.posterior, config.threshold, truth_mask);
    result.trajectory.push_back({step, chosen, criterion, metrics.tp, metrics.fp});

    if (config.persist_dir) {
      json extra;
      extra["step"] = step;
      extra["site"] = chosen;
      extra["site_xyz"] = {sites(chosen, 0), sites(chosen, 1),
                           sites.cols() > 2 ? sites(chosen, 2) : 0.0};
      extra["criterion"] = criterion;
      extra["tp"] = metrics.tp;
      extra["fp"] = metrics.fp;
      extra["y"] = std::vector<double>(y.data(), y.data() + y.size());
      result.posterior.save_stage(result.posterior.stage_count() - 1, *config.persist_dir,
                                  extra.dump());
    }
  }

  if (config.volume_samples > 0) {
    const Ensemble prior_ens =
        sample_prior(model, grid, config.volume_samples, config.seed ^ kEnsembleStream);
    const Ensemble post_ens = residual_update(prior_ens, result.stages, result.posterior,
                                              config.seed ^ kResidualStream);
    result.volumes = volume_distribution(post_ens, config.threshold, grid);
  }
  return result;
}

LimitingDistribution limiting_distribution(const PriorModel& model, const Grid& grid,
                                           const ChunkPlan& plan, const Operator& all_ops,
                                           double tau2, const Vector& truth, double threshold,
                                           std::uint64_t seed, Index batch_size) {
  if (batch_size < 1) throw ConfigError("limiting_distribution: batch size must be >= 1");
  constexpr std::uint64_t kLimitNoise = stream_id("limiting-observation-noise");

  ImplicitPosterior post(model, grid, plan);
  const Index p_total = all_ops.rows();
  for (Index begin = 0; begin < p_total; begin += batch_size) {
    const Index rows = std::min(batch_size, p_total - begin);
    Operator batch;
    batch.kind = all_ops.kind;
    batch.mat = all_ops.mat.middleRows(begin, rows);
    Vector y = batch.mat * truth;
    if (tau2 > 0.0) {
      const double tau = std::sqrt(tau2);
      // Noise indexed by global row so batching does not change the data.
      for (Index r = 0; r < rows; ++r) {
        NormalStream noise(seed, kLimitNoise ^ static_cast<std::uint64_t>(begin + r));
        y[r] += tau * noise.next();
      }
    }
    post.assimilate(make_stage(std::move(batch), std::move(y), tau2));
  }

  LimitingDistribution out{post.variance_diag(), {}};
  out.coverage = coverage(post.mean(), out.variance, threshold, grid.cell_volume,
                          model.kernel.sigma0);
  return out;
}

}  // namespace seqgp
