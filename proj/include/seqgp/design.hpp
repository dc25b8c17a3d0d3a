// Weighted-IVR criterion evaluation through the implicit engine, myopic
// sequential acquisition over neighborhood candidate sets, static replay,
// and the all-observations limiting distribution.
#pragma once

#include "seqgp/excursion.hpp"
#include "seqgp/implicit.hpp"
#include "seqgp/sampling.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace seqgp {

/// Weighted integrated variance reduction of one candidate observation:
/// with u = K^(n) G_s^T and s2 = G_s u + tau2, the criterion is
/// sum_x u_x^2 w_x / s2 * cell_volume. Independent of any data values.
double wivr(const ImplicitPosterior& post, const Operator& candidate, double tau2,
            const Vector& weight);

/// One value per row of `candidates`, sharing a single covmul batch.
Vector wivr_batch(const ImplicitPosterior& post, const Operator& candidates, double tau2,
                  const Vector& weight);

/// Unvisited surface sites within `radius` of the last site, ascending by
/// site index. An empty ball falls back to the nearest unvisited site; an
/// empty result means every site has been visited (campaign complete).
std::vector<Index> candidate_set(const Matrix& sites, const std::vector<std::uint8_t>& visited,
                                 Index last_site, double radius);

/// Removes exact duplicate rows, keeping first occurrences.
Matrix dedup_sites(const Matrix& sites);

enum class WeightMode { Coverage, Uniform };
enum class Strategy { Wivr, RandomWalk, Static };

struct CampaignConfig {
  double threshold = 0.0;
  double candidate_radius = 150.0;
  WeightMode weight_mode = WeightMode::Coverage;
  Strategy strategy = Strategy::Wivr;
  double tau2 = 0.01;  // observation noise variance (data units^2)
  Index start_site = 0;
  int n_steps = 0;
  std::uint64_t seed = 0;
  std::vector<Index> static_design;  // for Strategy::Static
  Index volume_samples = 0;          // 0 disables the end-of-run volume draw
  std::optional<std::filesystem::path> persist_dir;  // stage records + metas
};

struct StepLog {
  int step = 0;       // 0 is the prior baseline row
  Index site = -1;
  double criterion = 0.0;  // NaN when the strategy did not evaluate it
  double tp = 0.0;
  double fp = 0.0;
};

struct CampaignResult {
  std::vector<StepLog> trajectory;  // n_steps + 1 rows including baseline
  ImplicitPosterior posterior;
  std::vector<DataStage> stages;    // in assimilation order
  std::vector<Index> visited;       // site indices, in order
  VolumeDistribution volumes;       // empty unless volume_samples > 0
};

/// Myopic campaign over the surface sites: each step scores candidates with
/// wIVR under the current weight field, observes the chosen site on the
/// ground truth with fresh noise, assimilates, and logs Vorob'ev detection
/// metrics against the truth. `site_op` must hold one gravity row per site
/// (precompute with gravity_operator); `resume_from` replays already
/// persisted steps before continuing.
CampaignResult run_campaign(const PriorModel& model, const Grid& grid, const ChunkPlan& plan,
                            const Matrix& sites, const Operator& site_op, const Vector& truth,
                            const CampaignConfig& config, int resume_from = 0);

struct LimitingDistribution {
  Vector variance;
  CoverageField coverage;
};

/// Assimilates every row of `all_ops` (in batches) into a fresh posterior:
/// the floor of achievable residual uncertainty. Per-observation noise is
/// indexed by row, so the result does not depend on the batch size.
LimitingDistribution limiting_distribution(const PriorModel& model, const Grid& grid,
                                           const ChunkPlan& plan, const Operator& all_ops,
                                           double tau2, const Vector& truth, double threshold,
                                           std::uint64_t seed, Index batch_size);

}  // namespace seqgp
