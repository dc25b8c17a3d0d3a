#include "seqgp/commands.hpp"

#include "seqgp/hyper.hpp"
#include "seqgp/manifest.hpp"
#include "seqgp/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace seqgp {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTruthStream = stream_id("ground-truth");

PriorModel model_from_config(const Config& config) {
  PriorModel model;
  model.kernel.family =
      kernel_family_from_string(config.get_str("kernel", "family", "matern32"));
  // Defaults are the fitted reference card shipped with the project.
  model.kernel.sigma0 = config.get_double("kernel", "sigma0", 284.65);
  model.kernel.lambda0 = config.get_double("kernel", "lambda0", 651.6);
  model.m0 = config.get_double("kernel", "m0", 2139.1);
  validate(model.kernel);
  return model;
}

Grid grid_from_config(const Config& config, int expected_dim) {
  const auto shape_raw = config.get_ints("grid", "shape");
  std::vector<Index> shape(shape_raw.begin(), shape_raw.end());
  const int dim = static_cast<int>(shape.size());
  if (expected_dim > 0 && dim != expected_dim)
    throw ConfigError("config: [grid] shape must have " + std::to_string(expected_dim) +
                      " entries for this command");
  std::vector<double> spacing(dim, 1.0), origin(dim, 0.0);
  if (config.has("grid", "spacing")) spacing = config.get_doubles("grid", "spacing");
  if (config.has("grid", "origin")) origin = config.get_doubles("grid", "origin");
  return build_grid(dim, shape, spacing, origin);
}

ChunkPlan plan_from_config(const Config& config, const Grid& grid) {
  const Index chunk = config.get_int("grid", "chunk_size", kDefaultChunkSize);
  return plan_chunks(grid, chunk);
}

double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  for (std::uint64_t i = index + 1; i > 0; i /= base) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
  }
  return r;
}

}  // namespace

std::vector<std::pair<int, int>> fourier_frequency_order(Index big_m, Index count) {
  std::vector<std::pair<int, int>> all;
  all.reserve(static_cast<std::size_t>(big_m * big_m));
  for (int u = 1; u <= big_m; ++u)
    for (int v = 1; v <= big_m; ++v) all.emplace_back(u, v);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    const int na = std::max(a.first, a.second);
    const int nb = std::max(b.first, b.second);
    if (na != nb) return na < nb;
    return a < b;
  });

  const auto conjugate = [big_m](const std::pair<int, int>& f) {
    const int cu = f.first == big_m ? static_cast<int>(big_m) : static_cast<int>(big_m) - f.first;
    const int cv = f.second == big_m ? static_cast<int>(big_m) : static_cast<int>(big_m) - f.second;
    return std::make_pair(cu, cv);
  };

  std::vector<std::pair<int, int>> out;
  std::set<std::pair<int, int>> emitted;
  for (const auto& f : all) {
    if (static_cast<Index>(out.size()) >= count) break;
    if (emitted.count(conjugate(f))) continue;
    emitted.insert(f);
    out.push_back(f);
  }
  return out;
}

std::vector<Index> space_filling_sites(const Grid& grid2d, Index count) {
  if (grid2d.dim != 2) throw ConfigError("space_filling_sites: grid must be 2D");
  std::vector<Index> sites;
  std::set<Index> taken;
  std::uint64_t h = 0;
  while (static_cast<Index>(sites.size()) < count) {
    const auto i0 = static_cast<Index>(halton(h, 2) * static_cast<double>(grid2d.shape[0]));
    const auto i1 = static_cast<Index>(halton(h, 3) * static_cast<double>(grid2d.shape[1]));
    ++h;
    const Index flat = grid2d.flat_index({std::min(i0, grid2d.shape[0] - 1),
                                          std::min(i1, grid2d.shape[1] - 1), 0});
    if (taken.insert(flat).second) sites.push_back(flat);
    if (h > static_cast<std::uint64_t>(grid2d.size()) * 64)
      throw ConfigError("space_filling_sites: requested more sites than grid cells");
  }
  return sites;
}

Matrix default_surface_sites(const Grid& grid3d, double standoff) {
  if (grid3d.dim != 3) throw ConfigError("default_surface_sites: grid must be 3D");
  const Index nx = grid3d.shape[0], ny = grid3d.shape[1], nz = grid3d.shape[2];
  const double z_top = grid3d.origin[2] + static_cast<double>(nz - 1) * grid3d.spacing[2] +
                       0.5 * grid3d.spacing[2] + standoff;
  Matrix sites(nx * ny, 3);
  Index row = 0;
  for (Index ix = 0; ix < nx; ++ix)
    for (Index iy = 0; iy < ny; ++iy, ++row) {
      sites(row, 0) = grid3d.origin[0] + static_cast<double>(ix) * grid3d.spacing[0];
      sites(row, 1) = grid3d.origin[1] + static_cast<double>(iy) * grid3d.spacing[1];
      sites(row, 2) = z_top;
    }
  return sites;
}

Matrix load_sites_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open site file " + path.string());
  std::vector<std::array<double, 3>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    for (auto& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    double x, y, z;
    if (ls >> x >> y >> z) rows.push_back({x, y, z});
  }
  if (rows.empty()) throw ConfigError("site file " + path.string() + " holds no sites");
  Matrix sites(static_cast<Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < 3; ++k) sites(static_cast<Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
  return dedup_sites(sites);
}

// ---------------------------------------------------------------------------
// fourier-demo

void cmd_fourier_demo(const Config& config, const CommandOptions& options) {
  const Index big_m = config.get_int("fourier", "M");
  if (big_m < 2) throw ConfigError("fourier-demo: M must be >= 2");

  // Default domain [-1, 1]^2, M points per axis.
  std::vector<double> spacing{2.0 / static_cast<double>(big_m - 1),
                              2.0 / static_cast<double>(big_m - 1)};
  std::vector<double> origin{-1.0, -1.0};
  Config grid_config = config;
  if (!config.has("grid", "shape"))
    grid_config.set("grid", "shape", std::to_string(big_m) + " " + std::to_string(big_m));
  if (!config.has("grid", "spacing"))
    grid_config.set("grid", "spacing", format_g17(spacing[0]) + " " + format_g17(spacing[1]));
  if (!config.has("grid", "origin"))
    grid_config.set("grid", "origin", format_g17(origin[0]) + " " + format_g17(origin[1]));
  const Grid grid = grid_from_config(grid_config, 2);
  if (grid.shape[0] != big_m || grid.shape[1] != big_m)
    throw ConfigError("fourier-demo: [grid] shape must be M x M");
  const ChunkPlan plan = plan_from_config(config, grid);

  PriorModel model;
  model.kernel.family = kernel_family_from_string(config.get_str("kernel", "family", "matern52"));
  model.kernel.sigma0 = config.get_double("kernel", "sigma0", 1.0);
  model.kernel.lambda0 = config.get_double("kernel", "lambda0", 0.5);
  model.m0 = config.get_double("kernel", "m0", 0.0);
  validate(model.kernel);

  std::vector<std::int64_t> checkpoints{10, 50, 100};
  if (config.has("fourier", "n_values")) checkpoints = config.get_ints("fourier", "n_values");
  std::sort(checkpoints.begin(), checkpoints.end());
  if (checkpoints.empty() || checkpoints.front() < 1)
    throw ConfigError("fourier-demo: n_values must be positive");
  const Index n_max = checkpoints.back();

  const double noise_std = config.get_double("fourier", "noise_std", 0.0);
  const double tau2 = noise_std * noise_std;

  const Index m = grid.size();

  // Memory plan: the run must never materialize an m x m matrix. The
  // explicit posterior covariance is recorded for comparison only.
  const std::size_t workset = prior_covmul_workset_bytes(plan, 2 * n_max);
  if (workset > memory_budget())
    throw BudgetError("fourier-demo: chunk working set exceeds the memory budget");
  const std::uint64_t explicit_bytes =
      static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(m) * 4;

  std::filesystem::create_directories(options.out_dir);
  RunManifest manifest = RunManifest::create("fourier-demo", config, options.seed);
  manifest.set_grid(grid);
  manifest.set_kernel(model);
  manifest.doc["explicit_covariance_bytes"] = explicit_bytes;
  manifest.doc["chunk_workset_bytes"] = workset;
  manifest.doc["validate_only"] = options.validate_only;
  manifest.write(options.out_dir / "manifest.json");

  if (options.validate_only) return;

  // Ground-truth sampling factors the prior densely; that is the only step
  // with a quadratic footprint, and it is budget-checked inside.
  const Ensemble truth_ens = sample_prior(model, grid, 1, options.seed ^ kTruthStream);
  const Vector truth = truth_ens.samples.col(0);
  write_grid_csv(options.out_dir / "ground_truth.csv", truth, big_m, big_m);
  manifest.add_output("ground_truth.csv");

  const auto freqs = fourier_frequency_order(big_m, n_max);
  const auto pointwise_sites = space_filling_sites(grid, std::min(n_max, m));

  for (const std::string design : {"fourier", "pointwise"}) {
    ImplicitPosterior post(model, grid, plan);
    Index assimilated = 0;
    for (const auto checkpoint : checkpoints) {
      const Index target = std::min<Index>(
          checkpoint, design == "fourier" ? static_cast<Index>(freqs.size())
                                          : static_cast<Index>(pointwise_sites.size()));
      if (target > assimilated) {
        Operator op;
        if (design == "fourier") {
          const std::vector<std::pair<int, int>> batch(freqs.begin() + assimilated,
                                                       freqs.begin() + target);
          op = dft_operator(grid, batch);
          // Self-conjugate frequencies carry an identically-zero imaginary
          // row (up to roundoff); with tau = 0 those rows are pure rank
          // deficiency, so they are dropped here.
          std::vector<Index> keep;
          for (Index r = 0; r < op.rows(); ++r)
            if (op.mat.row(r).norm() > 1e-9 * std::sqrt(static_cast<double>(m))) keep.push_back(r);
          Operator filtered;
          filtered.kind = op.kind;
          filtered.mat.resize(static_cast<Index>(keep.size()), m);
          for (std::size_t r = 0; r < keep.size(); ++r) {
            filtered.mat.row(static_cast<Index>(r)) = op.mat.row(keep[r]);
            filtered.labels.push_back(op.labels[static_cast<std::size_t>(keep[r])]);
          }
          op = std::move(filtered);
        } else {
          const std::vector<Index> batch(pointwise_sites.begin() + assimilated,
                                         pointwise_sites.begin() + target);
          op = pointwise_operator(grid, batch);
        }
        Vector y = op.mat * truth;
        if (tau2 > 0.0) {
          NormalStream noise(options.seed, stream_id("fourier-noise") ^
                                               static_cast<std::uint64_t>(assimilated));
          for (Index r = 0; r < y.size(); ++r) y[r] += noise_std * noise.next();
        }
        post.assimilate(make_stage(std::move(op), std::move(y), tau2));
        manifest.log_stage(design, target - assimilated, tau2);
        assimilated = target;
      }

      const Vector var = post.variance_diag();
      const Vector sd = var.cwiseMax(0.0).cwiseSqrt();
      const std::string mean_name =
          "mean_" + design + "_" + std::to_string(checkpoint) + ".csv";
      const std::string sd_name = "std_" + design + "_" + std::to_string(checkpoint) + ".csv";
      write_grid_csv(options.out_dir / mean_name, post.mean(), big_m, big_m);
      write_grid_csv(options.out_dir / sd_name, sd, big_m, big_m);
      manifest.add_output(mean_name);
      manifest.add_output(sd_name);
    }
    manifest.doc["storage_bytes_" + design] = post.storage_bytes(8);
  }

  manifest.write(options.out_dir / "manifest.json");
}

// ---------------------------------------------------------------------------
// grav-campaign

namespace {

int count_persisted_stages(const std::filesystem::path& dir) {
  int n = 0;
  while (std::filesystem::exists(dir / ("stage_" + std::to_string(n + 1)) / "meta.json")) ++n;
  return n;
}

}  // namespace

void cmd_grav_campaign(const Config& config, const CommandOptions& options) {
  const Grid grid = grid_from_config(config, 3);
  const ChunkPlan plan = plan_from_config(config, grid);
  const PriorModel model = model_from_config(config);

  CampaignConfig campaign;
  campaign.seed = options.seed;
  campaign.n_steps = static_cast<int>(config.get_int("campaign", "n_steps"));
  if (campaign.n_steps < 0) throw ConfigError("grav-campaign: n_steps must be >= 0");
  const double noise_std = config.get_double("campaign", "noise_std", 0.1);
  campaign.tau2 = noise_std * noise_std;
  campaign.candidate_radius = config.get_double("campaign", "radius", 150.0);
  campaign.volume_samples = config.get_int("campaign", "volume_samples", 0);

  if (config.has("campaign", "threshold"))
    campaign.threshold = config.get_double("campaign", "threshold");
  else if (config.has("campaign", "threshold_quantile"))
    campaign.threshold =
        model.m0 + model.kernel.sigma0 *
                       normal_quantile(config.get_double("campaign", "threshold_quantile"));
  else
    throw ConfigError("grav-campaign: set [campaign] threshold or threshold_quantile");

  const std::string weight_mode = config.get_str("campaign", "weight_mode", "coverage");
  if (weight_mode == "coverage")
    campaign.weight_mode = WeightMode::Coverage;
  else if (weight_mode == "uniform")
    campaign.weight_mode = WeightMode::Uniform;
  else
    throw ConfigError("grav-campaign: unknown weight_mode '" + weight_mode + "'");

  const std::string strategy = config.get_str("campaign", "strategy", "wivr");
  if (strategy == "wivr")
    campaign.strategy = Strategy::Wivr;
  else if (strategy == "random")
    campaign.strategy = Strategy::RandomWalk;
  else if (strategy == "static")
    campaign.strategy = Strategy::Static;
  else
    throw ConfigError("grav-campaign: unknown strategy '" + strategy + "'");
  if (campaign.strategy == Strategy::Static) {
    const auto raw = config.get_ints("campaign", "static_design");
    campaign.static_design.assign(raw.begin(), raw.end());
  }

  Matrix sites;
  if (config.has("campaign", "sites_file"))
    sites = load_sites_csv(config.get_str("campaign", "sites_file"));
  else
    sites = default_surface_sites(grid, config.get_double("campaign", "station_standoff", 1.0));
  campaign.start_site = config.get_int("campaign", "start_site", 0);

  std::filesystem::create_directories(options.out_dir);
  campaign.persist_dir = options.out_dir;

  RunManifest manifest = RunManifest::create("grav-campaign", config, options.seed);
  manifest.set_grid(grid);
  manifest.set_kernel(model);
  manifest.doc["threshold"] = campaign.threshold;
  manifest.doc["n_sites"] = sites.rows();
  manifest.write(options.out_dir / "manifest.json");

  const GravityConfig gravity;
  const Operator site_op = gravity_operator(grid, sites, gravity);
  const Ensemble truth_ens = sample_prior(model, grid, 1, options.seed ^ kTruthStream);
  const Vector truth = truth_ens.samples.col(0);

  int resume_from = 0;
  if (options.resume) {
    resume_from = std::min(count_persisted_stages(options.out_dir), campaign.n_steps);
    const RunManifest previous = RunManifest::read(options.out_dir / "manifest.json");
    if (previous.doc.value("seed", options.seed) != options.seed)
      throw ConfigError("grav-campaign: resume seed differs from the persisted run");
  }

  const CampaignResult result =
      run_campaign(model, grid, plan, sites, site_op, truth, campaign, resume_from);

  for (const auto& stage : result.stages) manifest.log_stage(stage.op.kind, stage.op.rows(), stage.tau2);
  manifest.set_storage_bytes(result.posterior.storage_bytes(8));

  {
    std::vector<std::vector<double>> rows;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& log : result.trajectory) {
      const bool has_site = log.site >= 0;
      rows.push_back({static_cast<double>(log.step),
                      static_cast<double>(log.site),
                      has_site ? sites(log.site, 0) : nan,
                      has_site ? sites(log.site, 1) : nan,
                      has_site ? sites(log.site, 2) : nan,
                      log.criterion, log.tp, log.fp});
    }
    write_csv(options.out_dir / "trajectory.csv", "step,site,x,y,z,criterion,tp,fp", rows);
    manifest.add_output("trajectory.csv");
  }

  {
    const CoverageField field =
        coverage(result.posterior.mean(), result.posterior.variance_diag(), campaign.threshold,
                 grid.cell_volume, model.kernel.sigma0);
    write_indexed_csv(options.out_dir / "coverage.csv", field.p);
    manifest.add_output("coverage.csv");
    const auto [alpha, estimate] = vorobev_expectation(field);
    Vector mask(grid.size());
    for (Index i = 0; i < grid.size(); ++i) mask[i] = estimate.mask[static_cast<std::size_t>(i)];
    write_indexed_csv(options.out_dir / "vorobev_mask.csv", mask);
    manifest.add_output("vorobev_mask.csv");
    manifest.doc["vorobev_alpha"] = alpha;
    manifest.doc["expected_volume"] = expected_volume(field);
  }

  if (config.get_bool("campaign", "compute_limiting", true)) {
    const Index batch = config.get_int("campaign", "limiting_batch", 10);
    const LimitingDistribution limiting =
        limiting_distribution(model, grid, plan, site_op, campaign.tau2, truth,
                              campaign.threshold, options.seed, batch);
    write_indexed_csv(options.out_dir / "limiting_variance.csv", limiting.variance);
    write_indexed_csv(options.out_dir / "limiting_coverage.csv", limiting.coverage.p);
    manifest.add_output("limiting_variance.csv");
    manifest.add_output("limiting_coverage.csv");
  }

  if (campaign.volume_samples > 0) {
    std::vector<std::vector<double>> rows;
    for (double v : result.volumes.volumes) rows.push_back({v});
    write_csv(options.out_dir / "volume_distribution.csv", "volume", rows);
    manifest.add_output("volume_distribution.csv");
    manifest.doc["volume_quantiles"] = result.volumes.quantiles;
    manifest.doc["volume_mean"] = result.volumes.mean;
  }

  manifest.write(options.out_dir / "manifest.json");
}

// ---------------------------------------------------------------------------
// fit

void cmd_fit(const Config& config, const CommandOptions& options) {
  const Grid grid = grid_from_config(config, 0);
  const ChunkPlan plan = plan_from_config(config, grid);

  const KernelFamily family =
      kernel_family_from_string(config.get_str("fit", "family", "matern32"));
  auto lambda_grid = config.get_doubles("fit", "lambda_grid");
  const double sigma_init = config.get_double("fit", "sigma_init", 1.0);
  const int budget = static_cast<int>(config.get_int("fit", "budget", 200));
  const double noise_std = config.get_double("fit", "noise_std", 0.1);
  const double tau2 = noise_std * noise_std;

  // Synthetic data: draw a truth from the generating model and observe it at
  // seeded random grid points.
  PriorModel gen;
  gen.kernel.family = kernel_family_from_string(
      config.get_str("synthetic", "family", to_string(family)));
  gen.kernel.sigma0 = config.get_double("synthetic", "sigma0", 1.0);
  gen.kernel.lambda0 = config.get_double("synthetic", "lambda0", 1.0);
  gen.m0 = config.get_double("synthetic", "m0", 0.0);
  validate(gen.kernel);
  const Index n_obs = config.get_int("synthetic", "n_obs", std::min<Index>(grid.size(), 50));
  if (n_obs < 1 || n_obs > grid.size())
    throw ConfigError("fit: synthetic n_obs must be in 1..m");

  const Ensemble truth_ens = sample_prior(gen, grid, 1, options.seed ^ kTruthStream);
  std::vector<Index> obs_sites;
  {
    std::set<Index> taken;
    std::uint64_t counter = 0;
    while (static_cast<Index>(obs_sites.size()) < n_obs) {
      const Index site = static_cast<Index>(
          rng_index(options.seed, stream_id("fit-design"), counter++, grid.size()));
      if (taken.insert(site).second) obs_sites.push_back(site);
    }
  }
  Operator op = pointwise_operator(grid, obs_sites);
  Vector y = op.mat * truth_ens.samples.col(0);
  NormalStream noise(options.seed, stream_id("fit-noise"));
  for (Index i = 0; i < y.size(); ++i) y[i] += noise_std * noise.next();
  const DataStage data = make_stage(std::move(op), std::move(y), tau2);

  std::filesystem::create_directories(options.out_dir);
  RunManifest manifest = RunManifest::create("fit", config, options.seed);
  manifest.set_grid(grid);
  manifest.write(options.out_dir / "manifest.json");

  const FitResult result = fit(grid, plan, data, family, lambda_grid, sigma_init, budget);

  std::vector<std::vector<double>> rows;
  std::cout << "lambda0        sigma0         m0             nmll\n";
  for (const auto& record : result.records) {
    rows.push_back({record.lambda0, record.sigma0, record.m0, record.nmll,
                    record.converged ? 1.0 : 0.0});
    std::printf("%-14.6g %-14.6g %-14.6g %-14.6g%s\n", record.lambda0, record.sigma0, record.m0,
                record.nmll, record.converged ? "" : "  (not converged)");
  }
  write_csv(options.out_dir / "fit_records.csv", "lambda0,sigma0,m0,nmll,converged", rows);
  manifest.add_output("fit_records.csv");

  json best;
  best["lambda0"] = result.best.lambda0;
  best["sigma0"] = result.best.sigma0;
  best["m0"] = result.best.m0;
  best["nmll"] = result.best.nmll;
  atomic_write_text(options.out_dir / "fit_best.json", best.dump(2) + "\n");
  manifest.add_output("fit_best.json");
  manifest.write(options.out_dir / "manifest.json");
}

// ---------------------------------------------------------------------------
// sample

void cmd_sample(const Config& config, const CommandOptions& options) {
  const Index n = config.get_int("sample", "n", 0);
  if (n <= 0) throw ConfigError("ensemble size must be positive");

  const Grid grid = grid_from_config(config, 0);
  const ChunkPlan plan = plan_from_config(config, grid);
  const PriorModel model = model_from_config(config);

  std::filesystem::create_directories(options.out_dir);
  RunManifest manifest = RunManifest::create("sample", config, options.seed);
  manifest.set_grid(grid);
  manifest.set_kernel(model);
  manifest.write(options.out_dir / "manifest.json");

  Ensemble ens = sample_prior(model, grid, n, options.seed);

  // With a campaign run directory, transport the prior ensemble through the
  // persisted stage records (residual kriging) and report excursion volumes.
  if (config.has("sample", "run_dir")) {
    const std::filesystem::path run_dir = config.get_str("sample", "run_dir");
    const RunManifest run = RunManifest::read(run_dir / "manifest.json");
    const int n_stages = count_persisted_stages(run_dir);
    ImplicitPosterior post =
        ImplicitPosterior::load_stages(model, grid, plan, run_dir, n_stages);

    std::vector<DataStage> stages;
    const Config run_config = [&] {
      Config c;
      for (const auto& [section, entries] : run.doc.at("config").items())
        for (const auto& [key, value] : entries.items())
          c.set(section, key, value.get<std::string>());
      return c;
    }();
    Matrix sites;
    if (run_config.has("campaign", "sites_file"))
      sites = load_sites_csv(run_config.get_str("campaign", "sites_file"));
    else
      sites = default_surface_sites(
          grid, run_config.get_double("campaign", "station_standoff", 1.0));
    const Operator site_op = gravity_operator(grid, sites, GravityConfig{});
    const double noise_std = run_config.get_double("campaign", "noise_std", 0.1);
    for (int i = 1; i <= n_stages; ++i) {
      std::ifstream meta_in(run_dir / ("stage_" + std::to_string(i)) / "meta.json");
      const json meta = json::parse(meta_in);
      const Index site = meta.at("site").get<Index>();
      const auto yvals = meta.at("y").get<std::vector<double>>();
      Operator row;
      row.kind = site_op.kind;
      row.mat = site_op.mat.row(site);
      stages.push_back(make_stage(std::move(row),
                                  Eigen::Map<const Vector>(yvals.data(),
                                                           static_cast<Index>(yvals.size())),
                                  noise_std * noise_std));
    }
    ens = residual_update(ens, stages, post, options.seed ^ stream_id("sample-residual"));

    if (config.has("sample", "threshold") || run.doc.contains("threshold")) {
      const double threshold = config.has("sample", "threshold")
                                   ? config.get_double("sample", "threshold")
                                   : run.doc.at("threshold").get<double>();
      const VolumeDistribution dist = volume_distribution(ens, threshold, grid);
      std::vector<std::vector<double>> rows;
      for (double v : dist.volumes) rows.push_back({v});
      write_csv(options.out_dir / "volumes.csv", "volume", rows);
      manifest.add_output("volumes.csv");
      manifest.doc["volume_quantiles"] = dist.quantiles;
      manifest.doc["volume_mean"] = dist.mean;
    }
  }

  write_matrix(options.out_dir / "ensemble.bin", ens.samples);
  manifest.add_output("ensemble.bin");
  manifest.write(options.out_dir / "manifest.json");
}

}  // namespace seqgp
