// seqgp: sequential Gaussian-process inversion engine.
//
// Subcommands: fourier-demo, grav-campaign, fit, sample. Exit codes:
//   0 ok, 2 config error, 3 numerical failure, 4 resource/budget violation.
#include "seqgp/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Matrix-free Gaussian process engine for sequential Bayesian inversion"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "run";
  std::uint64_t seed = 0;
  int threads = 1;
  std::uint64_t budget = std::uint64_t{1} << 30;
  bool validate_only = false;
  bool resume = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Configuration file (key-value or JSON)")
        ->required();
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--threads", threads, "Worker threads");
    cmd->add_option("--memory-budget", budget, "Memory budget in bytes");
  };

  auto* fourier = app.add_subcommand("fourier-demo", "2D Fourier/pointwise design comparison");
  add_common(fourier);
  fourier->add_flag("--validate-only", validate_only,
                    "Validate the config and memory plan, then stop");

  auto* campaign = app.add_subcommand("grav-campaign", "Synthetic gravimetric survey campaign");
  add_common(campaign);
  campaign->add_flag("--resume", resume, "Continue from persisted stage records");

  auto* fit = app.add_subcommand("fit", "Hyperparameter fit on synthetic data");
  add_common(fit);

  auto* sample = app.add_subcommand("sample", "Draw prior (or transported posterior) ensembles");
  add_common(sample);

  CLI11_PARSE(app, argc, argv);

  try {
    seqgp::set_num_threads(threads);
    seqgp::set_memory_budget(budget);
    const seqgp::Config config = seqgp::parse_config_file(config_path);
    seqgp::CommandOptions options;
    options.out_dir = out_dir;
    options.seed = seed;
    options.validate_only = validate_only;
    options.resume = resume;

    if (fourier->parsed()) seqgp::cmd_fourier_demo(config, options);
    if (campaign->parsed()) seqgp::cmd_grav_campaign(config, options);
    if (fit->parsed()) seqgp::cmd_fit(config, options);
    if (sample->parsed()) seqgp::cmd_sample(config, options);
  } catch (const seqgp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const seqgp::BudgetError& e) {
    std::cerr << "budget error: " << e.what() << "\n";
    return 4;
  } catch (const seqgp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
