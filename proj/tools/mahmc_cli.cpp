// Command-line front end: run one experiment, grid-search hyperparameters, or
// run a correctness suite.
#include <mahmc/harness.hpp>
#include <mahmc/verify.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

int print_checks(const std::vector<mahmc::verify::Check>& checks) {
  int failed = 0;
  for (const auto& c : checks) {
    std::printf("[%s] %s  (%s)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    if (!c.passed) ++failed;
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metropolis augmented HMC and within-Gibbs baselines"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run one experiment and write samples and a summary");
  std::string experiment = "mdc";
  std::string sampler = "hwg";
  std::optional<double> eps, alpha, delta;
  std::optional<int> steps, nl, nu;
  mahmc::ExperimentConfig cfg;
  std::string out_dir;
  std::string data_path = MAHMC_DEFAULT_DATA_PATH;
  run->add_option("--experiment", experiment, "mdc | blr | blr-prior | gmm")->required();
  run->add_option("--sampler", sampler, "malawg | hwg | malapwg | malapnwg | mahmcwg")->required();
  run->add_option("--eps", eps, "step size");
  run->add_option("--L", steps, "HMC leapfrog steps");
  run->add_option("--NL", nl, "leapfrogs per qO update");
  run->add_option("--NU", nu, "MAHMC update groups");
  run->add_option("--alpha", alpha, "partial refresh coefficient");
  run->add_option("--delta", delta, "non-reversible slot increment");
  run->add_option("--chains", cfg.chains)->capture_default_str();
  run->add_option("--draws", cfg.draws)->capture_default_str();
  run->add_option("--warmup", cfg.warmup)->capture_default_str();
  run->add_option("--seed", cfg.seed)->capture_default_str();
  run->add_option("--data", data_path, "WDBC csv")->capture_default_str();
  run->add_option("--out", out_dir, "output directory")->required();

  // grid
  auto* grid = app.add_subcommand("grid", "Grid search; writes grid.csv and best.json");
  std::string grid_file;
  grid->add_option("--experiment", experiment)->required();
  grid->add_option("--sampler", sampler)->required();
  grid->add_option("--grid-file", grid_file, "JSON object of candidate lists")->required();
  grid->add_option("--chains", cfg.chains)->capture_default_str();
  grid->add_option("--draws", cfg.draws)->capture_default_str();
  grid->add_option("--warmup", cfg.warmup)->capture_default_str();
  grid->add_option("--seed", cfg.seed)->capture_default_str();
  grid->add_option("--data", data_path)->capture_default_str();
  grid->add_option("--out", out_dir)->required();

  // verify
  auto* verify = app.add_subcommand("verify", "Run a correctness suite");
  std::string suite;
  std::uint64_t verify_seed = 1;
  verify->add_option("--suite", suite, "mdc | blr-prior | gmm | oracle")
      ->required()
      ->check(CLI::IsMember({"mdc", "blr-prior", "gmm", "oracle"}));
  verify->add_option("--seed", verify_seed)->capture_default_str();
  verify->add_option("--data", data_path)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run || *grid) {
      cfg.experiment = mahmc::parse_experiment(experiment);
      cfg.sampler = mahmc::parse_sampler(sampler);
      cfg.data_path = data_path;
      cfg.hp = mahmc::tuned_hyperparameters(cfg.experiment, cfg.sampler);
      if (eps) cfg.hp.eps = *eps;
      if (steps) cfg.hp.L = *steps;
      if (nl) cfg.hp.NL = *nl;
      if (nu) cfg.hp.NU = *nu;
      if (alpha) cfg.hp.alpha = *alpha;
      if (delta) cfg.hp.delta = *delta;
    }
    if (*run) {
      const mahmc::RunResult result = mahmc::run_experiment(cfg);
      mahmc::write_run(result, out_dir);
      std::cout << mahmc::summary_json(result).dump(2) << '\n';
      if (result.low_acceptance) std::cerr << "warning: acceptance rate below 1%\n";
      return 0;
    }
    if (*grid) {
      std::ifstream in(grid_file);
      if (!in) throw std::runtime_error("cannot open grid file " + grid_file);
      const auto g = mahmc::Grid::from_json(nlohmann::json::parse(in));
      const auto result = mahmc::grid_search(cfg, g, [](const mahmc::GridCell& c) {
        std::printf("eps=%g L=%d NL=%d NU=%d alpha=%g delta=%g  ess/grad=%.4g accept=%.3f\n", c.hp.eps,
                    c.hp.L, c.hp.NL, c.hp.NU, c.hp.alpha, c.hp.delta, c.report.ess_per_sample_per_grad,
                    c.report.accept_rate);
        std::fflush(stdout);
      });
      mahmc::write_grid(result, out_dir);
      const auto& best = result.cells[result.best];
      std::printf("best: eps=%g L=%d NL=%d NU=%d alpha=%g delta=%g  ess/grad=%.4g\n", best.hp.eps, best.hp.L,
                  best.hp.NL, best.hp.NU, best.hp.alpha, best.hp.delta, best.report.ess_per_sample_per_grad);
      return 0;
    }
    if (suite == "mdc") return print_checks(mahmc::verify::mdc_stationarity(verify_seed));
    if (suite == "blr-prior") return print_checks(mahmc::verify::blr_prior_stationarity(verify_seed));
    if (suite == "gmm") return print_checks(mahmc::verify::gmm_stationarity(verify_seed));
    return print_checks(mahmc::verify::oracle_suite(verify_seed, 1000, data_path));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
