// Correctness suites: stationarity of every sampler on targets with known
// marginals, and the path-ratio oracle on recorded MAHMC iterations.
#pragma once

#include <mahmc/diagnostics.hpp>
#include <mahmc/harness.hpp>
#include <mahmc/mahmc.hpp>
#include <mahmc/models/math.hpp>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

namespace mahmc::verify {

inline constexpr double kSignificance = 0.01;

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// KS test of one functional of a run against `cdf`, with the ESS of that
/// functional as the effective sample size.
inline KsResult ks_against(const RunResult& run, const std::string& functional,
                           const std::function<double(double)>& cdf) {
  const ChainMatrix& m = run.samples.at(functional);
  const EssEstimate ess = ess_bulk(m);
  return ks_test(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())), cdf,
                 ess.degenerate ? 1.0 : ess.value);
}

inline std::string describe(const KsResult& ks) {
  std::ostringstream s;
  s << "D=" << ks.statistic << " n_eff=" << ks.effective_size << " p=" << ks.p_value;
  return s.str();
}

inline ExperimentConfig suite_config(Experiment e, Sampler s, std::uint64_t seed, int draws) {
  ExperimentConfig cfg = tuned_config(e, s);
  cfg.seed = seed;
  cfg.draws = draws;
  return cfg;
}

/// u-marginal of every sampler against N(0, 1).
inline std::vector<Check> mdc_stationarity(std::uint64_t seed = 1, int draws = 20000) {
  std::vector<Check> out;
  for (Sampler s : kAllSamplers) {
    const RunResult run = run_experiment(suite_config(Experiment::mdc, s, seed, draws));
    const KsResult ks = ks_against(run, "u", [](double x) { return math::normal_cdf(x); });
    out.push_back({"mdc/" + to_string(s) + " u ~ N(0,1)", ks.p_value >= kSignificance, describe(ks)});
  }
  return out;
}

/// tau-marginal of every sampler on the prior-only model against
/// Gamma(1, scale 100).
inline std::vector<Check> blr_prior_stationarity(std::uint64_t seed = 1, int draws = 20000) {
  std::vector<Check> out;
  for (Sampler s : kAllSamplers) {
    const RunResult run = run_experiment(suite_config(Experiment::blr_prior, s, seed, draws));
    const KsResult ks = ks_against(run, "tau", [](double t) { return t <= 0.0 ? 0.0 : -std::expm1(-t / 100.0); });
    out.push_back({"blr-prior/" + to_string(s) + " tau ~ Gamma(1, 100)", ks.p_value >= kSignificance,
                   describe(ks)});
  }
  return out;
}

/// MAHMCwG with random-walk label moves inside the trajectory: x against the
/// mixture CDF, label frequencies within `freq_tol` of the weights.
inline std::vector<Check> gmm_stationarity(std::uint64_t seed = 1, int draws = 50000,
                                           double freq_tol = 0.01) {
  const Gmm1dModel model;
  const RunResult run = run_experiment(suite_config(Experiment::gmm, Sampler::mahmcwg, seed, draws));
  std::vector<Check> out;
  const KsResult ks = ks_against(run, "x", [&model](double x) { return model.marginal_cdf(x); });
  out.push_back({"gmm/mahmcwg x ~ mixture", ks.p_value >= kSignificance, describe(ks)});

  const ChainMatrix& z = run.samples.at("z");
  std::ostringstream detail;
  bool ok = true;
  for (int k = 0; k < model.components(); ++k) {
    const double freq = (z.array() == static_cast<double>(k)).cast<double>().mean();
    const double weight = model.weights()[static_cast<std::size_t>(k)];
    ok = ok && std::abs(freq - weight) <= freq_tol;
    detail << "z=" << k << ": " << freq << " vs " << weight << "  ";
  }
  detail << "rw accept=" << run.other_accept_rate;
  out.push_back({"gmm/mahmcwg z frequencies", ok, detail.str()});
  return out;
}

struct OracleStats {
  int iterations = 0;
  int compared = 0;        // non-divergent iterations checked
  int mh_steps = 0;
  int rejected_mh_steps = 0;
  int accepted_iterations = 0;
  double max_relative_error = 0.0;
};

inline double relative_error(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Runs `iterations` traced MAHMC steps from an exact start and compares the
/// tracked log acceptance ratio with the oracle's recomputation.
template <TargetModel M>
OracleStats oracle_run(const M& model, const SchedulePrior& prior, double eps, int iterations,
                       std::uint64_t seed) {
  Rng rng = chain_rng(seed, 0);
  auto start = model.initial_state(rng);
  auto state = make_chain_state(std::move(start.position), std::move(start.other));
  KernelStats stats;
  PathTrace<typename M::Other> trace;
  OracleStats out;
  for (int i = 0; i < iterations; ++i) {
    const MahmcStepResult step = mahmc_step(state, eps, prior, model, rng, stats, &trace);
    ++out.iterations;
    if (step.accepted) ++out.accepted_iterations;
    for (const auto& s : trace.steps) {
      if (s.update == 0) continue;
      ++out.mh_steps;
      if (!s.accepted) ++out.rejected_mh_steps;
    }
    if (trace.diverged) continue;
    ++out.compared;
    const double oracle = path_ratio_oracle(trace, prior, model);
    const double tracked = trace.schedule_log_ratio + trace.delta_energy;
    out.max_relative_error = std::max(out.max_relative_error, relative_error(oracle, tracked));
    const double full_oracle = (trace.initial_energy - trace.final_energy) + oracle;
    out.max_relative_error =
        std::max(out.max_relative_error, relative_error(full_oracle, trace.log_accept_ratio));
    // keep the chain exploring: an exterior qO update as in MAHMCwG
    update_other(state, model, rng, stats);
  }
  return out;
}

inline Check oracle_check(const std::string& name, const OracleStats& s, double tol = 1e-8,
                          bool require_rejections = false) {
  std::ostringstream d;
  d << "iterations=" << s.iterations << " compared=" << s.compared << " mh_steps=" << s.mh_steps
    << " rejected=" << s.rejected_mh_steps << " max_rel_err=" << s.max_relative_error;
  bool ok = s.compared >= 1000 && s.max_relative_error <= tol;
  if (require_rejections) ok = ok && s.rejected_mh_steps > 0;
  return {name, ok, d.str()};
}

inline std::vector<Check> oracle_suite(std::uint64_t seed = 1, int iterations = 1000,
                                       const std::string& data_path = MAHMC_DEFAULT_DATA_PATH) {
  std::vector<Check> out;
  {
    const MdcModel model;
    const DeterministicSchedule prior(10, 10);
    out.push_back(oracle_check("oracle/mdc deterministic(10,10)", oracle_run(model, prior, 0.04, iterations, seed)));
    const IidSchedule iid(40, {0.9, 0.1});
    out.push_back(oracle_check("oracle/mdc iid(40; 0.9,0.1)", oracle_run(model, iid, 0.035, iterations, seed)));
  }
  {
    const BlrModel model(load_wdbc(data_path));
    const DeterministicSchedule prior(2, 5);
    out.push_back(oracle_check("oracle/blr deterministic(2,5)", oracle_run(model, prior, 0.1, iterations, seed)));
  }
  {
    const Gmm1dModel model;
    const IidSchedule iid(20, {0.7, 0.3});
    out.push_back(oracle_check("oracle/gmm iid(20; 0.7,0.3)", oracle_run(model, iid, 0.3, iterations, seed),
                               1e-8, true));
    const DeterministicSchedule prior(5, 2);
    out.push_back(oracle_check("oracle/gmm deterministic(5,2)", oracle_run(model, prior, 0.3, iterations, seed),
                               1e-8, true));
  }
  return out;
}

}  // namespace mahmc::verify
