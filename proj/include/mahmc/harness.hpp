// Seeded experiment execution, grid search and result files.
#pragma once

#include <mahmc/core.hpp>
#include <mahmc/diagnostics.hpp>
#include <mahmc/mahmc.hpp>
#include <mahmc/models/blr.hpp>
#include <mahmc/models/dataset.hpp>
#include <mahmc/models/gmm.hpp>
#include <mahmc/models/mdc.hpp>
#include <mahmc/samplers.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#ifndef MAHMC_DEFAULT_DATA_PATH
#define MAHMC_DEFAULT_DATA_PATH "data/wdbc.csv"
#endif

namespace mahmc {

enum class Experiment { mdc, blr, blr_prior, gmm };
enum class Sampler { malawg, hwg, malapwg, malapnwg, mahmcwg };

inline constexpr Sampler kAllSamplers[] = {Sampler::malawg, Sampler::hwg, Sampler::malapwg,
                                           Sampler::malapnwg, Sampler::mahmcwg};

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::mdc: return "mdc";
    case Experiment::blr: return "blr";
    case Experiment::blr_prior: return "blr-prior";
    case Experiment::gmm: return "gmm";
  }
  return "?";
}

inline std::string to_string(Sampler s) {
  switch (s) {
    case Sampler::malawg: return "malawg";
    case Sampler::hwg: return "hwg";
    case Sampler::malapwg: return "malapwg";
    case Sampler::malapnwg: return "malapnwg";
    case Sampler::mahmcwg: return "mahmcwg";
  }
  return "?";
}

inline Experiment parse_experiment(const std::string& name) {
  for (Experiment e : {Experiment::mdc, Experiment::blr, Experiment::blr_prior, Experiment::gmm}) {
    if (to_string(e) == name) return e;
  }
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

inline Sampler parse_sampler(const std::string& name) {
  for (Sampler s : kAllSamplers) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown sampler '" + name + "'");
}

/// Unused fields are ignored by samplers that do not read them:
/// L by HwG, NL by the MALA family and MAHMCwG, NU by MAHMCwG,
/// alpha by MALA-P(N)wG, delta by MALA-PNwG.
struct Hyperparameters {
  double eps = 0.1;
  int L = 1;
  int NL = 1;
  int NU = 1;
  double alpha = 0.0;
  double delta = 0.0;

  void validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
    if (L < 1 || NL < 1 || NU < 1) throw std::invalid_argument("L, NL and NU must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (!(delta >= 0.0)) throw std::invalid_argument("delta must be >= 0");
  }

  bool operator==(const Hyperparameters&) const = default;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::mdc;
  Sampler sampler = Sampler::hwg;
  Hyperparameters hp;
  int chains = 4;
  int draws = 20000;
  int warmup = 2000;
  std::uint64_t seed = 0;
  std::string data_path = MAHMC_DEFAULT_DATA_PATH;
  bool keep_positions = false;  // store every recorded qH draw

  void validate() const {
    hp.validate();
    if (chains < 2) throw std::invalid_argument("chains must be >= 2");
    if (draws < 1) throw std::invalid_argument("draws must be >= 1");
    if (warmup < 0) throw std::invalid_argument("warmup must be >= 0");
  }
};

/// Tuned settings: MDC and BLR from the original benchmark; GMM is our own.
inline Hyperparameters tuned_hyperparameters(Experiment e, Sampler s) {
  Hyperparameters hp;
  if (e == Experiment::mdc) {
    switch (s) {
      case Sampler::malawg: hp.NL = 10; hp.eps = 0.03; break;
      case Sampler::hwg: hp.L = 40; hp.eps = 0.035; break;
      case Sampler::malapwg: hp.NL = 10; hp.eps = 0.03; hp.alpha = 0.995; break;
      case Sampler::malapnwg: hp.NL = 10; hp.eps = 0.03; hp.alpha = 0.995; hp.delta = 0.01; break;
      case Sampler::mahmcwg: hp.NU = 10; hp.NL = 10; hp.eps = 0.04; break;
    }
    return hp;
  }
  if (e == Experiment::blr || e == Experiment::blr_prior) {
    hp.NL = 5;
    switch (s) {
      case Sampler::malawg: hp.eps = 0.11; break;
      case Sampler::hwg: hp.L = 10; hp.eps = 0.09; break;
      case Sampler::malapwg: hp.eps = 0.09; hp.alpha = 0.9; break;
      case Sampler::malapnwg: hp.eps = 0.1; hp.alpha = 0.9; hp.delta = 0.015; break;
      case Sampler::mahmcwg: hp.NU = 2; hp.eps = 0.1; break;
    }
    // Without data the precision tau ranges over [0, ~1000]; leapfrog needs
    // eps * sqrt(tau) < 2.
    if (e == Experiment::blr_prior) hp.eps *= 0.5;
    return hp;
  }
  // gmm
  switch (s) {
    case Sampler::malawg: hp.NL = 5; hp.eps = 0.3; break;
    case Sampler::hwg: hp.L = 10; hp.eps = 0.3; break;
    case Sampler::malapwg: hp.NL = 5; hp.eps = 0.3; hp.alpha = 0.9; break;
    case Sampler::malapnwg: hp.NL = 5; hp.eps = 0.3; hp.alpha = 0.9; hp.delta = 0.015; break;
    case Sampler::mahmcwg: hp.NU = 5; hp.NL = 2; hp.eps = 0.3; break;
  }
  return hp;
}

inline ExperimentConfig tuned_config(Experiment e, Sampler s) {
  ExperimentConfig c;
  c.experiment = e;
  c.sampler = s;
  c.hp = tuned_hyperparameters(e, s);
  return c;
}

struct RunResult {
  ExperimentConfig config;
  /// functional name -> chains x draws
  std::map<std::string, ChainMatrix> samples;
  std::string ess_functional;
  EfficiencyReport efficiency;
  EssEstimate ess;
  double other_accept_rate = 0.0;
  std::uint64_t divergences = 0;
  bool low_acceptance = false;  // accept rate below 1%
  double wall_seconds = 0.0;
  /// (chains * draws) x dim, chain-major; only when config.keep_positions.
  std::optional<Eigen::MatrixXd> positions;
};

/// Per-chain stream: seed_seq over (seed low word, seed high word, chain).
inline Rng chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain)};
  return Rng(seq);
}

template <TargetModel M>
using ChainKernel = std::function<void(ChainState<typename M::Other>&, Rng&, KernelStats&)>;

/// The within-Gibbs composite iteration for a sampler.
template <TargetModel M>
ChainKernel<M> make_kernel(Sampler sampler, const Hyperparameters& hp, const M& model) {
  hp.validate();
  switch (sampler) {
    case Sampler::malawg:
      return within_gibbs(mala_p_kernel(model, hp.eps, 0.0, hp.NL), other_kernel(model));
    case Sampler::hwg:
      return within_gibbs(hmc_kernel(model, hp.eps, hp.L), other_kernel(model));
    case Sampler::malapwg:
      return within_gibbs(mala_p_kernel(model, hp.eps, hp.alpha, hp.NL), other_kernel(model));
    case Sampler::malapnwg:
      return within_gibbs(mala_pn_kernel(model, hp.eps, hp.alpha, hp.delta, hp.NL),
                          other_kernel(model));
    case Sampler::mahmcwg:
      return within_gibbs(mahmc_kernel(model, MahmcConfig{hp.eps, hp.NU, hp.NL}),
                          other_kernel(model));
  }
  throw std::invalid_argument("make_kernel: unknown sampler");
}

template <TargetModel M>
struct Functional {
  std::string name;
  std::function<double(const M&, const ChainState<typename M::Other>&)> value;
};

namespace detail {

template <TargetModel M>
struct ChainOutput {
  std::vector<std::vector<double>> values;  // per functional
  std::vector<Vector> positions;
  KernelStats stats;
};

template <TargetModel M>
ChainOutput<M> run_chain(const M& model, const ChainKernel<M>& kernel,
                         const std::vector<Functional<M>>& functionals, const ExperimentConfig& cfg,
                         int chain) {
  Rng rng = chain_rng(cfg.seed, chain);
  auto start = model.initial_state(rng);
  ChainState<typename M::Other> state = make_chain_state(std::move(start.position), std::move(start.other));
  state.phase.momentum = standard_normal(model.dimension(), rng);
  state.slot = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);

  ChainOutput<M> out;
  for (int i = 0; i < cfg.warmup; ++i) kernel(state, rng, out.stats);
  out.stats = KernelStats{};

  out.values.assign(functionals.size(), std::vector<double>(static_cast<std::size_t>(cfg.draws)));
  if (cfg.keep_positions) out.positions.reserve(static_cast<std::size_t>(cfg.draws));
  for (int i = 0; i < cfg.draws; ++i) {
    kernel(state, rng, out.stats);
    for (std::size_t f = 0; f < functionals.size(); ++f) {
      out.values[f][static_cast<std::size_t>(i)] = functionals[f].value(model, state);
    }
    if (cfg.keep_positions) out.positions.push_back(state.phase.position);
  }
  return out;
}

}  // namespace detail

/// Runs `cfg.chains` independent chains in parallel and summarizes the
/// functional named `ess_functional`. Gradient counts cover recorded
/// iterations only.
template <TargetModel M>
RunResult run_chains(const M& model, const ExperimentConfig& cfg,
                     const std::vector<Functional<M>>& functionals, const std::string& ess_functional) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const ChainKernel<M> kernel = make_kernel(cfg.sampler, cfg.hp, model);

  std::vector<detail::ChainOutput<M>> outputs(static_cast<std::size_t>(cfg.chains));
  std::vector<std::exception_ptr> errors(outputs.size());
  {
    std::vector<std::jthread> workers;
    for (int c = 0; c < cfg.chains; ++c) {
      workers.emplace_back([&, c] {
        try {
          outputs[static_cast<std::size_t>(c)] = detail::run_chain(model, kernel, functionals, cfg, c);
        } catch (...) {
          errors[static_cast<std::size_t>(c)] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  RunResult result;
  result.config = cfg;
  result.ess_functional = ess_functional;
  KernelStats total;
  for (std::size_t f = 0; f < functionals.size(); ++f) {
    ChainMatrix m(cfg.chains, cfg.draws);
    for (int c = 0; c < cfg.chains; ++c) {
      const auto& v = outputs[static_cast<std::size_t>(c)].values[f];
      m.row(c) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    result.samples.emplace(functionals[f].name, std::move(m));
  }
  for (const auto& o : outputs) {
    total.gradients.count += o.stats.gradients.count;
    total.proposals += o.stats.proposals;
    total.accepts += o.stats.accepts;
    total.divergences += o.stats.divergences;
    total.other_proposals += o.stats.other_proposals;
    total.other_accepts += o.stats.other_accepts;
  }
  if (cfg.keep_positions) {
    Eigen::MatrixXd pos(static_cast<Eigen::Index>(cfg.chains) * cfg.draws, model.dimension());
    Eigen::Index row = 0;
    for (const auto& o : outputs) {
      for (const auto& p : o.positions) pos.row(row++) = p.transpose();
    }
    result.positions = std::move(pos);
  }

  const auto it = result.samples.find(ess_functional);
  if (it == result.samples.end()) throw std::invalid_argument("unknown ESS functional " + ess_functional);
  result.ess = ess_bulk(it->second);
  const std::uint64_t draws = static_cast<std::uint64_t>(cfg.chains) * static_cast<std::uint64_t>(cfg.draws);
  result.efficiency = efficiency(result.ess.value, draws, total.gradients.count, total.accept_rate());
  result.other_accept_rate =
      total.other_proposals == 0 ? 0.0
                                 : static_cast<double>(total.other_accepts) / static_cast<double>(total.other_proposals);
  result.divergences = total.divergences;
  result.low_acceptance = result.efficiency.accept_rate < 0.01;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Builds the model named by the config and runs it. Tracked functionals:
/// mdc: u (ESS), v; blr: potential (ESS), tau; blr-prior: tau (ESS),
/// potential; gmm: x (ESS), z.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.experiment) {
    case Experiment::mdc: {
      const MdcModel model;
      return run_chains<MdcModel>(model, cfg,
                                  {{"u", [](const MdcModel&, const auto& s) { return s.phase.position[0]; }},
                                   {"v", [](const MdcModel&, const auto& s) { return s.phase.position[1]; }}},
                                  "u");
    }
    case Experiment::blr:
    case Experiment::blr_prior: {
      const BlrModel model = cfg.experiment == Experiment::blr ? BlrModel(load_wdbc(cfg.data_path))
                                                               : BlrModel::prior_only();
      std::vector<Functional<BlrModel>> functionals = {
          {"potential", [](const BlrModel& m, const auto& s) { return m.potential(s.phase.position, s.other); }},
          {"tau", [](const BlrModel&, const auto& s) { return s.other; }}};
      return run_chains<BlrModel>(model, cfg, functionals,
                                  cfg.experiment == Experiment::blr ? "potential" : "tau");
    }
    case Experiment::gmm: {
      const Gmm1dModel model;
      return run_chains<Gmm1dModel>(
          model, cfg,
          {{"x", [](const Gmm1dModel&, const auto& s) { return s.phase.position[0]; }},
           {"z", [](const Gmm1dModel&, const auto& s) { return static_cast<double>(s.other); }}},
          "x");
    }
  }
  throw std::invalid_argument("run_experiment: unknown experiment");
}

// ---------------------------------------------------------------------------
// Result files

inline nlohmann::json to_json(const Hyperparameters& hp) {
  return {{"eps", hp.eps}, {"L", hp.L}, {"NL", hp.NL}, {"NU", hp.NU}, {"alpha", hp.alpha}, {"delta", hp.delta}};
}

inline nlohmann::json to_json(const EfficiencyReport& r) {
  return {{"ess_per_sample_per_grad", r.ess_per_sample_per_grad},
          {"raw_ess", r.raw_ess},
          {"grad_evals", r.grad_evals},
          {"draws", r.draws},
          {"accept_rate", r.accept_rate}};
}

inline EfficiencyReport efficiency_from_json(const nlohmann::json& j) {
  EfficiencyReport r;
  r.ess_per_sample_per_grad = j.at("ess_per_sample_per_grad").get<double>();
  r.raw_ess = j.at("raw_ess").get<double>();
  r.grad_evals = j.at("grad_evals").get<std::uint64_t>();
  r.draws = j.at("draws").get<std::uint64_t>();
  r.accept_rate = j.at("accept_rate").get<double>();
  return r;
}

inline nlohmann::json summary_json(const RunResult& r) {
  const auto& c = r.config;
  return {{"config",
           {{"experiment", to_string(c.experiment)},
            {"sampler", to_string(c.sampler)},
            {"hyperparameters", to_json(c.hp)},
            {"chains", c.chains},
            {"draws", c.draws},
            {"warmup", c.warmup}}},
          {"seed", c.seed},
          {"ess_functional", r.ess_functional},
          {"ess_degenerate", r.ess.degenerate},
          {"efficiency", to_json(r.efficiency)},
          {"other_accept_rate", r.other_accept_rate},
          {"divergences", r.divergences},
          {"low_acceptance", r.low_acceptance},
          {"wall_seconds", r.wall_seconds}};
}

inline std::string format_double(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

/// Writes samples_<functional>_chain<k>.csv (one value per line) and
/// summary.json into `dir`.
inline void write_run(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, m] : r.samples) {
    for (Eigen::Index c = 0; c < m.rows(); ++c) {
      std::ofstream out(dir / ("samples_" + name + "_chain" + std::to_string(c) + ".csv"));
      out << name << '\n';
      for (Eigen::Index i = 0; i < m.cols(); ++i) out << format_double(m(c, i)) << '\n';
    }
  }
  std::ofstream(dir / "summary.json") << summary_json(r).dump(2) << '\n';
}

inline EfficiencyReport read_summary(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("read_summary: cannot open " + file.string());
  return efficiency_from_json(nlohmann::json::parse(in).at("efficiency"));
}

// ---------------------------------------------------------------------------
// Grid search

/// Candidate values per hyperparameter; an empty list keeps the base value.
struct Grid {
  std::vector<double> eps, alpha, delta;
  std::vector<int> L, NL, NU;

  static Grid from_json(const nlohmann::json& j) {
    Grid g;
    auto read = [&j](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    read("eps", g.eps);
    read("alpha", g.alpha);
    read("delta", g.delta);
    read("L", g.L);
    read("NL", g.NL);
    read("NU", g.NU);
    return g;
  }

  std::vector<Hyperparameters> cells(const Hyperparameters& base) const {
    auto or_base = [](const auto& values, auto b) {
      using T = decltype(b);
      return values.empty() ? std::vector<T>{b} : std::vector<T>(values.begin(), values.end());
    };
    std::vector<Hyperparameters> out;
    for (double e : or_base(eps, base.eps))
      for (int l : or_base(L, base.L))
        for (int nl : or_base(NL, base.NL))
          for (int nu : or_base(NU, base.NU))
            for (double a : or_base(alpha, base.alpha))
              for (double d : or_base(delta, base.delta)) out.push_back({e, l, nl, nu, a, d});
    return out;
  }
};

struct GridCell {
  Hyperparameters hp;
  EfficiencyReport report;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t best = 0;
};

/// Every cell runs with the base config's seed, so cells share random
/// streams. The best cell maximizes ESS per sample per gradient.
inline GridResult grid_search(const ExperimentConfig& base, const Grid& grid,
                              const std::function<void(const GridCell&)>& on_cell = {}) {
  GridResult result;
  for (const Hyperparameters& hp : grid.cells(base.hp)) {
    ExperimentConfig cfg = base;
    cfg.hp = hp;
    cfg.keep_positions = false;
    const RunResult run = run_experiment(cfg);
    result.cells.push_back({hp, run.efficiency});
    if (on_cell) on_cell(result.cells.back());
  }
  if (result.cells.empty()) throw std::invalid_argument("grid_search: empty grid");
  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    if (result.cells[i].report.ess_per_sample_per_grad >
        result.cells[result.best].report.ess_per_sample_per_grad) {
      result.best = i;
    }
  }
  return result;
}

inline void write_grid(const GridResult& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream table(dir / "grid.csv");
  table << "eps,L,NL,NU,alpha,delta,ess_per_sample_per_grad,raw_ess,grad_evals,accept_rate\n";
  for (const auto& c : g.cells) {
    table << format_double(c.hp.eps) << ',' << c.hp.L << ',' << c.hp.NL << ',' << c.hp.NU << ','
          << format_double(c.hp.alpha) << ',' << format_double(c.hp.delta) << ','
          << format_double(c.report.ess_per_sample_per_grad) << ',' << format_double(c.report.raw_ess)
          << ',' << c.report.grad_evals << ',' << format_double(c.report.accept_rate) << '\n';
  }
  nlohmann::json best = {{"hyperparameters", to_json(g.cells[g.best].hp)},
                         {"efficiency", to_json(g.cells[g.best].report)}};
  std::ofstream(dir / "best.json") << best.dump(2) << '\n';
}

}  // namespace mahmc
