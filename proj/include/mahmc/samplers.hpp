// Baseline kernels (HMC, MALA, MALA-P, MALA-PN) and within-Gibbs composition.
#pragma once

#include <mahmc/core.hpp>
#include <mahmc/integrators.hpp>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>

namespace mahmc {

/// Everything a chain carries between iterations. `slot` is only read by
/// MALA-PN; `phase.momentum` persists for MALA-P/PN and is overwritten by the
/// kernels that refresh it fully.
template <class Other>
struct ChainState {
  PhasePoint phase;
  Other other;
  double slot = 0.0;

  HybridState<Other> hybrid() const { return {phase.position, phase.momentum, other}; }
};

template <class Other>
ChainState<Other> make_chain_state(Vector position, Other other) {
  Vector momentum = Vector::Zero(position.size());
  return ChainState<Other>{PhasePoint{std::move(position), std::move(momentum), std::nullopt},
                           std::move(other), 0.0};
}

struct KernelStats {
  GradientCounter gradients;
  std::uint64_t proposals = 0;  // final qH accept/reject decisions
  std::uint64_t accepts = 0;
  std::uint64_t divergences = 0;
  std::uint64_t other_proposals = 0;  // qO MH updates, inside or outside trajectories
  std::uint64_t other_accepts = 0;

  double accept_rate() const {
    return proposals == 0 ? 0.0 : static_cast<double>(accepts) / static_cast<double>(proposals);
  }
};

struct BaselineConfig {
  double eps = 0.1;
  int steps = 1;  // L, HMC trajectory length
  int block = 1;  // N^L, MALA updates per qO update
  double alpha = 0.0;
  double delta = 0.0;

  void validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
    if (steps < 1 || block < 1) throw std::invalid_argument("L and N^L must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (!(delta >= 0.0)) throw std::invalid_argument("delta must be >= 0");
  }
};

namespace detail {

template <TargetModel M>
double energy_at(const PhasePoint& z, const M& model, const typename M::Other& other) {
  return model.potential(z.position, other) + kinetic_energy(z.momentum);
}

/// Runs multiple_leapfrogs on a copy of `start`; returns the end point and its
/// energy, +inf on divergence. The gradient at `start` is cached in place so a
/// rejection does not pay for it again.
template <TargetModel M>
std::pair<PhasePoint, double> propose_trajectory(PhasePoint& start, double eps, int steps,
                                                 const M& model, const typename M::Other& other,
                                                 KernelStats& stats) {
  ensure_gradient(start, model, other, stats.gradients);
  PhasePoint z = start;
  try {
    multiple_leapfrogs(z, eps, steps, model, other, stats.gradients);
    return {std::move(z), energy_at(z, model, other)};
  } catch (const IntegrationDivergence&) {
    ++stats.divergences;
    return {std::move(z), std::numeric_limits<double>::infinity()};
  }
}

}  // namespace detail

/// One HMC transition: fresh momentum, `steps` leapfrogs with negation and a
/// reversible correction. Divergent trajectories are rejected.
template <TargetModel M>
bool hmc_step(ChainState<typename M::Other>& state, double eps, int steps, const M& model,
              Rng& rng, KernelStats& stats) {
  PhasePoint start{state.phase.position,
                   standard_normal(static_cast<int>(state.phase.position.size()), rng),
                   std::move(state.phase.gradient)};
  const double e0 = detail::energy_at(start, model, state.other);
  auto [proposal, e] = detail::propose_trajectory(start, eps, steps, model, state.other, stats);
  const MhOutcome decision = mh_correction(e0, e, uniform01(rng));
  ++stats.proposals;
  if (decision.accepted) {
    ++stats.accepts;
    state.phase = std::move(proposal);
  } else {
    state.phase = std::move(start);
  }
  return decision.accepted;
}

/// MALA with partial momentum refreshment. Returns (q, -p): on accept the
/// motion continues, on reject it reverses.
template <TargetModel M>
bool mala_p_step(ChainState<typename M::Other>& state, double eps, double alpha, const M& model,
                 Rng& rng, KernelStats& stats) {
  PhasePoint start{state.phase.position, refresh_momentum(state.phase.momentum, alpha, rng),
                   std::move(state.phase.gradient)};
  const double e0 = detail::energy_at(start, model, state.other);
  auto [proposal, e] = detail::propose_trajectory(start, eps, 1, model, state.other, stats);
  const MhOutcome decision = mh_correction(e0, e, uniform01(rng));
  ++stats.proposals;
  if (decision.accepted) {
    ++stats.accepts;
    state.phase = std::move(proposal);
  } else {
    state.phase = std::move(start);
  }
  state.phase.momentum = -state.phase.momentum;
  return decision.accepted;
}

/// MALA-P with the persistent slot v replacing the fresh uniform; v is then
/// advanced by (v + 1 + delta) mod 2 - 1.
template <TargetModel M>
bool mala_pn_step(ChainState<typename M::Other>& state, double eps, double alpha, double delta,
                  const M& model, Rng& rng, KernelStats& stats) {
  if (!(state.slot >= -1.0 && state.slot < 1.0)) {
    throw std::invalid_argument("mala_pn_step: slot must lie in [-1, 1)");
  }
  PhasePoint start{state.phase.position, refresh_momentum(state.phase.momentum, alpha, rng),
                   std::move(state.phase.gradient)};
  const double e0 = detail::energy_at(start, model, state.other);
  auto [proposal, e] = detail::propose_trajectory(start, eps, 1, model, state.other, stats);
  const MhOutcome decision = mh_correction(e0, e, state.slot);
  ++stats.proposals;
  if (decision.accepted) {
    ++stats.accepts;
    state.phase = std::move(proposal);
  } else {
    state.phase = std::move(start);
  }
  state.phase.momentum = -state.phase.momentum;
  state.slot = advance_slot(decision.slot, delta);
  return decision.accepted;
}

/// log of the MH ratio for moving qO from `from` to `to` with proposal family
/// `family`, at fixed qH.
template <TargetModel M>
double other_log_ratio(const M& model, int family, const Vector& position,
                       const typename M::Other& from, const typename M::Other& to) {
  return -model.potential(position, to) + model.potential(position, from) +
         model.proposal_log_density(family, from, position, to) -
         model.proposal_log_density(family, to, position, from);
}

/// One Metropolis-Hastings update of qO per proposal family, in order.
/// Gibbs proposals always accept.
template <TargetModel M>
void update_other(ChainState<typename M::Other>& state, const M& model, Rng& rng,
                  KernelStats& stats) {
  for (int family = 1; family <= model.proposal_count(); ++family) {
    auto proposed = model.propose(family, state.phase.position, state.other, rng);
    const double log_ratio =
        other_log_ratio(model, family, state.phase.position, state.other, proposed);
    ++stats.other_proposals;
    if (uniform01(rng) <= std::exp(log_ratio)) {
      ++stats.other_accepts;
      state.other = std::move(proposed);
      state.phase.invalidate();
    }
  }
}

/// Alternates a qH kernel with a qO update; one call is one recorded sample.
template <class QhKernel, class QoUpdate>
class WithinGibbs {
 public:
  WithinGibbs(QhKernel qh, QoUpdate qo) : qh_(std::move(qh)), qo_(std::move(qo)) {}

  template <class State>
  void operator()(State& state, Rng& rng, KernelStats& stats) const {
    qh_(state, rng, stats);
    qo_(state, rng, stats);
  }

 private:
  QhKernel qh_;
  QoUpdate qo_;
};

template <class QhKernel, class QoUpdate>
WithinGibbs<QhKernel, QoUpdate> within_gibbs(QhKernel qh, QoUpdate qo) {
  return {std::move(qh), std::move(qo)};
}

// Building blocks for within_gibbs. Each keeps a pointer to the model.

template <TargetModel M>
auto hmc_kernel(const M& model, double eps, int steps) {
  return [&model, eps, steps](ChainState<typename M::Other>& s, Rng& rng, KernelStats& stats) {
    hmc_step(s, eps, steps, model, rng, stats);
  };
}

/// N^L MALA-P updates; alpha = 0 is plain MALA.
template <TargetModel M>
auto mala_p_kernel(const M& model, double eps, double alpha, int block) {
  return [&model, eps, alpha, block](ChainState<typename M::Other>& s, Rng& rng,
                                     KernelStats& stats) {
    for (int i = 0; i < block; ++i) mala_p_step(s, eps, alpha, model, rng, stats);
  };
}

template <TargetModel M>
auto mala_pn_kernel(const M& model, double eps, double alpha, double delta, int block) {
  return [&model, eps, alpha, delta, block](ChainState<typename M::Other>& s, Rng& rng,
                                            KernelStats& stats) {
    for (int i = 0; i < block; ++i) mala_pn_step(s, eps, alpha, delta, model, rng, stats);
  };
}

template <TargetModel M>
auto other_kernel(const M& model) {
  return [&model](ChainState<typename M::Other>& s, Rng& rng, KernelStats& stats) {
    update_other(s, model, rng, stats);
  };
}

inline auto no_update() {
  return [](auto&, Rng&, KernelStats&) {};
}

}  // namespace mahmc
