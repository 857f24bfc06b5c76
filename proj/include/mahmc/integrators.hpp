// Leapfrog integration and the (non-)reversible Metropolis correction.
#pragma once

#include <mahmc/core.hpp>

#include <cmath>
#include <limits>

namespace mahmc {

namespace detail {

inline void check_finite_gradient(const PhasePoint& z) {
  if (!z.gradient->allFinite()) {
    throw IntegrationDivergence("leapfrog: non-finite gradient", z.position, z.momentum);
  }
}

}  // namespace detail

/// Half kick, drift, half kick. Costs one gradient evaluation when the
/// gradient at the starting point is cached, two otherwise.
template <TargetModel M>
void leapfrog(PhasePoint& z, double eps, const M& model, const typename M::Other& other,
              GradientCounter& counter) {
  if (!(eps >= 0.0)) throw std::invalid_argument("leapfrog: step size must be nonnegative");
  ensure_gradient(z, model, other, counter);
  detail::check_finite_gradient(z);
  z.momentum -= 0.5 * eps * *z.gradient;
  z.position += eps * z.momentum;
  z.gradient = counted_gradient(model, z.position, other, counter);
  detail::check_finite_gradient(z);
  z.momentum -= 0.5 * eps * *z.gradient;
}

/// Value-returning form; always evaluates the gradient twice.
template <TargetModel M>
std::pair<Vector, Vector> leapfrog(const Vector& position, const Vector& momentum, double eps,
                                   const M& model, const typename M::Other& other,
                                   GradientCounter& counter) {
  PhasePoint z{position, momentum, std::nullopt};
  leapfrog(z, eps, model, other, counter);
  return {std::move(z.position), std::move(z.momentum)};
}

/// `steps` leapfrog steps followed by momentum negation, which makes the map
/// an involution.
template <TargetModel M>
void multiple_leapfrogs(PhasePoint& z, double eps, int steps, const M& model,
                        const typename M::Other& other, GradientCounter& counter) {
  if (steps < 1) throw std::invalid_argument("multiple_leapfrogs: steps must be >= 1");
  for (int i = 0; i < steps; ++i) leapfrog(z, eps, model, other, counter);
  z.momentum = -z.momentum;
}

template <TargetModel M>
std::pair<Vector, Vector> multiple_leapfrogs(const Vector& position, const Vector& momentum,
                                             double eps, int steps, const M& model,
                                             const typename M::Other& other,
                                             GradientCounter& counter) {
  PhasePoint z{position, momentum, std::nullopt};
  multiple_leapfrogs(z, eps, steps, model, other, counter);
  return {std::move(z.position), std::move(z.momentum)};
}

struct MhOutcome {
  bool accepted;
  double slot;
};

/// Metropolis decision on a log acceptance ratio log(pi(s)/pi(s0) ...).
///
/// Accepts iff |v| <= exp(log_ratio), in which case v is rescaled by
/// exp(-log_ratio); a fresh Uniform(0,1) slot gives the ordinary reversible
/// decision. NaN and -inf ratios always reject.
inline MhOutcome mh_correction(double log_ratio, double slot) {
  if (std::isnan(log_ratio) || log_ratio == -std::numeric_limits<double>::infinity()) {
    return {false, slot};
  }
  if (std::abs(slot) <= std::exp(log_ratio)) {
    return {true, slot * std::exp(-log_ratio)};
  }
  return {false, slot};
}

/// Energy form: E0 is the energy at the start, E at the proposal.
inline MhOutcome mh_correction(double initial_energy, double proposed_energy, double slot) {
  if (!std::isfinite(proposed_energy)) return {false, slot};
  return mh_correction(initial_energy - proposed_energy, slot);
}

/// (v + 1 + delta) mod 2 - 1, landing in [-1, 1).
inline double advance_slot(double slot, double delta) {
  double shifted = std::fmod(slot + 1.0 + delta, 2.0);
  if (shifted < 0.0) shifted += 2.0;
  double out = shifted - 1.0;
  if (out >= 1.0) out = -1.0;
  return out;
}

}  // namespace mahmc
