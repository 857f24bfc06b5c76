// State, energy and model-interface types shared by every sampler.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace mahmc {

using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Raised when a model evaluation produces a value outside its contract
/// (non-finite potential, parameter outside its support, ...).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the integrator when the gradient stops being finite. Carries the
/// phase-space point at which it happened.
class IntegrationDivergence : public std::runtime_error {
 public:
  IntegrationDivergence(const std::string& what, Vector position, Vector momentum)
      : std::runtime_error(what),
        position_(std::move(position)),
        momentum_(std::move(momentum)) {}

  const Vector& position() const { return position_; }
  const Vector& momentum() const { return momentum_; }

 private:
  Vector position_;
  Vector momentum_;
};

/// A target pi(qH, qO) ~ exp(-U(qH, qO)) with continuous block qH and an
/// opaque block qO that is only touched through MH proposal families.
///
/// Proposal families are numbered 1..proposal_count(), matching the nonzero
/// entries of an update schedule.
template <class M>
concept TargetModel = requires(const M& model, const Vector& q, const typename M::Other& other,
                               int family, Rng& rng) {
  typename M::Other;
  { model.dimension() } -> std::convertible_to<int>;
  { model.potential(q, other) } -> std::convertible_to<double>;
  { model.gradient(q, other) } -> std::convertible_to<Vector>;
  { model.proposal_count() } -> std::convertible_to<int>;
  { model.propose(family, q, other, rng) } -> std::convertible_to<typename M::Other>;
  // log Q_family(to | q, from)
  { model.proposal_log_density(family, other, q, other) } -> std::convertible_to<double>;
};

/// Joint chain state s = (qH, pH, qO).
template <class Other>
struct HybridState {
  Vector position;
  Vector momentum;
  Other other;
};

/// A chain's starting (qH, qO); momentum is drawn by the kernels.
template <class Other>
struct StartPoint {
  Vector position;
  Other other;
};

/// Number of gradient evaluations performed. Monotone within a run.
struct GradientCounter {
  std::uint64_t count = 0;

  void reset() { count = 0; }
};

inline double kinetic_energy(const Vector& momentum) { return 0.5 * momentum.squaredNorm(); }

template <TargetModel M>
double total_energy(const HybridState<typename M::Other>& state, const M& model) {
  const double u = model.potential(state.position, state.other);
  if (std::isnan(u) || u == -std::numeric_limits<double>::infinity()) {
    throw ModelError("potential evaluated to " + std::to_string(u));
  }
  return u + kinetic_energy(state.momentum);
}

inline Vector standard_normal(int n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(n);
  for (int i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// alpha * p + sqrt(1 - alpha^2) * noise. alpha = 0 is a full refresh and
/// alpha = 1 leaves the momentum (and the rng) untouched.
inline Vector refresh_momentum(const Vector& momentum, double alpha, Rng& rng) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("refresh_momentum: alpha must lie in [0, 1]");
  }
  if (alpha == 1.0) return momentum;
  Vector noise = standard_normal(static_cast<int>(momentum.size()), rng);
  if (alpha == 0.0) return noise;
  return alpha * momentum + std::sqrt(1.0 - alpha * alpha) * noise;
}

/// Gradient of U(., other) at q, counted.
template <TargetModel M>
Vector counted_gradient(const M& model, const Vector& q, const typename M::Other& other,
                        GradientCounter& counter) {
  ++counter.count;
  return model.gradient(q, other);
}

/// Position and momentum with the gradient at the position, when known for
/// the current value of qO. Any change of qO must call invalidate().
struct PhasePoint {
  Vector position;
  Vector momentum;
  std::optional<Vector> gradient;

  void invalidate() { gradient.reset(); }
};

template <TargetModel M>
const Vector& ensure_gradient(PhasePoint& z, const M& model, const typename M::Other& other,
                              GradientCounter& counter) {
  if (!z.gradient) z.gradient = counted_gradient(model, z.position, other, counter);
  return *z.gradient;
}

}  // namespace mahmc
