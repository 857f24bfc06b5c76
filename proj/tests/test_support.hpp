// Test-only models and independent oracles.
#pragma once

#include <mahmc/core.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace mahmc::testing {

/// U(q) = 0.5 q' q, no qO dynamics.
struct StdNormalModel {
  using Other = int;
  int n = 1;

  int dimension() const { return n; }
  double potential(const Vector& q, int) const { return 0.5 * q.squaredNorm(); }
  Vector gradient(const Vector& q, int) const { return q; }
  int proposal_count() const { return 0; }
  int propose(int, const Vector&, int, Rng&) const { throw std::logic_error("no proposals"); }
  double proposal_log_density(int, int, const Vector&, int) const { return 0.0; }
  StartPoint<int> initial_state(Rng& rng) const { return {standard_normal(n, rng), 0}; }
};

/// U = 0.
struct FreeParticleModel {
  using Other = int;
  int n = 1;

  int dimension() const { return n; }
  double potential(const Vector&, int) const { return 0.0; }
  Vector gradient(const Vector& q, int) const { return Vector::Zero(q.size()); }
  int proposal_count() const { return 0; }
  int propose(int, const Vector&, int o, Rng&) const { return o; }
  double proposal_log_density(int, int, const Vector&, int) const { return 0.0; }
};

/// Forwards to another model and counts gradient calls independently of the
/// samplers' GradientCounter.
template <class M>
struct InstrumentedModel {
  using Other = typename M::Other;
  const M* inner;
  mutable std::atomic<long> gradient_calls{0};

  explicit InstrumentedModel(const M& m) : inner(&m) {}

  int dimension() const { return inner->dimension(); }
  double potential(const Vector& q, const Other& o) const { return inner->potential(q, o); }
  Vector gradient(const Vector& q, const Other& o) const {
    ++gradient_calls;
    return inner->gradient(q, o);
  }
  int proposal_count() const { return inner->proposal_count(); }
  Other propose(int f, const Vector& q, const Other& o, Rng& rng) const { return inner->propose(f, q, o, rng); }
  double proposal_log_density(int f, const Other& to, const Vector& q, const Other& from) const {
    return inner->proposal_log_density(f, to, q, from);
  }
  StartPoint<Other> initial_state(Rng& rng) const { return inner->initial_state(rng); }
};

/// Central differences of the potential with step h.
template <class M>
Vector finite_difference_gradient(const M& model, const Vector& q, const typename M::Other& o,
                                  double h = 1e-5) {
  Vector g(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    Vector plus = q, minus = q;
    plus[i] += h;
    minus[i] -= h;
    g[i] = (model.potential(plus, o) - model.potential(minus, o)) / (2.0 * h);
  }
  return g;
}

/// Largest componentwise |a - b| / max(1, |a|, |b|).
inline double max_relative_difference(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace mahmc::testing
