// One-dimensional Gaussian mixture with the component label as qO:
//   z ~ Categorical(weights),  x | z ~ N(mean_z, sd_z^2).
// qH = x, qO = z (0-based). z moves by a symmetric +-1 random walk modulo K,
// which is a genuine Metropolis proposal and does get rejected.
#pragma once

#include <mahmc/core.hpp>
#include <mahmc/models/math.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace mahmc {

class Gmm1dModel {
 public:
  using Other = int;

  Gmm1dModel() : Gmm1dModel({0.3, 0.4, 0.3}, {-2.0, 0.0, 2.0}, {0.5, 0.5, 0.5}) {}

  Gmm1dModel(std::vector<double> weights, std::vector<double> means, std::vector<double> sds)
      : weights_(std::move(weights)), means_(std::move(means)), sds_(std::move(sds)) {
    const std::size_t k = weights_.size();
    if (k < 2) throw std::invalid_argument("Gmm1dModel: need at least two components");
    if (means_.size() != k || sds_.size() != k) {
      throw std::invalid_argument("Gmm1dModel: weights, means and sds must have equal length");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (!(weights_[i] > 0.0)) throw std::invalid_argument("Gmm1dModel: weights must be > 0");
      if (!(sds_[i] > 0.0)) throw std::invalid_argument("Gmm1dModel: sds must be > 0");
      total += weights_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("Gmm1dModel: weights must sum to 1");
  }

  int dimension() const { return 1; }
  int components() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& sds() const { return sds_; }

  /// -log weight_z + log sd_z + (x - mean_z)^2 / (2 sd_z^2)
  double potential(const Vector& q, int z) const {
    check(q, z);
    const auto k = static_cast<std::size_t>(z);
    const double r = (q[0] - means_[k]) / sds_[k];
    return -std::log(weights_[k]) + std::log(sds_[k]) + 0.5 * r * r;
  }

  Vector gradient(const Vector& q, int z) const {
    check(q, z);
    const auto k = static_cast<std::size_t>(z);
    Vector g(1);
    g[0] = (q[0] - means_[k]) / (sds_[k] * sds_[k]);
    return g;
  }

  int proposal_count() const { return 1; }

  int propose(int family, const Vector&, int z, Rng& rng) const {
    check_family(family);
    const int k = components();
    const int step = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
    return ((z + step) % k + k) % k;
  }

  double proposal_log_density(int family, int to, const Vector&, int from) const {
    check_family(family);
    const int k = components();
    double p = 0.0;
    if (to == (from + 1) % k) p += 0.5;
    if (to == (from - 1 + k) % k) p += 0.5;
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
  }

  /// Exact draw from the joint.
  StartPoint<Other> initial_state(Rng& rng) const {
    const int z = std::discrete_distribution<int>(weights_.begin(), weights_.end())(rng);
    const auto k = static_cast<std::size_t>(z);
    Vector q(1);
    q[0] = means_[k] + sds_[k] * std::normal_distribution<double>(0.0, 1.0)(rng);
    return {q, z};
  }

  /// Marginal CDF of x.
  double marginal_cdf(double x) const {
    double c = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      c += weights_[k] * math::normal_cdf(x, means_[k], sds_[k]);
    }
    return c;
  }

  /// Marginal density of x.
  double marginal_pdf(double x) const {
    double p = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      const double r = (x - means_[k]) / sds_[k];
      p += weights_[k] * std::exp(-0.5 * r * r) / (sds_[k] * std::sqrt(2.0 * std::numbers::pi));
    }
    return p;
  }

 private:
  void check(const Vector& q, int z) const {
    if (q.size() != 1) throw ModelError("Gmm1dModel: qH must have dimension 1");
    if (z < 0 || z >= components()) throw ModelError("Gmm1dModel: component index out of range");
  }

  static void check_family(int family) {
    if (family != 1) throw std::out_of_range("Gmm1dModel: unknown proposal family");
  }

  std::vector<double> weights_;
  std::vector<double> means_;
  std::vector<double> sds_;
};

}  // namespace mahmc
