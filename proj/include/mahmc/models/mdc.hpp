// Mixed discrete/continuous benchmark:
//   u ~ N(0, 1),  v | u ~ N(u, 0.04^2),  w_i | u ~ Bernoulli(1 / (1 + e^u)).
// qH = (u, v), qO = w. The u-marginal is exactly N(0, 1).
#pragma once

#include <mahmc/core.hpp>
#include <mahmc/models/math.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mahmc {

class MdcModel {
 public:
  using Other = std::vector<int>;

  explicit MdcModel(int indicators = 20, double sigma_v = 0.04)
      : indicators_(indicators), sigma_v_(sigma_v) {
    if (indicators < 0) throw std::invalid_argument("MdcModel: negative indicator count");
    if (!(sigma_v > 0.0)) throw std::invalid_argument("MdcModel: sigma_v must be > 0");
  }

  int dimension() const { return 2; }
  int indicators() const { return indicators_; }
  double sigma_v() const { return sigma_v_; }

  /// u^2/2 + (v-u)^2/(2 sigma^2) + sum_i [softplus(u) - (1 - w_i) u]
  double potential(const Vector& q, const Other& w) const {
    check(q, w);
    const double u = q[0];
    const double dv = q[1] - u;
    const int ones = count_ones(w);
    return 0.5 * u * u + dv * dv / (2.0 * sigma_v_ * sigma_v_) +
           indicators_ * math::softplus(u) - (indicators_ - ones) * u;
  }

  Vector gradient(const Vector& q, const Other& w) const {
    check(q, w);
    const double u = q[0];
    const double dv = (q[1] - u) / (sigma_v_ * sigma_v_);
    const int ones = count_ones(w);
    Vector g(2);
    g[0] = u - dv + indicators_ * math::sigmoid(u) - (indicators_ - ones);
    g[1] = dv;
    return g;
  }

  // A single proposal family: the exact conditional of all w_i given u.
  int proposal_count() const { return 1; }

  Other propose(int family, const Vector& q, const Other&, Rng& rng) const {
    check_family(family);
    return gibbs_w(q[0], rng);
  }

  double proposal_log_density(int family, const Other& to, const Vector& q, const Other&) const {
    check_family(family);
    const double u = q[0];
    const double log_one = -math::softplus(u);      // log P(w_i = 1 | u)
    const double log_zero = u - math::softplus(u);  // log P(w_i = 0 | u)
    const int ones = count_ones(to);
    return ones * log_one + (indicators_ - ones) * log_zero;
  }

  /// Independent draws w_i ~ Bernoulli(1 / (1 + e^u)).
  Other gibbs_w(double u, Rng& rng) const {
    std::bernoulli_distribution coin(math::sigmoid(-u));
    Other w(static_cast<std::size_t>(indicators_));
    for (auto& wi : w) wi = coin(rng) ? 1 : 0;
    return w;
  }

  /// Exact draw from the joint.
  StartPoint<Other> initial_state(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double u = normal(rng);
    const double v = u + sigma_v_ * normal(rng);
    Vector q(2);
    q << u, v;
    return {q, gibbs_w(u, rng)};
  }

 private:
  static int count_ones(const Other& w) {
    int ones = 0;
    for (int wi : w) ones += wi;
    return ones;
  }

  void check(const Vector& q, const Other& w) const {
    if (q.size() != 2) throw ModelError("MdcModel: qH must have dimension 2");
    if (static_cast<int>(w.size()) != indicators_) throw ModelError("MdcModel: wrong indicator count");
    for (int wi : w) {
      if (wi != 0 && wi != 1) throw ModelError("MdcModel: indicators must be 0 or 1");
    }
  }

  static void check_family(int family) {
    if (family != 1) throw std::out_of_range("MdcModel: unknown proposal family");
  }

  int indicators_;
  double sigma_v_;
};

}  // namespace mahmc
