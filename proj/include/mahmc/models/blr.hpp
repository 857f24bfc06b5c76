// Bayesian logistic regression with a conjugate Gamma prior on the precision:
//   tau ~ Gamma(shape a, scale s),  beta | tau ~ N(0, I / tau),
//   y_i ~ Bernoulli(sigmoid(x_i' beta)).
// qH = beta, qO = tau.
#pragma once

#include <mahmc/core.hpp>
#include <mahmc/models/dataset.hpp>
#include <mahmc/models/math.hpp>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace mahmc {

class BlrModel {
 public:
  using Other = double;

  /// Posterior given data.
  BlrModel(Eigen::MatrixXd features, Eigen::VectorXd targets, double prior_shape = 1.0,
           double prior_scale = 100.0)
      : dim_(static_cast<int>(features.cols())),
        shape_(prior_shape),
        rate_(1.0 / prior_scale),
        features_(std::move(features)),
        targets_(std::move(targets)) {
    if (features_->rows() != targets_->size()) {
      throw std::invalid_argument("BlrModel: feature and target row counts differ");
    }
    validate_prior();
  }

  explicit BlrModel(const Dataset& data, double prior_shape = 1.0, double prior_scale = 100.0)
      : BlrModel(data.features, data.targets, prior_shape, prior_scale) {}

  /// The prior alone: no likelihood terms.
  static BlrModel prior_only(int dimension = 31, double prior_shape = 1.0,
                             double prior_scale = 100.0) {
    return BlrModel(dimension, prior_shape, prior_scale);
  }

  int dimension() const { return dim_; }
  bool has_data() const { return features_.has_value(); }
  const Eigen::MatrixXd& features() const { return *features_; }
  const Eigen::VectorXd& targets() const { return *targets_; }
  double prior_shape() const { return shape_; }
  double prior_rate() const { return rate_; }

  /// tau |beta|^2 / 2 - (d/2) log tau + rate tau - (shape - 1) log tau
  ///   + sum_i [softplus(x_i' beta) - y_i x_i' beta]
  double potential(const Vector& beta, double tau) const {
    check(beta, tau);
    double u = 0.5 * tau * beta.squaredNorm() - (0.5 * dim_ + shape_ - 1.0) * std::log(tau) +
               rate_ * tau;
    if (features_) {
      const Vector eta = *features_ * beta;
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        u += math::softplus(eta[i]) - (*targets_)[i] * eta[i];
      }
    }
    return u;
  }

  Vector gradient(const Vector& beta, double tau) const {
    check(beta, tau);
    Vector g = tau * beta;
    if (features_) {
      Vector residual = *features_ * beta;
      for (Eigen::Index i = 0; i < residual.size(); ++i) {
        residual[i] = math::sigmoid(residual[i]) - (*targets_)[i];
      }
      g.noalias() += features_->transpose() * residual;
    }
    return g;
  }

  int proposal_count() const { return 1; }

  double propose(int family, const Vector& beta, double, Rng& rng) const {
    check_family(family);
    return gibbs_tau(beta, rng);
  }

  double proposal_log_density(int family, double to, const Vector& beta, double) const {
    check_family(family);
    if (!(to > 0.0)) return -std::numeric_limits<double>::infinity();
    const double a = conditional_shape();
    const double b = conditional_rate(beta);
    return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(to) - b * to;
  }

  double conditional_shape() const { return shape_ + 0.5 * dim_; }
  double conditional_rate(const Vector& beta) const { return rate_ + 0.5 * beta.squaredNorm(); }

  /// tau | beta ~ Gamma(shape + d/2, rate + |beta|^2 / 2).
  double gibbs_tau(const Vector& beta, Rng& rng) const {
    std::gamma_distribution<double> gamma(conditional_shape(), 1.0 / conditional_rate(beta));
    double tau = gamma(rng);
    // Underflow to 0 is possible only for absurd |beta|.
    return tau > 0.0 ? tau : std::numeric_limits<double>::min();
  }

  /// Exact prior draw for the prior-only model. With data, a draw from the
  /// Laplace approximation at the joint mode, then tau from its conditional.
  StartPoint<Other> initial_state(Rng& rng) const {
    if (!features_) {
      std::gamma_distribution<double> gamma(shape_, 1.0 / rate_);
      double tau = gamma(rng);
      if (!(tau > 0.0)) tau = std::numeric_limits<double>::min();
      Vector beta = standard_normal(dim_, rng) / std::sqrt(tau);
      return {beta, tau};
    }
    auto [beta, tau] = mode();
    const Eigen::LLT<Eigen::MatrixXd> llt(hessian(beta, tau));
    beta += llt.matrixU().solve(standard_normal(dim_, rng));
    return {beta, gibbs_tau(beta, rng)};
  }

  /// Joint mode by alternating a Newton step in beta with the conditional
  /// mode of tau.
  std::pair<Vector, double> mode(int iterations = 50) const {
    Vector beta = Vector::Zero(dim_);
    double tau = 1.0;
    for (int i = 0; i < iterations; ++i) {
      tau = std::max(conditional_shape() - 1.0, 1e-3) / conditional_rate(beta);
      beta -= hessian(beta, tau).llt().solve(gradient(beta, tau));
    }
    return {beta, tau};
  }

  /// d^2 U / d beta^2 = X' diag(s (1 - s)) X + tau I
  Eigen::MatrixXd hessian(const Vector& beta, double tau) const {
    check(beta, tau);
    Eigen::MatrixXd h = tau * Eigen::MatrixXd::Identity(dim_, dim_);
    if (features_) {
      const Vector eta = *features_ * beta;
      Vector w(eta.size());
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double s = math::sigmoid(eta[i]);
        w[i] = s * (1.0 - s);
      }
      h.noalias() += features_->transpose() * w.asDiagonal() * *features_;
    }
    return h;
  }

  /// Fraction of rows classified correctly by sigmoid(x' beta) >= 0.5.
  double accuracy(const Vector& beta) const {
    if (!features_) throw std::logic_error("BlrModel::accuracy: prior-only model has no data");
    const Vector eta = *features_ * beta;
    int correct = 0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double predicted = math::sigmoid(eta[i]) >= 0.5 ? 1.0 : 0.0;
      if (predicted == (*targets_)[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(eta.size());
  }

 private:
  BlrModel(int dimension, double prior_shape, double prior_scale)
      : dim_(dimension), shape_(prior_shape), rate_(1.0 / prior_scale) {
    if (dimension < 1) throw std::invalid_argument("BlrModel: dimension must be >= 1");
    validate_prior();
  }

  void validate_prior() const {
    if (!(shape_ > 0.0) || !(rate_ > 0.0) || !std::isfinite(rate_)) {
      throw std::invalid_argument("BlrModel: prior shape and scale must be positive");
    }
  }

  void check(const Vector& beta, double tau) const {
    if (beta.size() != dim_) throw ModelError("BlrModel: beta has the wrong dimension");
    if (!(tau > 0.0)) throw ModelError("BlrModel: tau must be > 0, got " + std::to_string(tau));
  }

  static void check_family(int family) {
    if (family != 1) throw std::out_of_range("BlrModel: unknown proposal family");
  }

  int dim_;
  double shape_;
  double rate_;
  std::optional<Eigen::MatrixXd> features_;
  std::optional<Eigen::VectorXd> targets_;
};

}  // namespace mahmc
