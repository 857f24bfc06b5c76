// Effective sample size, Kolmogorov-Smirnov tests and efficiency summaries.
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mahmc {

/// chains x draws, one scalar functional.
using ChainMatrix = Eigen::MatrixXd;

struct EssEstimate {
  double value = 0.0;
  bool degenerate = false;  // zero variance input; value is 0
};

namespace detail {

inline double inverse_normal_cdf(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

/// Average ranks (1-based) over all entries, ties share their mean rank.
inline Eigen::MatrixXd average_ranks(const Eigen::MatrixXd& values) {
  const Eigen::Index size = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(size));
  std::iota(order.begin(), order.end(), 0);
  const double* data = values.data();
  std::stable_sort(order.begin(), order.end(),
                   [data](Eigen::Index a, Eigen::Index b) { return data[a] < data[b]; });
  Eigen::MatrixXd ranks(values.rows(), values.cols());
  double* out = ranks.data();
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && data[order[j + 1]] == data[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

/// Each chain cut into its first and last floor(n/2) draws.
inline Eigen::MatrixXd split_chains(const ChainMatrix& chains) {
  const Eigen::Index half = chains.cols() / 2;
  Eigen::MatrixXd out(2 * chains.rows(), half);
  for (Eigen::Index c = 0; c < chains.rows(); ++c) {
    out.row(2 * c) = chains.row(c).head(half);
    out.row(2 * c + 1) = chains.row(c).tail(half);
  }
  return out;
}

/// Blom-offset inverse normal transform of the pooled ranks.
inline Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& values) {
  Eigen::MatrixXd z = average_ranks(values);
  const double size = static_cast<double>(values.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z.data()[i] = inverse_normal_cdf((z.data()[i] - 0.375) / (size + 0.25));
  }
  return z;
}

/// Biased (divide-by-n) autocovariance of each row at lags 0..n-1.
inline Eigen::MatrixXd autocovariance(const Eigen::MatrixXd& chains) {
  const auto n = static_cast<std::size_t>(chains.cols());
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  Eigen::FFT<double> fft;
  Eigen::MatrixXd out(chains.rows(), chains.cols());
  std::vector<double> padded(m);
  std::vector<std::complex<double>> spectrum;
  std::vector<double> back;
  for (Eigen::Index c = 0; c < chains.rows(); ++c) {
    const double mean = chains.row(c).mean();
    std::fill(padded.begin(), padded.end(), 0.0);
    for (std::size_t t = 0; t < n; ++t) padded[t] = chains(c, static_cast<Eigen::Index>(t)) - mean;
    fft.fwd(spectrum, padded);
    for (auto& s : spectrum) s = std::complex<double>(std::norm(s), 0.0);
    fft.inv(back, spectrum);
    for (std::size_t t = 0; t < n; ++t) out(c, static_cast<Eigen::Index>(t)) = back[t] / static_cast<double>(n);
  }
  return out;
}

/// Multi-chain ESS with Geyer's initial monotone sequence truncation.
inline EssEstimate ess_raw(const Eigen::MatrixXd& chains) {
  const auto n_chain = static_cast<double>(chains.rows());
  const Eigen::Index n_draw = chains.cols();
  const auto draws = static_cast<double>(n_draw);
  const Eigen::MatrixXd acov = autocovariance(chains);
  const Eigen::VectorXd chain_mean = chains.rowwise().mean();

  const double mean_var = acov.col(0).mean() * draws / (draws - 1.0);
  double var_plus = mean_var * (draws - 1.0) / draws;
  if (chains.rows() > 1) {
    const double grand = chain_mean.mean();
    var_plus += (chain_mean.array() - grand).square().sum() / (n_chain - 1.0);
  }
  if (!(var_plus > 0.0)) return {0.0, true};

  auto rho = [&](Eigen::Index lag) { return 1.0 - (mean_var - acov.col(lag).mean()) / var_plus; };

  std::vector<double> rho_hat(static_cast<std::size_t>(n_draw), 0.0);
  double rho_even = 1.0;
  double rho_odd = rho(1);
  rho_hat[0] = rho_even;
  rho_hat[1] = rho_odd;

  // initial positive sequence
  Eigen::Index t = 1;
  while (t < n_draw - 3 && rho_even + rho_odd > 0.0) {
    rho_even = rho(t + 1);
    rho_odd = rho(t + 2);
    if (rho_even + rho_odd >= 0.0) {
      rho_hat[static_cast<std::size_t>(t + 1)] = rho_even;
      rho_hat[static_cast<std::size_t>(t + 2)] = rho_odd;
    }
    t += 2;
  }
  const Eigen::Index max_t = t - 2;
  if (rho_even > 0.0) rho_hat[static_cast<std::size_t>(max_t + 1)] = rho_even;

  // initial monotone sequence
  t = 1;
  while (t <= max_t - 2) {
    const auto i = static_cast<std::size_t>(t);
    if (rho_hat[i + 1] + rho_hat[i + 2] > rho_hat[i - 1] + rho_hat[i]) {
      rho_hat[i + 1] = 0.5 * (rho_hat[i - 1] + rho_hat[i]);
      rho_hat[i + 2] = rho_hat[i + 1];
    }
    t += 2;
  }

  const double total = n_chain * draws;
  double tau = -1.0;
  for (Eigen::Index k = 0; k <= max_t; ++k) tau += 2.0 * rho_hat[static_cast<std::size_t>(k)];
  tau += rho_hat[static_cast<std::size_t>(max_t + 1)];
  tau = std::max(tau, 1.0 / std::log10(total));
  return {total / tau, false};
}

}  // namespace detail

/// Bulk ESS: split chains, rank-normalize, then the multi-chain estimator.
inline EssEstimate ess_bulk(const ChainMatrix& chains) {
  if (chains.rows() < 1 || chains.cols() < 8) {
    throw std::invalid_argument("ess_bulk: need at least one chain of 8 or more draws");
  }
  if (!chains.allFinite()) throw std::invalid_argument("ess_bulk: non-finite draws");
  const Eigen::MatrixXd split = detail::split_chains(chains);
  if (split.maxCoeff() == split.minCoeff()) return {0.0, true};
  return detail::ess_raw(detail::rank_normalize(split));
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double effective_size = 0.0;
};

/// Asymptotic Kolmogorov survival function with the small-sample correction
/// lambda = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D.
inline double kolmogorov_pvalue(double statistic, double n) {
  const double root = std::sqrt(n);
  const double lambda = (root + 0.12 + 0.11 / root) * statistic;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Two-sided one-sample KS test. The p-value uses `effective_size` in place of
/// the sample count when given, which is how autocorrelated MCMC output is
/// tested (pass the ESS of the same draws).
inline KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf,
                        std::optional<double> effective_size = std::nullopt) {
  if (samples.empty()) throw std::invalid_argument("ks_test: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double n_eff = effective_size ? std::clamp(*effective_size, 1.0, n) : n;
  return {d, kolmogorov_pvalue(d, n_eff), n_eff};
}

/// Classification accuracy of the posterior-mean coefficients, threshold 0.5.
/// `beta_draws` holds one draw per row.
inline double posterior_accuracy(const Eigen::MatrixXd& beta_draws, const Eigen::MatrixXd& features,
                                 const Eigen::VectorXd& targets) {
  if (beta_draws.rows() < 1) throw std::invalid_argument("posterior_accuracy: no draws");
  if (beta_draws.cols() != features.cols()) {
    throw std::invalid_argument("posterior_accuracy: dimension mismatch");
  }
  const Eigen::VectorXd mean = beta_draws.colwise().mean().transpose();
  const Eigen::VectorXd eta = features * mean;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // sigmoid(eta) >= 0.5 exactly when eta >= 0
    const double predicted = eta[i] >= 0.0 ? 1.0 : 0.0;
    if (predicted == targets[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(eta.size());
}

struct EfficiencyReport {
  double ess_per_sample_per_grad = 0.0;
  double raw_ess = 0.0;
  std::uint64_t grad_evals = 0;
  std::uint64_t draws = 0;
  double accept_rate = 0.0;
};

/// ESS / (draws x gradients per draw), i.e. ESS per gradient evaluation.
inline EfficiencyReport efficiency(double raw_ess, std::uint64_t draws, std::uint64_t grad_evals,
                                   double accept_rate) {
  EfficiencyReport r;
  r.raw_ess = raw_ess;
  r.draws = draws;
  r.grad_evals = grad_evals;
  r.accept_rate = accept_rate;
  if (draws > 0 && grad_evals > 0) {
    const double per_draw = static_cast<double>(grad_evals) / static_cast<double>(draws);
    r.ess_per_sample_per_grad = raw_ess / (static_cast<double>(draws) * per_draw);
  }
  return r;
}

}  // namespace mahmc
