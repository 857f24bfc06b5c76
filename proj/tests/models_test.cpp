#include <mahmc/models/blr.hpp>
#include <mahmc/models/dataset.hpp>
#include <mahmc/models/gmm.hpp>
#include <mahmc/models/mdc.hpp>
#include <mahmc/diagnostics.hpp>
#include <mahmc/samplers.hpp>

#include "test_support.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mahmc {
namespace {

const Dataset& wdbc() {
  static const Dataset data = load_wdbc(MAHMC_DEFAULT_DATA_PATH);
  return data;
}

double log_normal_pdf(double x, double mean, double sd) {
  const double r = (x - mean) / sd;
  return -0.5 * r * r - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------- MDC

MdcModel::Other random_w(int n, Rng& rng) {
  MdcModel::Other w(static_cast<std::size_t>(n));
  std::bernoulli_distribution coin(0.5);
  for (auto& wi : w) wi = coin(rng);
  return w;
}

TEST(Mdc, HandValue) {
  const MdcModel model;
  EXPECT_NEAR(model.potential(Vector::Zero(2), MdcModel::Other(20, 1)), 20.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(model.potential(Vector::Zero(2), MdcModel::Other(20, 0)), 20.0 * std::log(2.0), 1e-12);
}

TEST(Mdc, GradientMatchesFiniteDifferences) {
  const MdcModel model;
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vector q = 2.0 * standard_normal(2, rng);
    const auto w = random_w(20, rng);
    const Vector fd = testing::finite_difference_gradient(model, q, w);
    ASSERT_LE(testing::max_relative_difference(model.gradient(q, w), fd), 1e-5) << q.transpose();
  }
}

TEST(Mdc, DensityProductOracle) {
  const MdcModel model;
  Rng rng(2);
  std::optional<double> offset;
  for (int i = 0; i < 20; ++i) {
    const double u = 1.5 * std::normal_distribution<double>()(rng);
    const double v = u + 0.1 * std::normal_distribution<double>()(rng);
    const auto w = random_w(20, rng);
    double log_density = log_normal_pdf(u, 0.0, 1.0) + log_normal_pdf(v, u, 0.04);
    const double p1 = 1.0 / (1.0 + std::exp(u));
    for (int wi : w) log_density += std::log(wi ? p1 : 1.0 - p1);
    const double diff = log_density + model.potential(Vector{{u, v}}, w);
    if (!offset) offset = diff;
    ASSERT_NEAR(diff, *offset, 1e-10);
  }
}

TEST(Mdc, GibbsMeanAtUEqualsOne) {
  const MdcModel model;
  Rng rng(3);
  constexpr int kDraws = 100000;
  std::vector<double> ones(20, 0.0);
  for (int i = 0; i < kDraws; ++i) {
    const auto w = model.gibbs_w(1.0, rng);
    for (std::size_t k = 0; k < w.size(); ++k) ones[k] += w[k];
  }
  const double expected = 1.0 / (1.0 + std::numbers::e);
  double pooled = 0.0;
  for (double c : ones) {
    EXPECT_NEAR(c / kDraws, expected, 0.005);
    pooled += c;
  }
  EXPECT_NEAR(pooled / (20.0 * kDraws), expected, 0.005 * expected);
}

TEST(Mdc, GibbsLimits) {
  const MdcModel model;
  Rng rng(4);
  EXPECT_EQ(model.gibbs_w(60.0, rng), MdcModel::Other(20, 0));
  EXPECT_EQ(model.gibbs_w(-60.0, rng), MdcModel::Other(20, 1));
}

TEST(Mdc, GibbsProposalRatioIsOne) {
  const MdcModel model;
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    // states from the joint; far off it U is ~1e3 and cancellation costs digits
    const auto [q, from] = model.initial_state(rng);
    const auto to = model.propose(1, q, from, rng);
    ASSERT_LE(std::abs(std::expm1(other_log_ratio(model, 1, q, from, to))), 1e-12);
  }
}

TEST(Mdc, RejectsMalformedIndicators) {
  const MdcModel model;
  EXPECT_THROW(model.potential(Vector::Zero(2), MdcModel::Other(19, 0)), ModelError);
  EXPECT_THROW(model.potential(Vector::Zero(2), MdcModel::Other(20, 2)), ModelError);
  EXPECT_THROW(model.gradient(Vector::Zero(3), MdcModel::Other(20, 0)), ModelError);
  Rng rng(1);
  EXPECT_THROW(model.propose(2, Vector::Zero(2), MdcModel::Other(20, 0), rng), std::out_of_range);
}

// ---------------------------------------------------------------- dataset

TEST(Wdbc, ShapeAndStandardization) {
  const Dataset& d = wdbc();
  ASSERT_EQ(d.features.rows(), 569);
  ASSERT_EQ(d.features.cols(), 31);
  EXPECT_TRUE((d.features.col(30).array() == 1.0).all());
  for (int c = 0; c < 30; ++c) {
    const double mean = d.features.col(c).mean();
    const double sd = std::sqrt((d.features.col(c).array() - mean).square().mean());
    EXPECT_LE(std::abs(mean), 1e-10) << c;
    EXPECT_NEAR(sd, 1.0, 1e-10) << c;
  }
}

TEST(Wdbc, ClassCountsMatchRawFile) {
  std::ifstream in(MAHMC_DEFAULT_DATA_PATH);
  std::string line;
  std::getline(in, line);
  int raw_ones = 0, raw_zeros = 0;
  while (std::getline(in, line)) {
    const std::string last = line.substr(line.rfind(',') + 1);
    (std::stod(last) == 1.0 ? raw_ones : raw_zeros)++;
  }
  const Dataset& d = wdbc();
  const int ones = static_cast<int>(d.targets.sum());
  EXPECT_EQ(ones, raw_ones);
  EXPECT_EQ(569 - ones, raw_zeros);
  EXPECT_EQ(ones, 357);
  EXPECT_EQ(raw_zeros, 212);
}

class WdbcErrors : public ::testing::Test {
 protected:
  std::filesystem::path write(const std::string& body) {
    const auto path = std::filesystem::path(::testing::TempDir()) / "wdbc_case.csv";
    std::ofstream(path) << body;
    return path;
  }

  static std::string header(int features) {
    std::string h;
    for (int i = 0; i < features; ++i) h += "f" + std::to_string(i) + ",";
    return h + "target\n";
  }

  static std::string expect_error(const std::filesystem::path& p, int rows, int features) {
    try {
      load_wdbc(p.string(), rows, features);
    } catch (const DataError& e) {
      return e.what();
    }
    ADD_FAILURE() << "no DataError";
    return {};
  }
};

TEST_F(WdbcErrors, MissingFile) {
  EXPECT_THROW(load_wdbc("/nonexistent/wdbc.csv"), DataError);
}

TEST_F(WdbcErrors, RowCountMismatch) {
  const auto p = write(header(2) + "1,2,0\n3,4,1\n");
  const std::string msg = expect_error(p, 3, 2);
  EXPECT_NE(msg.find("found 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("expected 3"), std::string::npos) << msg;
}

TEST_F(WdbcErrors, ColumnCountMismatch) {
  const auto p = write(header(2) + "1,2,0\n3,1\n");
  const std::string msg = expect_error(p, 2, 2);
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("2 columns"), std::string::npos) << msg;
}

TEST_F(WdbcErrors, NonNumericCellReportsLocation) {
  const auto p = write(header(2) + "1,2,0\n3,abc,1\n");
  const std::string msg = expect_error(p, 2, 2);
  EXPECT_NE(msg.find("'abc'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 3, column 2"), std::string::npos) << msg;
}

TEST_F(WdbcErrors, NonBinaryTarget) {
  const auto p = write(header(2) + "1,2,0\n3,4,2\n");
  EXPECT_NE(expect_error(p, 2, 2).find("target"), std::string::npos);
}

TEST_F(WdbcErrors, SmallValidFile) {
  const auto p = write(header(2) + "1,10,0\n3,30,1\n5,20,1\n");
  const Dataset d = load_wdbc(p.string(), 3, 2);
  ASSERT_EQ(d.features.cols(), 3);
  EXPECT_NEAR(d.features(0, 0), -std::sqrt(1.5), 1e-12);
  EXPECT_EQ(d.targets, Eigen::Vector3d(0, 1, 1));
}

// ---------------------------------------------------------------- BLR

TEST(Blr, GradientAtZeroBeta) {
  const BlrModel model(wdbc());
  const Vector g = model.gradient(Vector::Zero(31), 3.0);
  const Vector expected = wdbc().features.transpose() * (0.5 - wdbc().targets.array()).matrix();
  EXPECT_LE(testing::max_relative_difference(g, expected), 1e-12);
}

TEST(Blr, GradientMatchesFiniteDifferences) {
  const BlrModel model(wdbc());
  const BlrModel prior = BlrModel::prior_only();
  Rng rng(6);
  std::uniform_real_distribution<double> tau(0.05, 50.0);
  for (int i = 0; i < 100; ++i) {
    const Vector beta = 0.5 * standard_normal(31, rng);
    const double t = tau(rng);
    ASSERT_LE(testing::max_relative_difference(model.gradient(beta, t),
                                               testing::finite_difference_gradient(model, beta, t)),
              1e-5);
    ASSERT_LE(testing::max_relative_difference(prior.gradient(beta, t),
                                               testing::finite_difference_gradient(prior, beta, t)),
              1e-5);
  }
}

TEST(Blr, DensityProductOracle) {
  const BlrModel model(wdbc());
  const Dataset& d = wdbc();
  Rng rng(7);
  std::uniform_real_distribution<double> tau(0.1, 20.0);
  std::optional<double> offset;
  for (int i = 0; i < 20; ++i) {
    const Vector beta = 0.3 * standard_normal(31, rng);
    const double t = tau(rng);
    // Gamma(1, scale 100) x N(0, I / tau) x prod Bernoulli
    double log_density = -std::log(100.0) - t / 100.0;
    for (int k = 0; k < 31; ++k) log_density += log_normal_pdf(beta[k], 0.0, 1.0 / std::sqrt(t));
    const Vector eta = d.features * beta;
    for (Eigen::Index r = 0; r < eta.size(); ++r) {
      const double p = 1.0 / (1.0 + std::exp(-eta[r]));
      log_density += std::log(d.targets[r] == 1.0 ? p : 1.0 - p);
    }
    const double diff = log_density + model.potential(beta, t);
    if (!offset) offset = diff;
    ASSERT_NEAR(diff, *offset, 1e-8 * std::max(1.0, std::abs(*offset)));
  }
}

TEST(Blr, TauMustBePositive) {
  const BlrModel model(wdbc());
  EXPECT_THROW(model.potential(Vector::Zero(31), 0.0), ModelError);
  EXPECT_THROW(model.gradient(Vector::Zero(31), -1.0), ModelError);
  EXPECT_THROW(model.potential(Vector::Zero(30), 1.0), ModelError);
}

TEST(Blr, GibbsTauAtZeroBeta) {
  const BlrModel model(wdbc());
  Rng rng(8);
  constexpr int kDraws = 20000;
  std::vector<double> draws(kDraws);
  for (auto& t : draws) t = model.gibbs_tau(Vector::Zero(31), rng);
  double mean = 0.0;
  for (double t : draws) mean += t / kDraws;
  EXPECT_NEAR(mean, 1650.0, 5.0 * 1650.0 / std::sqrt(16.5 * kDraws));
  const KsResult ks = ks_test(draws, [](double t) { return boost::math::gamma_p(16.5, 0.01 * t); });
  EXPECT_GE(ks.p_value, 0.01) << ks.statistic;
}

TEST(Blr, GibbsConditionalMeanDecreasesWithNorm) {
  const BlrModel model(wdbc());
  double previous = std::numeric_limits<double>::infinity();
  for (double scale : {0.0, 0.1, 0.5, 1.0, 3.0}) {
    const Vector beta = Vector::Constant(31, scale);
    const double mean = model.conditional_shape() / model.conditional_rate(beta);
    EXPECT_LT(mean, previous);
    previous = mean;
  }
  EXPECT_NEAR(model.conditional_shape(), 16.5, 1e-15);
}

TEST(Blr, GibbsProposalRatioIsOne) {
  const BlrModel model(wdbc());
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const Vector beta = 0.3 * standard_normal(31, rng);
    const double from = std::gamma_distribution<double>(2.0, 3.0)(rng);
    const double to = model.propose(1, beta, from, rng);
    ASSERT_LE(std::abs(std::expm1(other_log_ratio(model, 1, beta, from, to))), 1e-12);
  }
}

TEST(Blr, ModeClassifiesTrainingData) {
  const BlrModel model(wdbc());
  const auto [beta, tau] = model.mode();
  EXPECT_LE(model.gradient(beta, tau).norm(), 1e-8);
  EXPECT_GT(tau, 0.0);
  EXPECT_GE(model.accuracy(beta), 0.98);
}

TEST(Blr, PriorOnlyHasNoData) {
  const BlrModel prior = BlrModel::prior_only();
  EXPECT_FALSE(prior.has_data());
  EXPECT_EQ(prior.dimension(), 31);
  EXPECT_THROW(prior.accuracy(Vector::Zero(31)), std::logic_error);
}

// ---------------------------------------------------------------- GMM

TEST(Gmm, RandomWalkWrapsAround) {
  const Gmm1dModel model;
  Rng rng(10);
  int up = 0;
  constexpr int kDraws = 20000;
  for (int i = 0; i < kDraws; ++i) {
    const int z = model.propose(1, Vector::Zero(1), 0, rng);
    ASSERT_TRUE(z == 1 || z == 2);
    up += z == 1;
  }
  EXPECT_NEAR(static_cast<double>(up) / kDraws, 0.5, 0.015);
}

TEST(Gmm, RandomWalkIsSymmetric) {
  for (int k : {2, 3, 5}) {
    std::vector<double> w(static_cast<std::size_t>(k), 1.0 / k), m(static_cast<std::size_t>(k)), s(static_cast<std::size_t>(k), 1.0);
    for (int i = 0; i < k; ++i) m[static_cast<std::size_t>(i)] = i;
    const Gmm1dModel model(w, m, s);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        EXPECT_EQ(model.proposal_log_density(1, b, Vector::Zero(1), a),
                  model.proposal_log_density(1, a, Vector::Zero(1), b));
      }
    }
    if (k == 2) {
      EXPECT_EQ(model.proposal_log_density(1, 1, Vector::Zero(1), 0), 0.0);
    }
  }
}

TEST(Gmm, GradientMatchesFiniteDifferences) {
  const Gmm1dModel model;
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Vector q = 3.0 * standard_normal(1, rng);
    const int z = i % 3;
    ASSERT_LE(testing::max_relative_difference(model.gradient(q, z),
                                               testing::finite_difference_gradient(model, q, z)),
              1e-5);
  }
}

TEST(Gmm, PotentialIsJointDensity) {
  const Gmm1dModel model;
  for (double x : {-2.5, -0.3, 0.0, 1.7}) {
    double marginal = 0.0;
    for (int z = 0; z < 3; ++z) marginal += std::exp(-model.potential(Vector{{x}}, z));
    // normalizing constant of exp(-U) is sqrt(2 pi)
    EXPECT_NEAR(marginal / std::sqrt(2.0 * std::numbers::pi), model.marginal_pdf(x), 1e-14);
  }
}

TEST(Gmm, MarginalCdfIntegratesPdf) {
  const Gmm1dModel model;
  double integral = 0.0;
  const double h = 1e-3;
  for (double x = -8.0; x < 1.0; x += h) integral += h * model.marginal_pdf(x + 0.5 * h);
  EXPECT_NEAR(integral, model.marginal_cdf(1.0), 1e-6);
  EXPECT_NEAR(model.marginal_cdf(0.0), 0.5, 1e-14);
}

TEST(Gmm, Validation) {
  EXPECT_THROW(Gmm1dModel({1.0}, {0.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(Gmm1dModel({0.5, 0.6}, {0.0, 1.0}, {1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(Gmm1dModel({0.5, 0.5}, {0.0, 1.0}, {1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(Gmm1dModel({0.5, 0.5}, {0.0}, {1.0, 1.0}), std::invalid_argument);
  const Gmm1dModel model;
  EXPECT_THROW(model.potential(Vector::Zero(1), 3), ModelError);
}

}  // namespace
}  // namespace mahmc
