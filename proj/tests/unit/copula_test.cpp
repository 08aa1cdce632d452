#include "ccf/copula.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ccf/error.hpp"
#include "ccf/fitting.hpp"
#include "support/oracles.hpp"

namespace {

using ccf::CopulaFamily;
using ccf::CopulaModel;
using Eigen::Vector2d;
using Eigen::Vector3d;

std::vector<CopulaModel> bivariate_models() {
  return {CopulaModel::independence(2),     CopulaModel::gaussian(2, -0.5), CopulaModel::gaussian(2, 0.7),
          CopulaModel::student_t(2, 0.4, 3), CopulaModel::student_t(2, -0.3, 30), CopulaModel::clayton(2, 0.5),
          CopulaModel::clayton(2, 2.0),     CopulaModel::frank(2, -4.0),     CopulaModel::frank(2, 4.0),
          CopulaModel::gumbel(2, 1.5),      CopulaModel::gumbel(2, 3.0)};
}

TEST(CopulaFamily, Names) {
  for (auto f : ccf::kAllFamilies) EXPECT_EQ(ccf::parse_family(ccf::to_string(f)), f);
  EXPECT_EQ(ccf::to_string(CopulaFamily::StudentT), "studentt");
  EXPECT_EQ(ccf::parse_family("student-t"), CopulaFamily::StudentT);
  EXPECT_THROW(ccf::parse_family("joe"), ccf::UsageError);
}

TEST(CopulaModel, Validation) {
  EXPECT_THROW(ccf::validate(CopulaModel::clayton(2, 0.0)), ccf::DomainError);
  EXPECT_THROW(ccf::validate(CopulaModel::clayton(2, -0.5)), ccf::DomainError);
  EXPECT_THROW(ccf::validate(CopulaModel::frank(2, 0.0)), ccf::DomainError);
  EXPECT_THROW(ccf::validate(CopulaModel::frank(3, -1.0)), ccf::DomainError);
  EXPECT_THROW(ccf::validate(CopulaModel::gumbel(2, 0.9)), ccf::DomainError);
  EXPECT_THROW(ccf::validate(CopulaModel::student_t(2, 0.2, 2.0)), ccf::DomainError);
  EXPECT_THROW(ccf::validate(CopulaModel::independence(1)), ccf::DomainError);
  Eigen::Matrix3d bad;
  bad << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
  EXPECT_THROW(ccf::validate(CopulaModel::gaussian(bad)), ccf::DomainError);
  EXPECT_NO_THROW(ccf::validate(CopulaModel::gumbel(3, 1.0)));
}

TEST(CopulaCdf, Examples) {
  EXPECT_NEAR(ccf::copula_cdf(CopulaModel::independence(2), Vector2d(0.3, 0.5)), 0.15, 1e-15);
  EXPECT_NEAR(ccf::copula_cdf(CopulaModel::clayton(2, 1.0), Vector2d(0.5, 0.5)), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(ccf::copula_cdf(CopulaModel::gumbel(2, 1.0), Vector2d(0.4, 0.7)), 0.28, 1e-14);
  // Elliptical orthant probability at the median: 1/4 + asin(rho) / (2 pi).
  for (double rho : {-0.6, 0.0, 0.5, 0.9}) {
    const double expect = 0.25 + std::asin(rho) / (2 * std::numbers::pi);
    EXPECT_NEAR(ccf::copula_cdf(CopulaModel::gaussian(2, rho), Vector2d(0.5, 0.5)), expect, 1e-9);
    EXPECT_NEAR(ccf::copula_cdf(CopulaModel::student_t(2, rho, 4.0), Vector2d(0.5, 0.5)), expect, 1e-8);
  }
}

TEST(CopulaCdf, ClaytonMonteCarlo) {
  const Eigen::MatrixXd u = ccf::sample_copula(CopulaModel::clayton(2, 1.0), 1000000, 3);
  const double hits = ((u.col(0).array() <= 0.5) && (u.col(1).array() <= 0.5)).cast<double>().sum();
  EXPECT_NEAR(hits / 1e6, 1.0 / 3.0, 0.002);
}

TEST(CopulaCdf, ArchimedeanMatchesGeneratorForms) {
  oracle::Gen gen(3);
  for (int i = 0; i < 100; ++i) {
    const double u = gen.uniform(0.01, 0.99), v = gen.uniform(0.01, 0.99);
    EXPECT_NEAR(ccf::copula_cdf(CopulaModel::clayton(2, 2.5), Vector2d(u, v)), oracle::clayton_cdf(u, v, 2.5), 1e-13);
    EXPECT_NEAR(ccf::copula_cdf(CopulaModel::frank(2, -3.0), Vector2d(u, v)), oracle::frank_cdf(u, v, -3.0), 1e-13);
    EXPECT_NEAR(ccf::copula_cdf(CopulaModel::gumbel(2, 1.7), Vector2d(u, v)), oracle::gumbel_cdf(u, v, 1.7), 1e-13);
  }
}

TEST(CopulaCdf, UniformMarginsAndGroundedness) {
  oracle::Gen gen(9);
  const double e = ccf::kUnitClamp;
  for (const auto& m : bivariate_models()) {
    for (int i = 0; i < 50; ++i) {
      const double u = gen.uniform(0.01, 0.99);
      EXPECT_NEAR(ccf::copula_cdf(m, Vector2d(u, 1 - e)), u, 1e-4) << ccf::to_string(m.family);
      EXPECT_NEAR(ccf::copula_cdf(m, Vector2d(1 - e, u)), u, 1e-4) << ccf::to_string(m.family);
      EXPECT_LT(ccf::copula_cdf(m, Vector2d(e, u)), 1e-3);
      const double c = ccf::copula_cdf(m, Vector2d(u, gen.uniform()));
      EXPECT_GE(c, 0.0);
      EXPECT_LE(c, 1.0);
    }
  }
}

TEST(CopulaCdf, CapabilityLimits) {
  EXPECT_THROW(ccf::copula_cdf(CopulaModel::gaussian(3, 0.2), Vector3d(0.5, 0.5, 0.5)), ccf::CapabilityError);
  EXPECT_THROW(ccf::copula_cdf(CopulaModel::student_t(3, 0.2, 5), Vector3d(0.5, 0.5, 0.5)), ccf::CapabilityError);
  EXPECT_NEAR(ccf::copula_cdf(CopulaModel::clayton(3, 1.0), Vector3d(0.5, 0.5, 0.5)), 0.25, 1e-14);
}

TEST(CopulaDensity, Examples) {
  EXPECT_EQ(ccf::copula_density(CopulaModel::independence(3), Vector3d(0.2, 0.9, 0.4)), 1.0);
  EXPECT_EQ(ccf::copula_log_density(CopulaModel::independence(2), Vector2d(0.2, 0.9)), 0.0);
  EXPECT_NEAR(ccf::copula_density(CopulaModel::gaussian(2, 0.0), Vector2d(0.13, 0.77)), 1.0, 1e-14);
  EXPECT_NEAR(ccf::copula_density(CopulaModel::gaussian(2, 0.5), Vector2d(0.5, 0.5)), 1.154700538379, 1e-11);
  EXPECT_NEAR(ccf::copula_log_density(CopulaModel::gaussian(2, 0.5), Vector2d(0.5, 0.5)), 0.143841036226, 1e-11);
}

TEST(CopulaDensity, LogRoundTrip) {
  oracle::Gen gen(21);
  auto models = bivariate_models();
  models.push_back(CopulaModel::clayton(3, 1.2));
  models.push_back(CopulaModel::frank(3, 6.0));
  models.push_back(CopulaModel::gumbel(3, 2.2));
  models.push_back(CopulaModel::gaussian(3, 0.3));
  models.push_back(CopulaModel::student_t(3, 0.6, 7));
  for (const auto& m : models) {
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd u(m.dim());
      for (int k = 0; k < m.dim(); ++k) u[k] = gen.uniform(0.01, 0.99);
      const double d = ccf::copula_density(m, u);
      EXPECT_GE(d, 0.0);
      EXPECT_NEAR(std::exp(ccf::copula_log_density(m, u)), d, 1e-10 * std::max(1.0, d));
    }
  }
}

TEST(CopulaDensity, GaussianIdentity) {
  oracle::Gen gen(2);
  Eigen::Matrix3d sigma;
  sigma << 1, 0.4, -0.2, 0.4, 1, 0.5, -0.2, 0.5, 1;
  const CopulaModel m3 = CopulaModel::gaussian(sigma);
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector3d q(gen.normal(), gen.normal(), gen.normal());
    Eigen::Vector3d u;
    double prod = 1.0;
    for (int k = 0; k < 3; ++k) {
      u[k] = ccf::normal_cdf(q[k]);
      prod *= oracle::normal_density(q[k]);
    }
    const double mvn = std::exp(-0.5 * q.dot(sigma.inverse() * q)) / std::sqrt(std::pow(2 * std::numbers::pi, 3) * sigma.determinant());
    if (u.minCoeff() <= ccf::kUnitClamp || u.maxCoeff() >= 1 - ccf::kUnitClamp) continue;
    EXPECT_NEAR(ccf::copula_density(m3, u) * prod, mvn, 1e-10);
  }
}

TEST(CopulaDensity, StudentTApproachesGaussian) {
  const auto t = CopulaModel::student_t(2, 0.6, 1000);
  const auto g = CopulaModel::gaussian(2, 0.6);
  double worst = 0.0;
  for (int i = 1; i <= 21; ++i)
    for (int j = 1; j <= 21; ++j) {
      const Vector2d u(i / 22.0, j / 22.0);
      worst = std::max(worst, std::fabs(ccf::copula_density(t, u) - ccf::copula_density(g, u)));
    }
  EXPECT_LT(worst, 1e-2);
}

TEST(CopulaDensity, ArchimedeanIndependenceLimits) {
  for (const auto& m : {CopulaModel::clayton(2, 1e-4), CopulaModel::frank(2, 1e-4), CopulaModel::gumbel(2, 1 + 1e-6),
                        CopulaModel::clayton(3, 1e-4), CopulaModel::frank(3, 1e-4), CopulaModel::gumbel(3, 1 + 1e-6)}) {
    for (int i = 1; i <= 9; ++i)
      for (int j = 1; j <= 9; ++j) {
        Eigen::VectorXd u = Eigen::VectorXd::Constant(m.dim(), 0.5);
        u[0] = i / 10.0;
        u[1] = j / 10.0;
        EXPECT_NEAR(ccf::copula_density(m, u), 1.0, 1e-2) << ccf::to_string(m.family);
      }
  }
}

TEST(CopulaDensity, BivariateArchimedeanMatchesMixedPartial) {
  oracle::Gen gen(4);
  struct Case {
    CopulaModel model;
    double (*cdf)(double, double, double);
  };
  const Case cases[] = {{CopulaModel::clayton(2, 2.0), oracle::clayton_cdf},
                        {CopulaModel::frank(2, -4.0), oracle::frank_cdf},
                        {CopulaModel::gumbel(2, 3.0), oracle::gumbel_cdf}};
  for (const auto& c : cases) {
    const double theta = c.model.params.theta;
    for (int i = 0; i < 50; ++i) {
      const double u = gen.uniform(0.05, 0.95), v = gen.uniform(0.05, 0.95);
      const double numeric = oracle::mixed_partial([&](double a, double b) { return c.cdf(a, b, theta); }, u, v, 1e-3);
      EXPECT_NEAR(ccf::copula_density(c.model, Vector2d(u, v)) / numeric, 1.0, 1e-4);
    }
  }
}

// Third mixed partial of the trivariate CDF by a second-order central stencil.
double third_partial(const CopulaModel& m, const Vector3d& u, double h) {
  double sum = 0.0;
  for (int a = -1; a <= 1; a += 2)
    for (int b = -1; b <= 1; b += 2)
      for (int c = -1; c <= 1; c += 2)
        sum += a * b * c * ccf::copula_cdf(m, Vector3d(u[0] + a * h, u[1] + b * h, u[2] + c * h));
  return sum / (8 * h * h * h);
}

TEST(CopulaDensity, TrivariateArchimedeanMatchesMixedPartial) {
  oracle::Gen gen(8);
  for (const auto& m : {CopulaModel::clayton(3, 1.5), CopulaModel::frank(3, 5.0), CopulaModel::gumbel(3, 1.8)}) {
    for (int i = 0; i < 30; ++i) {
      const Vector3d u(gen.uniform(0.1, 0.9), gen.uniform(0.1, 0.9), gen.uniform(0.1, 0.9));
      EXPECT_NEAR(ccf::copula_density(m, u) / third_partial(m, u, 2e-3), 1.0, 1e-3) << ccf::to_string(m.family);
    }
  }
}

TEST(CopulaDensity, CapabilityAboveThreeDimensions) {
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(4, 0.5);
  EXPECT_THROW(ccf::copula_density(CopulaModel::frank(4, 2.0), u), ccf::CapabilityError);
  EXPECT_THROW(ccf::copula_density(CopulaModel::gumbel(4, 2.0), u), ccf::CapabilityError);
  EXPECT_NO_THROW(ccf::copula_density(CopulaModel::clayton(4, 2.0), u));
  EXPECT_NO_THROW(ccf::copula_density(CopulaModel::gaussian(4, 0.1), u));
}

TEST(CopulaDensity, ClampsBoundaryInputs) {
  const auto m = CopulaModel::clayton(2, 2.0);
  EXPECT_EQ(ccf::copula_density(m, Vector2d(0.0, 0.3)), ccf::copula_density(m, Vector2d(1e-6, 0.3)));
  EXPECT_TRUE(std::isfinite(ccf::copula_log_density(m, Vector2d(0.0, 0.0))));
}

double ks_uniform(Eigen::VectorXd x) {
  std::sort(x.data(), x.data() + x.size());
  double d = 0.0;
  const double n = static_cast<double>(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) d = std::max({d, (i + 1) / n - x[i], x[i] - i / n});
  return d;
}

TEST(SampleCopula, UniformMargins) {
  auto models = bivariate_models();
  models.push_back(CopulaModel::frank(3, 5.0));
  models.push_back(CopulaModel::gumbel(3, 2.0));
  for (const auto& m : models) {
    const Eigen::MatrixXd u = ccf::sample_copula(m, 100000, 17);
    ASSERT_EQ(u.cols(), m.dim());
    for (int k = 0; k < m.dim(); ++k) EXPECT_LT(ks_uniform(u.col(k)), 0.01) << ccf::to_string(m.family);
  }
}

TEST(SampleCopula, Deterministic) {
  const auto m = CopulaModel::student_t(3, 0.4, 6);
  EXPECT_EQ(ccf::sample_copula(m, 500, 99), ccf::sample_copula(m, 500, 99));
  EXPECT_NE(ccf::sample_copula(m, 500, 99), ccf::sample_copula(m, 500, 100));
}

double sample_tau(const CopulaModel& m, std::uint64_t seed) {
  const Eigen::MatrixXd u = ccf::sample_copula(m, 100000, seed);
  std::vector<double> x(u.col(0).data(), u.col(0).data() + u.rows());
  std::vector<double> y(u.col(1).data(), u.col(1).data() + u.rows());
  return ccf::kendall_tau(x, y);
}

TEST(SampleCopula, KendallTau) {
  EXPECT_LT(std::fabs(sample_tau(CopulaModel::independence(2), 1)), 0.01);
  EXPECT_NEAR(sample_tau(CopulaModel::clayton(2, 2.0), 1), 0.5, 0.01);
  EXPECT_NEAR(sample_tau(CopulaModel::gumbel(2, 2.0), 1), 0.5, 0.01);
  EXPECT_NEAR(sample_tau(CopulaModel::frank(2, 5.0), 1), 0.456701, 0.01);
  EXPECT_NEAR(sample_tau(CopulaModel::frank(2, -5.0), 1), -0.456701, 0.01);
  EXPECT_NEAR(sample_tau(CopulaModel::gaussian(2, 0.7), 1), 2 / std::numbers::pi * std::asin(0.7), 0.01);
}

TEST(KendallTauRelations, PopulationValues) {
  // Targets integrated numerically from the CDFs: tau = 1 - 4 E[dC/du dC/dv].
  EXPECT_NEAR(ccf::kendall_tau_of(CopulaModel::clayton(2, 2.0)), 0.5, 1e-15);
  EXPECT_NEAR(ccf::kendall_tau_of(CopulaModel::gumbel(2, 2.0)), 0.5, 1e-15);
  EXPECT_NEAR(ccf::frank_tau(5.0), 0.456701, 1e-5);
  EXPECT_NEAR(ccf::frank_tau(-5.0), -0.456701, 1e-5);
  for (double tau : {-0.8, -0.2, 0.05, 0.5, 0.9}) EXPECT_NEAR(ccf::frank_tau(ccf::frank_theta_from_tau(tau)), tau, 1e-9);
  EXPECT_NEAR(ccf::clayton_theta_from_tau(0.5), 2.0, 1e-14);
  EXPECT_NEAR(ccf::gumbel_theta_from_tau(0.5), 2.0, 1e-14);
}

TEST(SampleCopula, OwnFamilyScoresHighest) {
  const CopulaModel truth[] = {CopulaModel::gaussian(2, 0.6), CopulaModel::student_t(2, 0.6, 4),
                               CopulaModel::clayton(2, 2.0), CopulaModel::frank(2, 6.0), CopulaModel::gumbel(2, 2.0)};
  for (const auto& m : truth) {
    const Eigen::MatrixXd u = ccf::sample_copula(m, 10000, 5);
    const double own = ccf::PreparedCopula(m).log_likelihood(u) / 1e4;
    for (auto f : ccf::kFittedFamilies) {
      if (f == m.family) continue;
      const ccf::FitReport other = ccf::fit_copula_ifm(f, u);
      EXPECT_GT(own, other.log_likelihood / 1e4) << ccf::to_string(m.family) << " vs " << ccf::to_string(f);
    }
  }
}

TEST(CopulaJson, RoundTrip) {
  Eigen::Matrix3d sigma;
  sigma << 1, 0.4, -0.2, 0.4, 1, 0.5, -0.2, 0.5, 1;
  for (const auto& m : {CopulaModel::student_t(sigma, 7.5), CopulaModel::gaussian(sigma), CopulaModel::frank(2, -3.25),
                        CopulaModel::independence(4)}) {
    const CopulaModel back = ccf::copula_model_from_json(nlohmann::json::parse(ccf::to_json(m).dump()));
    EXPECT_EQ(back.family, m.family);
    EXPECT_EQ(back.dim(), m.dim());
    EXPECT_EQ(back.params.theta, m.params.theta);
    EXPECT_EQ(back.params.nu, m.params.nu);
    EXPECT_EQ(back.params.sigma, m.params.sigma);
  }
  EXPECT_THROW(ccf::copula_model_from_json(nlohmann::json{{"family", "clayton"}, {"dim", 2}, {"theta", -1}}),
               ccf::DataError);
}

}  // namespace
