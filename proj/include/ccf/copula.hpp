#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccf/special.hpp"

namespace ccf {

// Uniform inputs are clamped into [kUnitClamp, 1 - kUnitClamp] before any
// density evaluation; Clayton and Gumbel densities diverge at the boundary.
inline constexpr double kUnitClamp = 1e-6;

inline double clamp_unit(double u) {
  return u < kUnitClamp ? kUnitClamp : (u > 1.0 - kUnitClamp ? 1.0 - kUnitClamp : u);
}

enum class CopulaFamily { Independence, Gaussian, StudentT, Clayton, Frank, Gumbel };

// Fixed family order, also used as the final selection tie-break.
inline constexpr CopulaFamily kAllFamilies[] = {CopulaFamily::Independence, CopulaFamily::Gaussian,
                                                CopulaFamily::StudentT,     CopulaFamily::Clayton,
                                                CopulaFamily::Frank,        CopulaFamily::Gumbel};
inline constexpr CopulaFamily kFittedFamilies[] = {CopulaFamily::Gaussian, CopulaFamily::StudentT,
                                                   CopulaFamily::Clayton, CopulaFamily::Frank,
                                                   CopulaFamily::Gumbel};

std::string_view to_string(CopulaFamily family);
// Accepts the serialized lowercase names plus "student-t" / "t".
CopulaFamily parse_family(std::string_view name);
bool is_archimedean(CopulaFamily family);
bool is_elliptical(CopulaFamily family);

struct CopulaParams {
  int dim = 2;
  Eigen::MatrixXd sigma;  // Gaussian, StudentT
  double nu = 0.0;        // StudentT
  double theta = 0.0;     // Clayton, Frank, Gumbel
};

struct CopulaModel {
  CopulaFamily family = CopulaFamily::Independence;
  CopulaParams params;

  static CopulaModel independence(int dim);
  static CopulaModel gaussian(const Eigen::MatrixXd& sigma);
  static CopulaModel gaussian(int dim, double rho);  // equicorrelation
  static CopulaModel student_t(const Eigen::MatrixXd& sigma, double nu);
  static CopulaModel student_t(int dim, double rho, double nu);
  static CopulaModel clayton(int dim, double theta);
  static CopulaModel frank(int dim, double theta);
  static CopulaModel gumbel(int dim, double theta);
  static CopulaModel archimedean(CopulaFamily family, int dim, double theta);

  int dim() const { return params.dim; }
};

// Throws DomainError if the parameters are outside the family's admissible range.
void validate(const CopulaModel& model);

// Equicorrelation matrix with unit diagonal.
Eigen::MatrixXd equicorrelation(int dim, double rho);

// Density evaluator with per-model constants (Cholesky factor, quantile
// caches, normalizers) computed once. Immutable and shareable.
class PreparedCopula {
 public:
  explicit PreparedCopula(CopulaModel model);

  const CopulaModel& model() const { return model_; }
  // Inputs are clamped into (eps, 1 - eps).
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  double log_density(std::span<const double> u) const;
  double density(const Eigen::Ref<const Eigen::VectorXd>& u) const { return std::exp(log_density(u)); }
  // Sum of log densities over the rows of an n x d matrix.
  double log_likelihood(const Eigen::Ref<const Eigen::MatrixXd>& u) const;

 private:
  double log_density_clamped(const double* u) const;

  CopulaModel model_;
  Eigen::MatrixXd precision_minus_identity_;  // Gaussian
  Eigen::MatrixXd precision_;                 // StudentT
  double half_log_det_ = 0.0;
  double t_joint_norm_ = 0.0;
  std::optional<StudentT> t_;
  double clayton_log_coef_ = 0.0;
  double frank_log_delta_ = 0.0;
};

double copula_cdf(const CopulaModel& model, const Eigen::Ref<const Eigen::VectorXd>& u);
double copula_density(const CopulaModel& model, const Eigen::Ref<const Eigen::VectorXd>& u);
double copula_log_density(const CopulaModel& model, const Eigen::Ref<const Eigen::VectorXd>& u);

// n x d matrix of draws. Deterministic for a fixed seed.
Eigen::MatrixXd sample_copula(const CopulaModel& model, Eigen::Index n, std::uint64_t seed);

// Population Kendall tau of the bivariate margin (pair (0,1) for elliptical families).
double kendall_tau_of(const CopulaModel& model);
// Inverse tau relations; the result is not clipped to any search range.
double clayton_theta_from_tau(double tau);
double gumbel_theta_from_tau(double tau);
double frank_theta_from_tau(double tau);
double frank_tau(double theta);

nlohmann::json to_json(const CopulaModel& model);
CopulaModel copula_model_from_json(const nlohmann::json& j);

}  // namespace ccf
