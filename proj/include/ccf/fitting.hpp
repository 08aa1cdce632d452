#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccf/copula.hpp"
#include "ccf/kde.hpp"

namespace ccf {

enum class Criterion { AIC, BIC, LL };

std::string_view to_string(Criterion criterion);
Criterion parse_criterion(std::string_view name);

struct FitStatistics {
  double aic = 0.0;
  double bic = 0.0;
};

// aic = 2k - 2ll, bic = k ln(n) - 2ll
FitStatistics fit_statistics(int k, std::size_t n, double ll);

// Free parameters counted by AIC/BIC: Gaussian d(d-1)/2, Student-t d(d-1)/2 + 1,
// Archimedean 1, Independence 0.
int parameter_count(CopulaFamily family, int dim);

struct FitReport {
  CopulaModel model;
  double log_likelihood = 0.0;
  int k = 0;
  std::size_t n = 0;
  double aic = 0.0;
  double bic = 0.0;
  std::vector<std::string> flags;

  CopulaFamily family() const { return model.family; }
  double score(Criterion criterion) const;  // lower is better
};

struct FitFailure {
  CopulaFamily family;
  std::string reason;
};

struct SelectionReport {
  std::vector<FitReport> fits;  // canonical family order
  std::vector<FitFailure> failures;
  CopulaFamily chosen = CopulaFamily::Independence;
  Criterion criterion = Criterion::AIC;

  const FitReport& chosen_fit() const;
  const FitReport* find(CopulaFamily family) const;
};

// u[t][i] = clamp(F_i(raw[t][i])). Requires at least 10 rows.
Eigen::MatrixXd pseudo_observations(const Eigen::Ref<const Eigen::MatrixXd>& raw, std::span<const KdeModel> kdes);
Eigen::MatrixXd pseudo_observations(const Eigen::Ref<const Eigen::MatrixXd>& raw, std::span<const TabulatedKde> kdes);

// Kendall's tau-a: (concordant - discordant) / (n(n-1)/2), ties count as
// neither. O(n log n) (Knight's merge-sort algorithm).
double kendall_tau(std::span<const double> x, std::span<const double> y);
Eigen::MatrixXd kendall_tau_matrix(const Eigen::Ref<const Eigen::MatrixXd>& u);

// Nearest correlation matrix by eigenvalue clipping and unit-diagonal rescaling.
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& m, double min_eigenvalue = 1e-6);

struct ParameterRange {
  double lo;
  double hi;
};

// Search ranges for the dependence parameter (magnitude for Frank).
ParameterRange theta_range(CopulaFamily family);
inline constexpr ParameterRange kNuRange{2.01, 50.0};

// IFM second stage: maximizes the copula log-likelihood of pseudo-observations.
FitReport fit_copula_ifm(CopulaFamily family, const Eigen::Ref<const Eigen::MatrixXd>& u);

// Fits every candidate and picks the best by the criterion. Fits that throw
// are recorded in `failures`; if every candidate fails, throws EstimationError.
SelectionReport select_family(const Eigen::Ref<const Eigen::MatrixXd>& u, std::span<const CopulaFamily> candidates,
                              Criterion criterion = Criterion::AIC);
SelectionReport select_family(const Eigen::Ref<const Eigen::MatrixXd>& u, Criterion criterion = Criterion::AIC);

// Picks the winner among already-computed fits (same rule as select_family).
CopulaFamily choose_best(std::span<const FitReport> fits, Criterion criterion);

nlohmann::json to_json(const FitReport& fit);
nlohmann::json to_json(const SelectionReport& report, int class_index);
// CSV rows "class,family,ll,aic,bic,chosen" (no header).
std::string selection_csv_rows(const SelectionReport& report, int class_index);

}  // namespace ccf
