#include "ccf/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ccf/error.hpp"
#include "ccf/optimize.hpp"

namespace ccf {

namespace {

constexpr double kTieTolerance = 1e-9;

template <typename Evaluator>
Eigen::MatrixXd pseudo_observations_impl(const Eigen::Ref<const Eigen::MatrixXd>& raw,
                                         std::span<const Evaluator> kdes) {
  if (raw.cols() != static_cast<Eigen::Index>(kdes.size())) {
    throw UsageError("pseudo_observations: " + std::to_string(raw.cols()) + " score columns but " +
                     std::to_string(kdes.size()) + " marginal models");
  }
  if (raw.rows() < 10) {
    throw UsageError("pseudo_observations: need at least 10 observations, got " + std::to_string(raw.rows()));
  }
  Eigen::MatrixXd u(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.cols(); ++i) {
    for (Eigen::Index t = 0; t < raw.rows(); ++t) u(t, i) = clamp_unit(kdes[i].cdf(raw(t, i)));
  }
  return u;
}

std::int64_t count_inversions(std::vector<double>& y, std::vector<double>& scratch, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = count_inversions(y, scratch, lo, mid) + count_inversions(y, scratch, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (y[i] <= y[j]) {
      scratch[k++] = y[i++];
    } else {
      swaps += static_cast<std::int64_t>(mid - i);
      scratch[k++] = y[j++];
    }
  }
  while (i < mid) scratch[k++] = y[i++];
  while (j < hi) scratch[k++] = y[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            y.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq&& equal_to_next) {
  std::int64_t pairs = 0;
  std::int64_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal_to_next(i - 1)) {
      ++run;
    } else {
      pairs += run * (run - 1) / 2;
      run = 1;
    }
  }
  return pairs;
}

double average_pairwise_tau(const Eigen::Ref<const Eigen::MatrixXd>& u) {
  const Eigen::MatrixXd tau = kendall_tau_matrix(u);
  const Eigen::Index d = tau.rows();
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) {
      sum += tau(i, j);
      ++count;
    }
  return sum / count;
}

void require_spread(const Eigen::Ref<const Eigen::MatrixXd>& u) {
  for (Eigen::Index i = 0; i < u.cols(); ++i) {
    if (u.col(i).maxCoeff() == u.col(i).minCoeff()) {
      throw EstimationError("column " + std::to_string(i) + " has no spread (all values tied)");
    }
  }
}

FitReport make_report(CopulaModel model, double ll, std::size_t n) {
  FitReport r;
  r.k = parameter_count(model.family, model.dim());
  r.model = std::move(model);
  r.log_likelihood = ll;
  r.n = n;
  const FitStatistics stats = fit_statistics(r.k, n, ll);
  r.aic = stats.aic;
  r.bic = stats.bic;
  return r;
}

FitReport fit_elliptical(CopulaFamily family, const Eigen::Ref<const Eigen::MatrixXd>& u) {
  const Eigen::MatrixXd tau = kendall_tau_matrix(u);
  Eigen::MatrixXd rho = (tau.array() * (std::numbers::pi / 2.0)).sin().matrix();
  rho.diagonal().setOnes();
  bool projected = false;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rho);
    if (eig.eigenvalues().minCoeff() < 1e-6) {
      rho = nearest_correlation(rho);
      projected = true;
    }
  }
  std::vector<std::string> flags;
  if (projected) flags.emplace_back("projected_to_positive_definite");
  if (family == CopulaFamily::Gaussian) {
    CopulaModel model = CopulaModel::gaussian(rho);
    const double ll = PreparedCopula(model).log_likelihood(u);
    FitReport r = make_report(std::move(model), ll, static_cast<std::size_t>(u.rows()));
    r.flags = flags;
    return r;
  }
  // Profile likelihood over nu with sigma held at the tau-inversion estimate.
  auto negative_ll = [&](double log_nu) {
    return -PreparedCopula(CopulaModel::student_t(rho, std::exp(log_nu))).log_likelihood(u);
  };
  const double lo = std::log(kNuRange.lo);
  const double hi = std::log(kNuRange.hi);
  const Minimum best = brent_minimize(negative_ll, lo, hi, 1e-5);
  // Brent never evaluates the endpoints; check the upper cap explicitly since
  // near-Gaussian data drives nu there.
  double log_nu = best.x;
  double nll = best.value;
  const double at_hi = negative_ll(hi);
  if (at_hi <= nll) {
    log_nu = hi;
    nll = at_hi;
  }
  if (hi - log_nu < 1e-3) flags.emplace_back("nu_at_upper_bound");
  if (log_nu - lo < 1e-3) flags.emplace_back("nu_at_lower_bound");
  FitReport r = make_report(CopulaModel::student_t(rho, std::exp(log_nu)), -nll, static_cast<std::size_t>(u.rows()));
  r.flags = flags;
  return r;
}

FitReport fit_archimedean(CopulaFamily family, const Eigen::Ref<const Eigen::MatrixXd>& u) {
  const int d = static_cast<int>(u.cols());
  const double tau = std::clamp(average_pairwise_tau(u), -0.999, 0.999);
  const ParameterRange range = theta_range(family);
  std::vector<std::string> flags;
  double sign = 1.0;
  double init = range.lo;
  switch (family) {
    case CopulaFamily::Clayton:
      if (tau > 0.0) init = clayton_theta_from_tau(tau);
      break;
    case CopulaFamily::Gumbel:
      if (tau > 0.0) init = gumbel_theta_from_tau(tau);
      break;
    case CopulaFamily::Frank:
      if (tau < 0.0 && d == 2) sign = -1.0;
      if (tau != 0.0) init = std::fabs(frank_theta_from_tau(tau));
      break;
    default: break;
  }
  if (tau < 0.0 && (family != CopulaFamily::Frank || d > 2)) flags.emplace_back("negative_dependence_not_representable");
  init = std::clamp(init, range.lo, range.hi);

  auto negative_ll = [&](double log_theta) {
    const double theta = sign * std::exp(log_theta);
    return -PreparedCopula(CopulaModel::archimedean(family, d, theta)).log_likelihood(u);
  };
  const double global_lo = std::log(range.lo);
  const double global_hi = std::log(range.hi);
  double lo = std::max(global_lo, std::log(init) - 1.0);
  double hi = std::min(global_hi, std::log(init) + 1.0);
  constexpr double kLogTol = 1e-7;
  Minimum best = brent_minimize(negative_ll, lo, hi, kLogTol);
  // The optimum sat on an interior edge of the local bracket: search the full range.
  if ((best.x - lo < 1e-4 && lo > global_lo) || (hi - best.x < 1e-4 && hi < global_hi)) {
    best = brent_minimize(negative_ll, global_lo, global_hi, kLogTol);
  }
  double log_theta = best.x;
  double nll = best.value;
  for (double edge : {global_lo, global_hi}) {
    if (std::fabs(log_theta - edge) < 1e-3) {
      const double at_edge = negative_ll(edge);
      if (at_edge <= nll) {
        log_theta = edge;
        nll = at_edge;
      }
    }
  }
  if (log_theta - global_lo < 1e-3) flags.emplace_back("theta_at_lower_bound");
  if (global_hi - log_theta < 1e-3) flags.emplace_back("theta_at_upper_bound");
  FitReport r = make_report(CopulaModel::archimedean(family, d, sign * std::exp(log_theta)), -nll,
                            static_cast<std::size_t>(u.rows()));
  r.flags = std::move(flags);
  return r;
}

}  // namespace

std::string_view to_string(Criterion criterion) {
  switch (criterion) {
    case Criterion::AIC: return "aic";
    case Criterion::BIC: return "bic";
    case Criterion::LL: return "ll";
  }
  return "aic";
}

Criterion parse_criterion(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "aic") return Criterion::AIC;
  if (lower == "bic") return Criterion::BIC;
  if (lower == "ll") return Criterion::LL;
  throw UsageError("unknown selection criterion '" + std::string(name) + "' (expected aic, bic or ll)");
}

FitStatistics fit_statistics(int k, std::size_t n, double ll) {
  return {2.0 * k - 2.0 * ll, k * std::log(static_cast<double>(n)) - 2.0 * ll};
}

int parameter_count(CopulaFamily family, int dim) {
  switch (family) {
    case CopulaFamily::Independence: return 0;
    case CopulaFamily::Gaussian: return dim * (dim - 1) / 2;
    case CopulaFamily::StudentT: return dim * (dim - 1) / 2 + 1;
    default: return 1;
  }
}

double FitReport::score(Criterion criterion) const {
  switch (criterion) {
    case Criterion::AIC: return aic;
    case Criterion::BIC: return bic;
    case Criterion::LL: return -log_likelihood;
  }
  return aic;
}

const FitReport& SelectionReport::chosen_fit() const {
  const FitReport* fit = find(chosen);
  if (fit == nullptr) throw EstimationError("selection report has no fit for the chosen family");
  return *fit;
}

const FitReport* SelectionReport::find(CopulaFamily family) const {
  for (const auto& f : fits)
    if (f.family() == family) return &f;
  return nullptr;
}

Eigen::MatrixXd pseudo_observations(const Eigen::Ref<const Eigen::MatrixXd>& raw, std::span<const KdeModel> kdes) {
  return pseudo_observations_impl(raw, kdes);
}

Eigen::MatrixXd pseudo_observations(const Eigen::Ref<const Eigen::MatrixXd>& raw,
                                    std::span<const TabulatedKde> kdes) {
  return pseudo_observations_impl(raw, kdes);
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw UsageError("kendall_tau: length mismatch (" + std::to_string(x.size()) + " vs " + std::to_string(y.size()) +
                     ")");
  }
  const std::size_t n = x.size();
  if (n < 2) throw UsageError("kendall_tau: need at least two observations");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  const std::int64_t ties_x = tied_pairs(n, [&](std::size_t i) { return x[order[i]] == x[order[i + 1]]; });
  const std::int64_t ties_xy = tied_pairs(
      n, [&](std::size_t i) { return x[order[i]] == x[order[i + 1]] && y[order[i]] == y[order[i + 1]]; });
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  std::vector<double> scratch(n);
  const std::int64_t discordant = count_inversions(ys, scratch, 0, n);
  // ys is now sorted
  const std::int64_t ties_y = tied_pairs(n, [&](std::size_t i) { return ys[i] == ys[i + 1]; });
  const std::int64_t total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t diff = total - ties_x - ties_y + ties_xy - 2 * discordant;
  return static_cast<double>(diff) / static_cast<double>(total);
}

Eigen::MatrixXd kendall_tau_matrix(const Eigen::Ref<const Eigen::MatrixXd>& u) {
  const Eigen::Index d = u.cols();
  Eigen::MatrixXd tau = Eigen::MatrixXd::Identity(d, d);
  std::vector<std::vector<double>> cols(d);
  for (Eigen::Index i = 0; i < d; ++i) cols[i].assign(u.col(i).data(), u.col(i).data() + u.rows());
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) tau(i, j) = tau(j, i) = kendall_tau(cols[i], cols[j]);
  return tau;
}

Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& m, double min_eigenvalue) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(min_eigenvalue);
  Eigen::MatrixXd s = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::VectorXd inv_sd = s.diagonal().cwiseSqrt().cwiseInverse();
  s = inv_sd.asDiagonal() * s * inv_sd.asDiagonal();
  s = 0.5 * (s + s.transpose());
  s.diagonal().setOnes();
  return s;
}

ParameterRange theta_range(CopulaFamily family) {
  switch (family) {
    case CopulaFamily::Clayton: return {1e-4, 50.0};
    case CopulaFamily::Frank: return {1e-4, 50.0};
    case CopulaFamily::Gumbel: return {1.0 + 1e-6, 50.0};
    default: throw UsageError("theta_range: " + std::string(to_string(family)) + " has no scalar parameter");
  }
}

FitReport fit_copula_ifm(CopulaFamily family, const Eigen::Ref<const Eigen::MatrixXd>& u) {
  if (u.cols() < 2) throw UsageError("fit_copula_ifm: need at least two columns");
  if (u.rows() < 2) throw EstimationError("fit_copula_ifm: need at least two observations");
  if ((u.array() <= 0.0).any() || (u.array() >= 1.0).any()) {
    throw UsageError("fit_copula_ifm: pseudo-observations must lie strictly inside (0, 1)");
  }
  const auto n = static_cast<std::size_t>(u.rows());
  FitReport report;
  if (family == CopulaFamily::Independence) {
    report = make_report(CopulaModel::independence(static_cast<int>(u.cols())), 0.0, n);
  } else {
    require_spread(u);
    report = is_elliptical(family) ? fit_elliptical(family, u) : fit_archimedean(family, u);
  }
  if (n < 50) report.flags.emplace_back("few_observations");
  return report;
}

CopulaFamily choose_best(std::span<const FitReport> fits, Criterion criterion) {
  if (fits.empty()) throw EstimationError("no successful fits to choose from");
  std::vector<const FitReport*> ordered;
  for (const auto& f : fits) ordered.push_back(&f);
  auto rank = [](CopulaFamily f) { return static_cast<int>(f); };
  std::stable_sort(ordered.begin(), ordered.end(),
                   [&](const FitReport* a, const FitReport* b) { return rank(a->family()) < rank(b->family()); });
  const FitReport* best = ordered.front();
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    const FitReport* f = ordered[i];
    const double diff = f->score(criterion) - best->score(criterion);
    if (diff < -kTieTolerance || (std::fabs(diff) <= kTieTolerance && f->k < best->k)) best = f;
  }
  return best->family();
}

SelectionReport select_family(const Eigen::Ref<const Eigen::MatrixXd>& u, std::span<const CopulaFamily> candidates,
                              Criterion criterion) {
  if (candidates.empty()) throw UsageError("select_family: candidate list is empty");
  std::vector<CopulaFamily> families(candidates.begin(), candidates.end());
  std::sort(families.begin(), families.end());
  families.erase(std::unique(families.begin(), families.end()), families.end());
  SelectionReport report;
  report.criterion = criterion;
  for (CopulaFamily family : families) {
    try {
      report.fits.push_back(fit_copula_ifm(family, u));
    } catch (const EstimationError& e) {
      report.failures.push_back({family, e.what()});
    } catch (const DomainError& e) {
      report.failures.push_back({family, e.what()});
    } catch (const CapabilityError& e) {
      report.failures.push_back({family, e.what()});
    }
  }
  if (report.fits.empty()) {
    std::string reasons;
    for (const auto& f : report.failures) reasons += " " + std::string(to_string(f.family)) + ": " + f.reason + ";";
    throw EstimationError("every candidate copula failed to fit:" + reasons);
  }
  report.chosen = choose_best(report.fits, criterion);
  return report;
}

SelectionReport select_family(const Eigen::Ref<const Eigen::MatrixXd>& u, Criterion criterion) {
  return select_family(u, kFittedFamilies, criterion);
}

nlohmann::json to_json(const FitReport& fit) {
  nlohmann::json j;
  j["family"] = std::string(to_string(fit.family()));
  j["ll"] = fit.log_likelihood;
  j["aic"] = fit.aic;
  j["bic"] = fit.bic;
  j["k"] = fit.k;
  j["n"] = fit.n;
  j["params"] = to_json(fit.model);
  j["flags"] = fit.flags;
  return j;
}

nlohmann::json to_json(const SelectionReport& report, int class_index) {
  nlohmann::json j;
  j["class"] = class_index;
  j["criterion"] = std::string(to_string(report.criterion));
  j["chosen"] = std::string(to_string(report.chosen));
  j["fits"] = nlohmann::json::array();
  for (const auto& f : report.fits) j["fits"].push_back(to_json(f));
  j["failures"] = nlohmann::json::array();
  for (const auto& f : report.failures) {
    j["failures"].push_back({{"family", std::string(to_string(f.family))}, {"reason", f.reason}});
  }
  return j;
}

std::string selection_csv_rows(const SelectionReport& report, int class_index) {
  std::ostringstream out;
  out.precision(10);
  for (const auto& f : report.fits) {
    out << class_index << ',' << to_string(f.family()) << ',' << f.log_likelihood << ',' << f.aic << ',' << f.bic
        << ',' << (f.family() == report.chosen ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace ccf
