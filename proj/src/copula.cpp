#include "ccf/copula.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "ccf/error.hpp"
#include "ccf/random.hpp"

namespace ccf {

namespace {

std::string family_label(CopulaFamily family) { return std::string(to_string(family)); }

void require_dim(const CopulaModel& model, int min_dim, int max_dim) {
  const int d = model.dim();
  if (d < min_dim || d > max_dim) {
    throw CapabilityError(family_label(model.family) + " density is only available for dimension " +
                          std::to_string(min_dim) + ".." + std::to_string(max_dim) + ", got " +
                          std::to_string(d));
  }
}

// Adaptive Simpson on [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth) {
  struct Rec {
    const std::function<double(double)>& f;
    double step(double a, double fa, double b, double fb, double m, double fm, double whole, double tol,
                int depth) const {
      const double lm = 0.5 * (a + m);
      const double rm = 0.5 * (m + b);
      const double flm = f(lm);
      const double frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double delta = left + right - whole;
      if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
      return step(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
             step(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
    }
  } rec{f};
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  return rec.step(a, fa, b, fb, m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

// Bivariate standard normal CDF via Sheppard's integral over the correlation angle.
double bivariate_normal_cdf(double h, double k, double rho) {
  const double base = normal_cdf(h) * normal_cdf(k);
  if (rho == 0.0) return base;
  const double end = std::asin(rho);
  auto integrand = [h, k](double t) {
    const double c = std::cos(t);
    return std::exp(-(h * h + k * k - 2.0 * h * k * std::sin(t)) / (2.0 * c * c));
  };
  const double integral = adaptive_simpson(integrand, 0.0, end, 1e-14, 40);
  return std::clamp(base + integral / (2.0 * std::numbers::pi), 0.0, 1.0);
}

// Bivariate Student-t CDF as a chi-square mixture of bivariate normal CDFs.
// The mixing variable is integrated on a log scale.
double bivariate_t_cdf(double h, double k, double rho, double nu) {
  const double log_norm = -0.5 * nu * std::numbers::ln2 - std::lgamma(0.5 * nu);
  auto integrand = [&](double y) {
    const double w = std::exp(y);
    // density of log W for W ~ chi^2_nu
    const double log_dens = log_norm + 0.5 * nu * y - 0.5 * w;
    const double scale = std::sqrt(w / nu);
    return std::exp(log_dens) * bivariate_normal_cdf(h * scale, k * scale, rho);
  };
  const double lo = -80.0 / nu - 5.0;
  const double hi = std::log(nu + 20.0 * std::sqrt(2.0 * nu) + 100.0);
  return std::clamp(adaptive_simpson(integrand, lo, hi, 1e-11, 30), 0.0, 1.0);
}

void require_correlation(const Eigen::MatrixXd& sigma, int dim, const std::string& who) {
  if (sigma.rows() != dim || sigma.cols() != dim) {
    throw DomainError(who + ": correlation matrix must be " + std::to_string(dim) + "x" + std::to_string(dim));
  }
  for (int i = 0; i < dim; ++i) {
    if (std::fabs(sigma(i, i) - 1.0) > 1e-12) throw DomainError(who + ": correlation matrix diagonal must be 1");
    for (int j = i + 1; j < dim; ++j) {
      if (std::fabs(sigma(i, j) - sigma(j, i)) > 1e-12) throw DomainError(who + ": correlation matrix not symmetric");
      if (!(std::fabs(sigma(i, j)) < 1.0)) throw DomainError(who + ": correlations must lie in (-1, 1)");
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw DomainError(who + ": correlation matrix is not positive definite");
}

int sample_log_series(double p, double log1mp, Rng& rng) {
  const double v = rng.uniform();
  if (v >= p) return 1;
  const double q = -std::expm1(log1mp * rng.uniform());
  if (v <= q * q) return static_cast<int>(std::floor(1.0 + std::log(v) / std::log(q)));
  return v <= q ? 2 : 1;
}

// Positive stable variate with Laplace transform exp(-t^alpha), 0 < alpha < 1 (Kanter).
double sample_positive_stable(double alpha, Rng& rng) {
  const double angle = std::numbers::pi * rng.uniform();
  const double e = rng.exponential();
  const double a = std::sin(alpha * angle) / std::pow(std::sin(angle), 1.0 / alpha);
  const double b = std::pow(std::sin((1.0 - alpha) * angle) / e, (1.0 - alpha) / alpha);
  return a * b;
}

}  // namespace

std::string_view to_string(CopulaFamily family) {
  switch (family) {
    case CopulaFamily::Independence: return "independence";
    case CopulaFamily::Gaussian: return "gaussian";
    case CopulaFamily::StudentT: return "studentt";
    case CopulaFamily::Clayton: return "clayton";
    case CopulaFamily::Frank: return "frank";
    case CopulaFamily::Gumbel: return "gumbel";
  }
  return "unknown";
}

CopulaFamily parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "independence") return CopulaFamily::Independence;
  if (lower == "gaussian" || lower == "normal") return CopulaFamily::Gaussian;
  if (lower == "studentt" || lower == "student-t" || lower == "student_t" || lower == "t") return CopulaFamily::StudentT;
  if (lower == "clayton") return CopulaFamily::Clayton;
  if (lower == "frank") return CopulaFamily::Frank;
  if (lower == "gumbel") return CopulaFamily::Gumbel;
  throw UsageError("unknown copula family '" + std::string(name) + "'");
}

bool is_archimedean(CopulaFamily family) {
  return family == CopulaFamily::Clayton || family == CopulaFamily::Frank || family == CopulaFamily::Gumbel;
}

bool is_elliptical(CopulaFamily family) {
  return family == CopulaFamily::Gaussian || family == CopulaFamily::StudentT;
}

Eigen::MatrixXd equicorrelation(int dim, double rho) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(dim, dim, rho);
  sigma.diagonal().setOnes();
  return sigma;
}

CopulaModel CopulaModel::independence(int dim) {
  CopulaModel m;
  m.params.dim = dim;
  return m;
}

CopulaModel CopulaModel::gaussian(const Eigen::MatrixXd& sigma) {
  CopulaModel m;
  m.family = CopulaFamily::Gaussian;
  m.params.dim = static_cast<int>(sigma.rows());
  m.params.sigma = sigma;
  return m;
}

CopulaModel CopulaModel::gaussian(int dim, double rho) { return gaussian(equicorrelation(dim, rho)); }

CopulaModel CopulaModel::student_t(const Eigen::MatrixXd& sigma, double nu) {
  CopulaModel m = gaussian(sigma);
  m.family = CopulaFamily::StudentT;
  m.params.nu = nu;
  return m;
}

CopulaModel CopulaModel::student_t(int dim, double rho, double nu) { return student_t(equicorrelation(dim, rho), nu); }

CopulaModel CopulaModel::archimedean(CopulaFamily family, int dim, double theta) {
  if (!is_archimedean(family)) throw UsageError(family_label(family) + " is not an Archimedean family");
  CopulaModel m;
  m.family = family;
  m.params.dim = dim;
  m.params.theta = theta;
  return m;
}

CopulaModel CopulaModel::clayton(int dim, double theta) { return archimedean(CopulaFamily::Clayton, dim, theta); }
CopulaModel CopulaModel::frank(int dim, double theta) { return archimedean(CopulaFamily::Frank, dim, theta); }
CopulaModel CopulaModel::gumbel(int dim, double theta) { return archimedean(CopulaFamily::Gumbel, dim, theta); }

void validate(const CopulaModel& model) {
  const auto& p = model.params;
  const std::string who = family_label(model.family);
  if (p.dim < 2) throw DomainError(who + ": dimension must be at least 2, got " + std::to_string(p.dim));
  switch (model.family) {
    case CopulaFamily::Independence: break;
    case CopulaFamily::StudentT:
      if (!(p.nu > 2.0) || !std::isfinite(p.nu)) {
        throw DomainError(who + ": degrees of freedom must be > 2, got " + std::to_string(p.nu));
      }
      [[fallthrough]];
    case CopulaFamily::Gaussian: require_correlation(p.sigma, p.dim, who); break;
    case CopulaFamily::Clayton:
      if (!(p.theta > 0.0) || !std::isfinite(p.theta)) throw DomainError(who + ": theta must be > 0");
      break;
    case CopulaFamily::Frank:
      if (p.theta == 0.0 || !std::isfinite(p.theta)) throw DomainError(who + ": theta must be nonzero");
      if (p.dim > 2 && p.theta < 0.0) throw DomainError(who + ": negative theta is only valid in dimension 2");
      break;
    case CopulaFamily::Gumbel:
      if (!(p.theta >= 1.0) || !std::isfinite(p.theta)) throw DomainError(who + ": theta must be >= 1");
      break;
  }
}

PreparedCopula::PreparedCopula(CopulaModel model) : model_(std::move(model)) {
  validate(model_);
  const int d = model_.dim();
  switch (model_.family) {
    case CopulaFamily::Independence: break;
    case CopulaFamily::Gaussian:
    case CopulaFamily::StudentT: {
      Eigen::LLT<Eigen::MatrixXd> llt(model_.params.sigma);
      half_log_det_ = llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      precision_ = llt.solve(Eigen::MatrixXd::Identity(d, d));
      precision_minus_identity_ = precision_ - Eigen::MatrixXd::Identity(d, d);
      if (model_.family == CopulaFamily::StudentT) {
        const double nu = model_.params.nu;
        t_.emplace(nu);
        t_joint_norm_ = std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) - 0.5 * d * std::log(nu * std::numbers::pi);
      }
      break;
    }
    case CopulaFamily::Clayton:
      for (int i = 1; i < d; ++i) clayton_log_coef_ += std::log1p(i * model_.params.theta);
      break;
    case CopulaFamily::Frank:
      require_dim(model_, 2, 3);
      frank_log_delta_ = std::log(std::fabs(-std::expm1(-model_.params.theta)));
      break;
    case CopulaFamily::Gumbel: require_dim(model_, 2, 3); break;
  }
}

double PreparedCopula::log_density(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  const int d = model_.dim();
  if (u.size() != d) {
    throw UsageError("copula density: expected " + std::to_string(d) + " coordinates, got " + std::to_string(u.size()));
  }
  double buf[16];
  std::vector<double> heap;
  double* v = buf;
  if (d > 16) {
    heap.resize(d);
    v = heap.data();
  }
  for (int i = 0; i < d; ++i) v[i] = clamp_unit(u[i]);
  return log_density_clamped(v);
}

double PreparedCopula::log_density(std::span<const double> u) const {
  return log_density(Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size())));
}

double PreparedCopula::log_likelihood(const Eigen::Ref<const Eigen::MatrixXd>& u) const {
  const int d = model_.dim();
  if (u.cols() != d) {
    throw UsageError("copula log-likelihood: expected " + std::to_string(d) + " columns, got " + std::to_string(u.cols()));
  }
  if (model_.family == CopulaFamily::Independence) return 0.0;
  std::vector<double> row(d);
  double sum = 0.0;
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    for (int i = 0; i < d; ++i) row[i] = clamp_unit(u(t, i));
    sum += log_density_clamped(row.data());
  }
  return sum;
}

double PreparedCopula::log_density_clamped(const double* u) const {
  const int d = model_.dim();
  const double theta = model_.params.theta;
  switch (model_.family) {
    case CopulaFamily::Independence: return 0.0;
    case CopulaFamily::Gaussian: {
      double q[16];
      std::vector<double> heap;
      double* x = q;
      if (d > 16) {
        heap.resize(d);
        x = heap.data();
      }
      for (int i = 0; i < d; ++i) x[i] = normal_quantile(u[i]);
      double quad = 0.0;
      for (int i = 0; i < d; ++i) {
        double row = 0.0;
        for (int j = 0; j < d; ++j) row += precision_minus_identity_(i, j) * x[j];
        quad += x[i] * row;
      }
      return -half_log_det_ - 0.5 * quad;
    }
    case CopulaFamily::StudentT: {
      double q[16];
      std::vector<double> heap;
      double* x = q;
      if (d > 16) {
        heap.resize(d);
        x = heap.data();
      }
      double marginal = 0.0;
      for (int i = 0; i < d; ++i) {
        x[i] = t_->quantile(u[i]);
        marginal += t_->log_pdf(x[i]);
      }
      double quad = 0.0;
      for (int i = 0; i < d; ++i) {
        double row = 0.0;
        for (int j = 0; j < d; ++j) row += precision_(i, j) * x[j];
        quad += x[i] * row;
      }
      const double nu = model_.params.nu;
      return t_joint_norm_ - half_log_det_ - 0.5 * (nu + d) * std::log1p(quad / nu) - marginal;
    }
    case CopulaFamily::Clayton: {
      double sum_log = 0.0;
      double excess = 0.0;
      for (int i = 0; i < d; ++i) {
        const double lu = std::log(u[i]);
        sum_log += lu;
        excess += std::expm1(-theta * lu);
      }
      return clayton_log_coef_ - (theta + 1.0) * sum_log - (d + 1.0 / theta) * std::log1p(excess);
    }
    case CopulaFamily::Frank: {
      double sum_u = 0.0;
      double prod = 1.0;
      for (int i = 0; i < d; ++i) {
        sum_u += u[i];
        prod *= -std::expm1(-theta * u[i]);
      }
      const double delta = -std::expm1(-theta);
      if (d == 2) {
        const double z = prod / delta;
        return std::log(theta / delta) - theta * sum_u - 2.0 * std::log1p(-z);
      }
      const double z = prod / (delta * delta);
      return 2.0 * std::log(theta) - 2.0 * frank_log_delta_ - theta * sum_u + std::log1p(z) - 3.0 * std::log1p(-z);
    }
    case CopulaFamily::Gumbel: {
      const double alpha = 1.0 / theta;
      double s = 0.0;
      double tail = 0.0;
      for (int i = 0; i < d; ++i) {
        const double l = -std::log(u[i]);
        s += std::pow(l, theta);
        tail += std::log(theta) + (theta - 1.0) * std::log(l) + l;
      }
      const double x = std::pow(s, alpha);
      double poly;
      if (d == 2) {
        poly = alpha * x * (alpha * x + 1.0 - alpha);
      } else {
        poly = alpha * x * (alpha * alpha * x * x + 3.0 * alpha * (1.0 - alpha) * x + (1.0 - alpha) * (2.0 - alpha));
      }
      return -x + std::log(poly) - d * std::log(s) + tail;
    }
  }
  return 0.0;
}

double copula_log_density(const CopulaModel& model, const Eigen::Ref<const Eigen::VectorXd>& u) {
  return PreparedCopula(model).log_density(u);
}

double copula_density(const CopulaModel& model, const Eigen::Ref<const Eigen::VectorXd>& u) {
  return std::exp(copula_log_density(model, u));
}

double copula_cdf(const CopulaModel& model, const Eigen::Ref<const Eigen::VectorXd>& u_in) {
  validate(model);
  const int d = model.dim();
  if (u_in.size() != d) {
    throw UsageError("copula cdf: expected " + std::to_string(d) + " coordinates, got " + std::to_string(u_in.size()));
  }
  Eigen::VectorXd u = u_in.unaryExpr([](double x) { return clamp_unit(x); });
  const double theta = model.params.theta;
  switch (model.family) {
    case CopulaFamily::Independence: return u.prod();
    case CopulaFamily::Gaussian:
    case CopulaFamily::StudentT: {
      if (d != 2) {
        throw CapabilityError(family_label(model.family) + " CDF is only available in dimension 2, got " +
                              std::to_string(d));
      }
      const double rho = model.params.sigma(0, 1);
      if (model.family == CopulaFamily::Gaussian) {
        return bivariate_normal_cdf(normal_quantile(u[0]), normal_quantile(u[1]), rho);
      }
      const StudentT t(model.params.nu);
      return bivariate_t_cdf(t.quantile(u[0]), t.quantile(u[1]), rho, model.params.nu);
    }
    case CopulaFamily::Clayton: {
      double excess = 0.0;
      for (int i = 0; i < d; ++i) excess += std::expm1(-theta * std::log(u[i]));
      // (sum u_i^-theta - d + 1)^(-1/theta), argument floored at 0
      if (1.0 + excess <= 0.0) return 0.0;
      return std::exp(-std::log1p(excess) / theta);
    }
    case CopulaFamily::Frank: {
      double prod = 1.0;
      for (int i = 0; i < d; ++i) prod *= std::expm1(-theta * u[i]);
      const double denom = std::pow(std::expm1(-theta), d - 1);
      return std::clamp(-std::log1p(prod / denom) / theta, 0.0, 1.0);
    }
    case CopulaFamily::Gumbel: {
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += std::pow(-std::log(u[i]), theta);
      return std::exp(-std::pow(s, 1.0 / theta));
    }
  }
  return 0.0;
}

Eigen::MatrixXd sample_copula(const CopulaModel& model, Eigen::Index n, std::uint64_t seed) {
  validate(model);
  if (n < 1) throw UsageError("sample_copula: sample count must be at least 1");
  const int d = model.dim();
  Rng rng(seed);
  Eigen::MatrixXd out(n, d);
  const double theta = model.params.theta;
  switch (model.family) {
    case CopulaFamily::Independence:
      for (Eigen::Index t = 0; t < n; ++t)
        for (int i = 0; i < d; ++i) out(t, i) = rng.uniform();
      break;
    case CopulaFamily::Gaussian:
    case CopulaFamily::StudentT: {
      const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(model.params.sigma).matrixL();
      std::optional<StudentT> t_dist;
      if (model.family == CopulaFamily::StudentT) t_dist.emplace(model.params.nu);
      Eigen::VectorXd g(d);
      for (Eigen::Index t = 0; t < n; ++t) {
        for (int i = 0; i < d; ++i) g[i] = rng.normal();
        Eigen::VectorXd z = chol.triangularView<Eigen::Lower>() * g;
        if (t_dist) {
          const double w = 2.0 * rng.gamma(0.5 * model.params.nu);
          z *= std::sqrt(model.params.nu / w);
          for (int i = 0; i < d; ++i) out(t, i) = t_dist->cdf(z[i]);
        } else {
          for (int i = 0; i < d; ++i) out(t, i) = normal_cdf(z[i]);
        }
      }
      break;
    }
    case CopulaFamily::Clayton:
      for (Eigen::Index t = 0; t < n; ++t) {
        const double v = rng.gamma(1.0 / theta);
        for (int i = 0; i < d; ++i) out(t, i) = std::exp(-std::log1p(rng.exponential() / v) / theta);
      }
      break;
    case CopulaFamily::Gumbel: {
      const double alpha = 1.0 / theta;
      for (Eigen::Index t = 0; t < n; ++t) {
        const double v = alpha < 1.0 ? sample_positive_stable(alpha, rng) : 1.0;
        for (int i = 0; i < d; ++i) out(t, i) = std::exp(-std::pow(rng.exponential() / v, alpha));
      }
      break;
    }
    case CopulaFamily::Frank:
      if (theta > 0.0) {
        const double p = -std::expm1(-theta);
        for (Eigen::Index t = 0; t < n; ++t) {
          const double v = sample_log_series(p, -theta, rng);
          for (int i = 0; i < d; ++i) out(t, i) = -std::log1p(-p * std::exp(-rng.exponential() / v)) / theta;
        }
      } else {
        // Conditional inversion; negative dependence exists only in dimension 2.
        const double em = std::expm1(-theta);
        for (Eigen::Index t = 0; t < n; ++t) {
          const double u = rng.uniform();
          const double w = rng.uniform();
          const double y = w * em / (std::exp(-theta * u) - w * std::expm1(-theta * u));
          out(t, 0) = u;
          out(t, 1) = -std::log1p(y) / theta;
        }
      }
      break;
  }
  return out.unaryExpr([](double x) { return clamp_unit(x); });
}

double frank_tau(double theta) {
  if (theta == 0.0) return 0.0;
  return 1.0 - 4.0 / theta * (1.0 - debye1(theta));
}

double kendall_tau_of(const CopulaModel& model) {
  switch (model.family) {
    case CopulaFamily::Independence: return 0.0;
    case CopulaFamily::Gaussian:
    case CopulaFamily::StudentT: return 2.0 / std::numbers::pi * std::asin(model.params.sigma(0, 1));
    case CopulaFamily::Clayton: return model.params.theta / (model.params.theta + 2.0);
    case CopulaFamily::Frank: return frank_tau(model.params.theta);
    case CopulaFamily::Gumbel: return 1.0 - 1.0 / model.params.theta;
  }
  return 0.0;
}

double clayton_theta_from_tau(double tau) { return 2.0 * tau / (1.0 - tau); }

double gumbel_theta_from_tau(double tau) { return 1.0 / (1.0 - tau); }

double frank_theta_from_tau(double tau) {
  if (!(tau > -1.0 && tau < 1.0)) throw DomainError("frank_theta_from_tau: tau must lie in (-1, 1)");
  if (tau == 0.0) return 0.0;
  const double target = std::fabs(tau);
  // tau(theta) is increasing and odd; bisect on log(theta).
  double lo = std::log(1e-8);
  double hi = std::log(1e4);
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (frank_tau(std::exp(mid)) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double theta = std::exp(0.5 * (lo + hi));
  return tau < 0.0 ? -theta : theta;
}

nlohmann::json to_json(const CopulaModel& model) {
  nlohmann::json j;
  j["family"] = std::string(to_string(model.family));
  j["dim"] = model.dim();
  if (is_archimedean(model.family)) j["theta"] = model.params.theta;
  if (model.family == CopulaFamily::StudentT) j["nu"] = model.params.nu;
  if (is_elliptical(model.family)) {
    std::vector<double> flat;
    for (int r = 0; r < model.dim(); ++r)
      for (int c = 0; c < model.dim(); ++c) flat.push_back(model.params.sigma(r, c));
    j["sigma"] = flat;
  }
  return j;
}

CopulaModel copula_model_from_json(const nlohmann::json& j) {
  try {
    CopulaModel m;
    m.family = parse_family(j.at("family").get<std::string>());
    m.params.dim = j.at("dim").get<int>();
    if (j.contains("theta")) m.params.theta = j.at("theta").get<double>();
    if (j.contains("nu")) m.params.nu = j.at("nu").get<double>();
    if (j.contains("sigma")) {
      const auto flat = j.at("sigma").get<std::vector<double>>();
      const int d = m.params.dim;
      if (static_cast<int>(flat.size()) != d * d) throw DataError("copula model: sigma must have dim*dim entries");
      m.params.sigma.resize(d, d);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) m.params.sigma(r, c) = flat[r * d + c];
    }
    validate(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("copula model: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("copula model: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("copula model: ") + e.what());
  }
}

}  // namespace ccf
