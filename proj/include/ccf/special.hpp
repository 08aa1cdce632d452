#pragma once

// Univariate special functions used by the copula families and the simulator.

namespace ccf {

double normal_pdf(double x);
double normal_log_pdf(double x);
double normal_cdf(double x);

// Inverse of the standard normal CDF (Wichura AS241, ~1e-16 relative).
// Throws DomainError unless 0 < p < 1.
double normal_quantile(double p);

// Regularized incomplete beta I_x(a, b). `xc` must equal 1 - x; passing it
// separately keeps precision when x is close to 1.
double incomplete_beta(double a, double b, double x, double xc);
inline double incomplete_beta(double a, double b, double x) { return incomplete_beta(a, b, x, 1.0 - x); }

double log_beta(double a, double b);

// Quantile of Beta(a, b) by safeguarded Newton iteration.
double beta_quantile(double p, double a, double b);

// Student-t distribution with real degrees of freedom. Constants depending
// only on nu are cached, so keep one instance per nu in hot loops.
class StudentT {
 public:
  explicit StudentT(double nu);

  double nu() const { return nu_; }
  double log_pdf(double x) const;
  double pdf(double x) const;
  double cdf(double x) const;
  // P(T > x)
  double upper_tail(double x) const;
  double quantile(double p) const;

 private:
  double nu_;
  double log_norm_;
  double log_beta_;
};

double student_t_quantile(double p, double nu);

// First-order Debye function D1(x) = (1/x) * int_0^x t / (e^t - 1) dt, x != 0.
double debye1(double x);

}  // namespace ccf
