#include "ccf/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ccf/error.hpp"
#include "ccf/quadrature.hpp"

namespace ccf {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;

void require_probability(double p, const char* who) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError(std::string(who) + ": probability must lie in (0, 1), got " + std::to_string(p));
  }
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double incomplete_beta_with_lbeta(double a, double b, double x, double xc, double lbeta) {
  if (x <= 0.0) return 0.0;
  if (xc <= 0.0) return 1.0;
  const double front = std::exp(a * std::log(x) + b * std::log(xc) - lbeta);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, xc) / b;
}

// Upper tail of the Beta(a, b) distribution, 1 - I_x(a, b), without cancellation.
double incomplete_beta_upper(double a, double b, double x, double xc, double lbeta) {
  if (x <= 0.0) return 1.0;
  if (xc <= 0.0) return 0.0;
  const double front = std::exp(a * std::log(x) + b * std::log(xc) - lbeta);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return 1.0 - front * beta_continued_fraction(a, b, x) / a;
  }
  return front * beta_continued_fraction(b, a, xc) / b;
}

}  // namespace

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_log_pdf(double x) { return -kLogSqrt2Pi - 0.5 * x * x; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  require_probability(p, "normal_quantile");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double incomplete_beta(double a, double b, double x, double xc) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete_beta: shape parameters must be positive");
  return incomplete_beta_with_lbeta(a, b, x, xc, log_beta(a, b));
}

double beta_quantile(double p, double a, double b) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("beta_quantile: probability outside [0, 1]");
  if (!(a > 0.0 && b > 0.0)) throw DomainError("beta_quantile: shape parameters must be positive");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double lbeta = log_beta(a, b);
  double lo = 0.0;
  double hi = 1.0;
  double x = std::clamp(a / (a + b), 1e-12, 1.0 - 1e-12);
  for (int it = 0; it < 200; ++it) {
    const double f = incomplete_beta_with_lbeta(a, b, x, 1.0 - x, lbeta) - p;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double log_pdf = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - lbeta;
    double next = x - f / std::exp(log_pdf);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 1e-15 * std::max(x, 1e-300) || hi - lo < 1e-16) return next;
    x = next;
  }
  return x;
}

StudentT::StudentT(double nu) : nu_(nu) {
  if (!(nu > 0.0)) throw DomainError("StudentT: degrees of freedom must be positive, got " + std::to_string(nu));
  log_beta_ = log_beta(0.5 * nu, 0.5);
  log_norm_ = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
}

double StudentT::log_pdf(double x) const { return log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(x * x / nu_); }

double StudentT::pdf(double x) const { return std::exp(log_pdf(x)); }

double StudentT::upper_tail(double x) const {
  const double x2 = x * x;
  const double denom = nu_ + x2;
  // P(|T| > |x|) = I_{nu/(nu+x^2)}(nu/2, 1/2)
  const double two_tail = incomplete_beta_with_lbeta(0.5 * nu_, 0.5, nu_ / denom, x2 / denom, log_beta_);
  return x >= 0.0 ? 0.5 * two_tail : 1.0 - 0.5 * two_tail;
}

double StudentT::cdf(double x) const { return upper_tail(-x); }

double StudentT::quantile(double p) const {
  require_probability(p, "student_t_quantile");
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double two_tail = 2.0 * (upper ? 1.0 - p : p);
  const double n = nu_;
  double q;
  if (std::fabs(n - 2.0) < 1e-12) {
    q = std::sqrt(2.0 / (two_tail * (2.0 - two_tail)) - 2.0);
  } else if (std::fabs(n - 1.0) < 1e-12) {
    const double angle = two_tail * std::numbers::pi / 2.0;
    q = std::cos(angle) / std::sin(angle);
  } else if (n < 1.0) {
    // two_tail = I_x(n/2, 1/2) with x = n / (n + q^2)
    const double x = beta_quantile(two_tail, 0.5 * n, 0.5);
    q = std::sqrt(n * (1.0 - x) / x);
  } else {
    // Hill's (1970) inverse expansion, refined below.
    const double a = 1.0 / (n - 0.5);
    const double b = 48.0 / (a * a);
    double c = ((20700.0 * a / b - 98.0) * a - 16.0) * a + 96.36;
    const double d = ((94.5 / (b + c) - 3.0) / b + 1.0) * std::sqrt(a * std::numbers::pi / 2.0) * n;
    double y = std::pow(d * two_tail, 2.0 / n);
    if ((n < 2.1 && two_tail > 0.5) || y > 0.05 + a) {
      const double x = normal_quantile(0.5 * two_tail);
      y = x * x;
      if (n < 5.0) c += 0.3 * (n - 4.5) * (x + 0.6);
      c = (((0.05 * d * x - 5.0) * x - 7.0) * x - 2.0) * x + b + c;
      y = (((((0.4 * y + 6.3) * y + 36.0) * y + 94.5) / c - y - 3.0) / b + 1.0) * x;
      y = std::expm1(a * y * y);
    } else {
      y = ((1.0 / (((n + 6.0) / (n * y) - 0.089 * d - 0.822) * (n + 2.0) * 3.0) + 0.5 / (n + 4.0)) * y - 1.0) *
              (n + 1.0) / (n + 2.0) +
          1.0 / y;
    }
    q = std::sqrt(n * y);
  }
  // Second-order Taylor refinement on the upper tail.
  const double target = 0.5 * two_tail;
  for (int it = 0; it < 10; ++it) {
    const double dens = pdf(q);
    if (!(dens > 0.0)) break;
    const double step = (upper_tail(q) - target) / dens;
    if (!std::isfinite(step)) break;
    q += step * (1.0 + step * q * (n + 1.0) / (2.0 * (q * q + n)));
    if (std::fabs(step) <= 1e-14 * std::fabs(q)) break;
  }
  return upper ? q : -q;
}

double student_t_quantile(double p, double nu) { return StudentT(nu).quantile(p); }

double debye1(double x) {
  if (x == 0.0) return 1.0;
  static const GaussLegendre rule = gauss_legendre(32);
  const double ax = std::fabs(x);
  auto integrand = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
  const int panels = std::max(1, static_cast<int>(std::ceil(ax / 5.0)));
  double value = integrate(integrand, 0.0, ax, rule, panels) / ax;
  // D1(-x) = D1(x) + x/2
  if (x < 0.0) value += ax / 2.0;
  return value;
}

}  // namespace ccf
