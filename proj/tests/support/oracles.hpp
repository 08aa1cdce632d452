#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

// Composite Simpson rule with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

inline double normal_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Phi(x) = 1/2 + integral_0^x phi.
inline double normal_cdf(double x) {
  const double half = simpson(normal_density, 0.0, std::fabs(x), 4000);
  return x >= 0 ? 0.5 + half : 0.5 - half;
}

inline double t_density(double x, double nu) {
  const double c = std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) / std::sqrt(nu * std::numbers::pi);
  return c * std::pow(1.0 + x * x / nu, -(nu + 1) / 2);
}

// Integrates the density in the variable s = atan(x) so heavy tails stay finite.
inline double t_cdf(double x, double nu) {
  auto g = [nu](double s) {
    const double c = std::cos(s);
    return t_density(std::tan(s), nu) / (c * c);
  };
  const double half = simpson(g, 0.0, std::atan(std::fabs(x)), 20000);
  return x >= 0 ? 0.5 + half : 0.5 - half;
}

inline double bisect(const std::function<double(double)>& f, double target, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// O(n^2) Kendall tau-a.
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = (x[i] - x[j]) * (y[i] - y[j]);
      s += a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
    }
  return s / (0.5 * n * (n - 1.0));
}

// d^2 F / du dv with the fourth-order central stencil in each direction.
inline double mixed_partial(const std::function<double(double, double)>& F, double u, double v, double h) {
  static const double w[4] = {1.0, -8.0, 8.0, -1.0};
  static const double off[4] = {-2.0, -1.0, 1.0, 2.0};
  double sum = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) sum += w[i] * w[j] * F(u + off[i] * h, v + off[j] * h);
  return sum / (144.0 * h * h);
}

// Closed-form bivariate Archimedean CDFs written from their generators.
inline double clayton_cdf(double u, double v, double t) {
  return std::pow(std::pow(u, -t) + std::pow(v, -t) - 1.0, -1.0 / t);
}
inline double frank_cdf(double u, double v, double t) {
  return -std::log(1.0 + (std::exp(-t * u) - 1.0) * (std::exp(-t * v) - 1.0) / (std::exp(-t) - 1.0)) / t;
}
inline double gumbel_cdf(double u, double v, double t) {
  return std::exp(-std::pow(std::pow(-std::log(u), t) + std::pow(-std::log(v), t), 1.0 / t));
}

// Gaussian KDE by full summation over every sample.
struct Kde {
  std::vector<double> samples;
  double h;
  double pdf(double x) const {
    double s = 0.0;
    for (double xi : samples) s += normal_density((x - xi) / h);
    return s / (samples.size() * h);
  }
  double cdf(double x) const {
    double s = 0.0;
    for (double xi : samples) s += 0.5 * std::erfc(-(x - xi) / (h * std::sqrt(2.0)));
    return s / samples.size();
  }
};

// Naive-Bayes fuser: argmax_m prior_m * prod_i f_{m,i}(score_i^m), linear domain
// rescaled per pixel, first maximum wins.
inline int naive_bayes_label(const std::vector<std::vector<Kde>>& marginals, const std::vector<double>& priors,
                             const std::vector<std::vector<double>>& scores) {
  const std::size_t M = priors.size();
  std::vector<double> logs(M);
  for (std::size_t m = 0; m < M; ++m) {
    double lp = std::log(priors[m]);
    for (std::size_t i = 0; i < scores.size(); ++i) lp += std::log(marginals[m][i].pdf(scores[i][m]));
    logs[m] = lp;
  }
  std::size_t best = 0;
  for (std::size_t m = 1; m < M; ++m)
    if (logs[m] > logs[best]) best = m;
  return static_cast<int>(best);
}

// Hand-rolled seeded generator for property tests (xorshift64*).
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : s_(seed * 0x9E3779B97F4A7C15ULL + 1) {}
  std::uint64_t next() {
    s_ ^= s_ >> 12;
    s_ ^= s_ << 25;
    s_ ^= s_ >> 27;
    return s_ * 0x2545F4914F6CDD1DULL;
  }
  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) / 9007199254740992.0; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
  double normal() {
    const double u = uniform();
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
  }

 private:
  std::uint64_t s_;
};

}  // namespace oracle
