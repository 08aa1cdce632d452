#include "ccf/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "ccf/error.hpp"
#include "ccf/special.hpp"

namespace ccf {

namespace {

constexpr double kWindow = 8.0;
constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Bandwidth silverman_bandwidth(std::span<const double> samples) {
  const std::size_t k = samples.size();
  if (k < 2) throw UsageError("silverman_bandwidth: need at least two samples, got " + std::to_string(k));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) return {kDegenerateBandwidth, true};
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(k);
  double ss = 0.0;
  for (double x : sorted) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(k - 1));
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) return {kDegenerateBandwidth, true};
  return {0.9 * spread * std::pow(static_cast<double>(k), -0.2), false};
}

KdeModel::KdeModel(std::vector<double> samples) : samples_(std::move(samples)) {
  std::sort(samples_.begin(), samples_.end());
  const Bandwidth bw = silverman_bandwidth(samples_);
  bandwidth_ = bw.value;
  fallback_ = bw.fallback;
}

KdeModel::KdeModel(std::vector<double> samples, double bandwidth) : samples_(std::move(samples)), bandwidth_(bandwidth) {
  if (samples_.size() < 2) throw UsageError("KdeModel: need at least two samples");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw UsageError("KdeModel: bandwidth must be positive");
  std::sort(samples_.begin(), samples_.end());
}

KdeModel KdeModel::single_point_for_testing(double x, double bandwidth) {
  KdeModel m;
  m.samples_ = {x};
  m.bandwidth_ = bandwidth;
  return m;
}

double KdeModel::pdf(double x) const {
  const double h = bandwidth_;
  auto first = std::lower_bound(samples_.begin(), samples_.end(), x - kWindow * h);
  auto last = std::upper_bound(first, samples_.end(), x + kWindow * h);
  double sum = 0.0;
  for (auto it = first; it != last; ++it) {
    const double z = (x - *it) / h;
    sum += std::exp(-0.5 * z * z);
  }
  return sum * kInvSqrt2Pi / (static_cast<double>(samples_.size()) * h);
}

double KdeModel::pdf_derivative(double x) const {
  const double h = bandwidth_;
  auto first = std::lower_bound(samples_.begin(), samples_.end(), x - kWindow * h);
  auto last = std::upper_bound(first, samples_.end(), x + kWindow * h);
  double sum = 0.0;
  for (auto it = first; it != last; ++it) {
    const double z = (x - *it) / h;
    sum -= z * std::exp(-0.5 * z * z);
  }
  return sum * kInvSqrt2Pi / (static_cast<double>(samples_.size()) * h * h);
}

double KdeModel::cdf(double x) const {
  const double h = bandwidth_;
  auto first = std::lower_bound(samples_.begin(), samples_.end(), x - kWindow * h);
  auto last = std::upper_bound(first, samples_.end(), x + kWindow * h);
  double sum = static_cast<double>(first - samples_.begin());
  for (auto it = first; it != last; ++it) sum += normal_cdf((x - *it) / h);
  return sum / static_cast<double>(samples_.size());
}

TabulatedKde::TabulatedKde(const KdeModel& model) {
  const double h = model.bandwidth();
  const auto& samples = model.samples();
  lo_ = samples.front() - kWindow * h;
  const double span = samples.back() + kWindow * h - lo_;
  constexpr double kMaxNodes = 1 << 18;
  const double nodes = std::min(kMaxNodes, std::ceil(span / (h / 16.0)));
  const auto n = static_cast<std::size_t>(nodes) + 1;
  step_ = span / static_cast<double>(n - 1);
  cdf_.assign(n, 0.0);
  pdf_.assign(n, 0.0);
  dpdf_.assign(n, 0.0);
  ddpdf_.assign(n, 0.0);
  std::vector<double>& ddpdf = ddpdf_;

  // Kernel values at consecutive nodes follow g[j+1] = g[j] r[j], r[j+1] = r[j] q
  // with q = exp(-delta^2), so each sample costs two exponentials.
  const double delta = step_ / h;
  const double q = std::exp(-delta * delta);
  const double last = static_cast<double>(n - 1);
  for (double x : samples) {
    const double first_pos = std::max(0.0, std::ceil((x - kWindow * h - lo_) / step_));
    const double last_pos = std::min(last, std::floor((x + kWindow * h - lo_) / step_));
    if (first_pos > last_pos) continue;
    const auto j0 = static_cast<std::size_t>(first_pos);
    const auto j1 = static_cast<std::size_t>(last_pos);
    double z = (lo_ + step_ * first_pos - x) / h;
    double g = std::exp(-0.5 * z * z);
    double r = std::exp(-z * delta - 0.5 * delta * delta);
    for (std::size_t j = j0; j <= j1; ++j) {
      pdf_[j] += g;
      dpdf_[j] -= z * g;
      ddpdf[j] += (z * z - 1.0) * g;
      g *= r;
      r *= q;
      z += delta;
    }
  }
  const double scale = kInvSqrt2Pi / (static_cast<double>(samples.size()) * h);
  for (std::size_t j = 0; j < n; ++j) {
    pdf_[j] *= scale;
    dpdf_[j] *= scale / h;
    ddpdf[j] *= scale / (h * h);
  }
  // CDF by exact quintic Hermite integration of the PDF between nodes.
  const double s1 = step_ / 2.0;
  const double s2 = step_ * step_ / 10.0;
  const double s3 = step_ * step_ * step_ / 120.0;
  for (std::size_t j = 1; j < n; ++j) {
    cdf_[j] = cdf_[j - 1] + s1 * (pdf_[j - 1] + pdf_[j]) + s2 * (dpdf_[j - 1] - dpdf_[j]) +
              s3 * (ddpdf[j - 1] + ddpdf[j]);
  }
  const double total = cdf_.back();
  for (double& c : cdf_) c /= total;
  norm_ = 1.0 / total;
}

namespace {

// Quintic Hermite interpolant on [0, 1] from values, first and second derivatives.
double hermite5(double t, double step, double y0, double y1, double d0, double d1, double c0, double c1) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double t4 = t3 * t;
  const double t5 = t4 * t;
  const double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
  const double h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
  const double h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
  const double h3 = 0.5 * (t3 - 2 * t4 + t5);
  const double h4 = -4 * t3 + 7 * t4 - 3 * t5;
  const double h5 = 1 - h0;
  return h0 * y0 + h5 * y1 + step * (h1 * d0 + h4 * d1) + step * step * (h2 * c0 + h3 * c1);
}

}  // namespace

double TabulatedKde::pdf(double x) const {
  const double pos = (x - lo_) / step_;
  if (!(pos >= 0.0) || pos >= static_cast<double>(cdf_.size() - 1)) return 0.0;
  const auto i = static_cast<std::size_t>(pos);
  const double t = pos - static_cast<double>(i);
  return std::max(0.0, hermite5(t, step_, pdf_[i], pdf_[i + 1], dpdf_[i], dpdf_[i + 1], ddpdf_[i], ddpdf_[i + 1]));
}

double TabulatedKde::cdf(double x) const {
  const double pos = (x - lo_) / step_;
  if (!(pos >= 0.0)) return std::isnan(x) ? x : 0.0;
  if (pos >= static_cast<double>(cdf_.size() - 1)) return 1.0;
  const auto i = static_cast<std::size_t>(pos);
  const double t = pos - static_cast<double>(i);
  const double c = hermite5(t, step_, cdf_[i], cdf_[i + 1], pdf_[i] * norm_, pdf_[i + 1] * norm_, dpdf_[i] * norm_,
                            dpdf_[i + 1] * norm_);
  return std::clamp(c, 0.0, 1.0);
}

nlohmann::json to_json(const KdeModel& model, bool quantize) {
  nlohmann::json j;
  j["bandwidth"] = model.bandwidth();
  if (!quantize) {
    j["samples"] = model.samples();
    return j;
  }
  const double lo = model.samples().front();
  const double hi = model.samples().back();
  const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
  std::vector<int> q;
  q.reserve(model.size());
  for (double x : model.samples()) q.push_back(static_cast<int>(std::lround((x - lo) * scale)));
  j["encoding"] = "q16";
  j["lo"] = lo;
  j["hi"] = hi;
  j["samples"] = q;
  return j;
}

KdeModel kde_model_from_json(const nlohmann::json& j) {
  try {
    const double h = j.at("bandwidth").get<double>();
    std::vector<double> samples;
    if (j.value("encoding", std::string("f64")) == "q16") {
      const double lo = j.at("lo").get<double>();
      const double hi = j.at("hi").get<double>();
      for (int q : j.at("samples").get<std::vector<int>>()) {
        if (q < 0 || q > 65535) throw DataError("kde model: q16 sample out of range");
        samples.push_back(lo + (hi - lo) * (q / 65535.0));
      }
    } else {
      samples = j.at("samples").get<std::vector<double>>();
    }
    return KdeModel(std::move(samples), h);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("kde model: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("kde model: ") + e.what());
  }
}

}  // namespace ccf
