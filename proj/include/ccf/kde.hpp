#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace ccf {

struct Bandwidth {
  double value = 0.0;
  bool fallback = false;  // zero-spread sample; value is kDegenerateBandwidth
};

inline constexpr double kDegenerateBandwidth = 1e-3;

// Silverman's rule of thumb: 0.9 * min(sd, IQR / 1.34) * k^(-1/5).
Bandwidth silverman_bandwidth(std::span<const double> samples);

// Gaussian-kernel density estimate over a fixed sample set.
class KdeModel {
 public:
  // Bandwidth from Silverman's rule. Requires at least two samples.
  explicit KdeModel(std::vector<double> samples);
  KdeModel(std::vector<double> samples, double bandwidth);

  // Single-sample model, used only to check the kernel formula.
  static KdeModel single_point_for_testing(double x, double bandwidth);

  const std::vector<double>& samples() const { return samples_; }  // sorted ascending
  double bandwidth() const { return bandwidth_; }
  bool bandwidth_fallback() const { return fallback_; }
  std::size_t size() const { return samples_.size(); }

  // Exact summation over samples within 8 bandwidths; beyond that a kernel
  // contributes below 1e-15 of its mass.
  double pdf(double x) const;
  double cdf(double x) const;
  double pdf_derivative(double x) const;

 private:
  KdeModel() = default;

  std::vector<double> samples_;
  double bandwidth_ = 0.0;
  bool fallback_ = false;
};

inline double kde_pdf(const KdeModel& model, double x) { return model.pdf(x); }
inline double kde_cdf(const KdeModel& model, double x) { return model.cdf(x); }

// Piecewise quintic Hermite tabulation of a KdeModel's CDF and PDF on a grid
// of spacing bandwidth / 16 spanning [min - 8h, max + 8h]. Node PDFs and their
// derivatives are exact kernel sums and node CDFs integrate them. PDF error is
// below 1e-7 relative wherever the density exceeds 1e-9 of its peak, CDF error
// below 1e-12 absolute. Used for bulk evaluation in fitting and fusion.
class TabulatedKde {
 public:
  explicit TabulatedKde(const KdeModel& model);

  double pdf(double x) const;
  double cdf(double x) const;
  double lo() const { return lo_; }
  double hi() const { return lo_ + step_ * (cdf_.size() - 1); }

 private:
  double lo_ = 0.0;
  double step_ = 1.0;
  std::vector<double> cdf_;
  std::vector<double> pdf_;
  std::vector<double> dpdf_;
  std::vector<double> ddpdf_;
  double norm_ = 1.0;  // cdf_ was divided by its raw total
};

// {"bandwidth": h, "samples": [...]} or, with quantize, the q16 variant
// {"bandwidth": h, "encoding": "q16", "lo": a, "hi": b, "samples": [ints]}.
nlohmann::json to_json(const KdeModel& model, bool quantize = false);
KdeModel kde_model_from_json(const nlohmann::json& j);

}  // namespace ccf
