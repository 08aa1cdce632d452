#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccf/tensor.hpp"

namespace ccf {

// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  using Counts = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ConfusionMatrix(int classes);

  int classes() const { return static_cast<int>(counts_.rows()); }
  const Counts& counts() const { return counts_; }
  std::uint64_t count(int gt, int pred) const { return counts_(gt, pred); }
  std::uint64_t ignored() const { return ignored_; }
  std::uint64_t total() const { return counts_.sum(); }
  std::uint64_t row_sum(int cls) const { return counts_.row(cls).sum(); }
  std::uint64_t col_sum(int cls) const { return counts_.col(cls).sum(); }

  // A pixel is skipped (and counted as ignored) when either label is 65535
  // or listed in `ignore`. Any other label >= M is a DataError.
  void accumulate(const LabelMap& pred, const LabelMap& gt, std::span<const std::uint16_t> ignore = {});
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    return a.ignored_ == b.ignored_ && a.counts_ == b.counts_;
  }

 private:
  Counts counts_;
  std::uint64_t ignored_ = 0;
};

ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& gt, int classes,
                                 std::span<const std::uint16_t> ignore = {});

// 100 * trace / total.
double overall_accuracy(const ConfusionMatrix& cm);

struct PerClassMetric {
  std::vector<double> per_class;  // fraction in [0, 1]; NaN where undefined
  double mean = 0.0;
};

// CA_l = n_ll / row_l. Classes without ground-truth pixels are left out of the
// mean unless zero_absent, which scores them 0. Mean is a percentage.
PerClassMetric class_accuracy(const ConfusionMatrix& cm, bool zero_absent = false);

// IOU_l = n_ll / (row_l + col_l - n_ll). Classes with an empty union are left
// out of the mean unless zero_absent. Mean is a fraction.
PerClassMetric iou(const ConfusionMatrix& cm, bool zero_absent = false);

struct MetricSummary {
  double oa = 0.0;
  double mean_ca = 0.0;
  double miou = 0.0;
  std::uint64_t ignored = 0;
  PerClassMetric ca;
  PerClassMetric iou;
};

MetricSummary summarize(const ConfusionMatrix& cm, bool zero_absent = false);

double round6(double x);
// {"oa", "mean_ca", "miou", "ignored"} rounded to 6 decimals.
nlohmann::json to_json(const MetricSummary& summary);
// "class,ca,iou" header then one row per class; undefined entries are empty.
std::string per_class_csv(const MetricSummary& summary);

}  // namespace ccf
