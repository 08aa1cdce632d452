#include "ccf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ccf/error.hpp"

namespace ccf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool skipped(std::uint16_t label, std::span<const std::uint16_t> ignore) {
  return label == kIgnoreLabel || std::find(ignore.begin(), ignore.end(), label) != ignore.end();
}

void require_counts(const ConfusionMatrix& cm, const char* what) {
  if (cm.total() == 0) throw UsageError(std::string(what) + ": confusion matrix is empty");
}

std::string fixed6(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int classes) {
  if (classes < 1) throw UsageError("confusion matrix: class count must be positive");
  counts_ = Counts::Zero(classes, classes);
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt, std::span<const std::uint16_t> ignore) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw UsageError("accumulate: prediction and ground truth shapes differ");
  }
  const int M = classes();
  for (Eigen::Index p = 0; p < gt.pixels(); ++p) {
    const std::uint16_t g = gt[p];
    const std::uint16_t q = pred[p];
    if (skipped(g, ignore) || skipped(q, ignore)) {
      ++ignored_;
      continue;
    }
    if (g >= M || q >= M) {
      throw DataError("label " + std::to_string(g >= M ? g : q) + " out of range (" + std::to_string(M) +
                      " classes) in " + (g >= M ? "ground truth" : "prediction") + " at pixel (" +
                      std::to_string(p / gt.width()) + ", " + std::to_string(p % gt.width()) + ")");
    }
    ++counts_(g, q);
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes() != classes()) throw UsageError("merge: class counts differ");
  counts_ += other.counts_;
  ignored_ += other.ignored_;
}

ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& gt, int classes,
                                 std::span<const std::uint16_t> ignore) {
  ConfusionMatrix cm(classes);
  cm.accumulate(pred, gt, ignore);
  return cm;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  require_counts(cm, "overall_accuracy");
  return 100.0 * static_cast<double>(cm.counts().trace()) / static_cast<double>(cm.total());
}

PerClassMetric class_accuracy(const ConfusionMatrix& cm, bool zero_absent) {
  require_counts(cm, "class_accuracy");
  PerClassMetric out;
  double sum = 0.0;
  int used = 0;
  for (int l = 0; l < cm.classes(); ++l) {
    const auto row = cm.row_sum(l);
    const double v = row > 0 ? static_cast<double>(cm.count(l, l)) / static_cast<double>(row) : kNaN;
    out.per_class.push_back(v);
    if (row > 0 || zero_absent) {
      sum += row > 0 ? v : 0.0;
      ++used;
    }
  }
  out.mean = 100.0 * sum / used;
  return out;
}

PerClassMetric iou(const ConfusionMatrix& cm, bool zero_absent) {
  require_counts(cm, "iou");
  PerClassMetric out;
  double sum = 0.0;
  int used = 0;
  for (int l = 0; l < cm.classes(); ++l) {
    const auto uni = cm.row_sum(l) + cm.col_sum(l) - cm.count(l, l);
    const double v = uni > 0 ? static_cast<double>(cm.count(l, l)) / static_cast<double>(uni) : kNaN;
    out.per_class.push_back(v);
    if (uni > 0 || zero_absent) {
      sum += uni > 0 ? v : 0.0;
      ++used;
    }
  }
  out.mean = sum / used;
  return out;
}

MetricSummary summarize(const ConfusionMatrix& cm, bool zero_absent) {
  MetricSummary s;
  s.oa = overall_accuracy(cm);
  s.ca = class_accuracy(cm, zero_absent);
  s.iou = iou(cm, zero_absent);
  s.mean_ca = s.ca.mean;
  s.miou = s.iou.mean;
  s.ignored = cm.ignored();
  return s;
}

double round6(double x) { return std::round(x * 1e6) / 1e6; }

nlohmann::json to_json(const MetricSummary& summary) {
  nlohmann::json j;
  j["oa"] = round6(summary.oa);
  j["mean_ca"] = round6(summary.mean_ca);
  j["miou"] = round6(summary.miou);
  j["ignored"] = summary.ignored;
  return j;
}

std::string per_class_csv(const MetricSummary& summary) {
  std::string out = "class,ca,iou\n";
  for (std::size_t l = 0; l < summary.ca.per_class.size(); ++l) {
    out += std::to_string(l) + "," + fixed6(summary.ca.per_class[l]) + "," + fixed6(summary.iou.per_class[l]) + "\n";
  }
  return out;
}

}  // namespace ccf
