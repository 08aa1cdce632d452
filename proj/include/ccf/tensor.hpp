#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ccf/error.hpp"

namespace ccf {

inline constexpr std::uint16_t kIgnoreLabel = 65535;

// Per-pixel class scores of one classifier: an (H*W) x M row-major matrix,
// pixel index p = y * W + x.
template <typename Scalar>
class BasicBeliefTensor {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BasicBeliefTensor() = default;
  BasicBeliefTensor(int height, int width, int classes)
      : height_(height), width_(width), values_(Matrix::Zero(Eigen::Index(height) * width, classes)) {
    if (height < 1 || width < 1 || classes < 1) throw UsageError("belief tensor dimensions must be positive");
  }
  BasicBeliefTensor(int height, int width, Matrix values) : height_(height), width_(width), values_(std::move(values)) {
    if (values_.rows() != Eigen::Index(height) * width) throw UsageError("belief tensor: row count != height*width");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int classes() const { return static_cast<int>(values_.cols()); }
  Eigen::Index pixels() const { return values_.rows(); }

  Scalar& operator()(Eigen::Index pixel, int cls) { return values_(pixel, cls); }
  Scalar operator()(Eigen::Index pixel, int cls) const { return values_(pixel, cls); }
  const Matrix& values() const { return values_; }
  Matrix& values() { return values_; }

  bool same_shape(const BasicBeliefTensor& other) const {
    return height_ == other.height_ && width_ == other.width_ && classes() == other.classes();
  }
  template <typename Other>
  BasicBeliefTensor<Other> cast() const {
    return BasicBeliefTensor<Other>(height_, width_, values_.template cast<Other>());
  }

 private:
  int height_ = 0;
  int width_ = 0;
  Matrix values_;
};

using BeliefTensor = BasicBeliefTensor<float>;

class LabelMap {
 public:
  using Matrix = Eigen::Matrix<std::uint16_t, Eigen::Dynamic, 1>;

  LabelMap() = default;
  LabelMap(int height, int width, std::uint16_t fill = 0)
      : height_(height), width_(width), labels_(Matrix::Constant(Eigen::Index(height) * width, fill)) {
    if (height < 1 || width < 1) throw UsageError("label map dimensions must be positive");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  Eigen::Index pixels() const { return labels_.size(); }
  std::uint16_t& operator[](Eigen::Index pixel) { return labels_[pixel]; }
  std::uint16_t operator[](Eigen::Index pixel) const { return labels_[pixel]; }
  const Matrix& labels() const { return labels_; }
  Matrix& labels() { return labels_; }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.labels_ == b.labels_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  Matrix labels_;
};

// Argmax over classes per pixel; ties go to the lowest class index.
template <typename Scalar>
LabelMap argmax_labels(const BasicBeliefTensor<Scalar>& tensor) {
  LabelMap out(tensor.height(), tensor.width());
  for (Eigen::Index p = 0; p < tensor.pixels(); ++p) {
    int best = 0;
    for (int c = 1; c < tensor.classes(); ++c)
      if (tensor(p, c) > tensor(p, best)) best = c;
    out[p] = static_cast<std::uint16_t>(best);
  }
  return out;
}


// Checks the softmax invariants: every value in [0, 1] and every pixel's
// scores summing to 1 within 1e-3. Throws DataError naming `what` and the pixel.
template <typename Scalar>
void check_belief_tensor(const BasicBeliefTensor<Scalar>& tensor, const std::string& what) {
  for (Eigen::Index p = 0; p < tensor.pixels(); ++p) {
    double sum = 0.0;
    for (int c = 0; c < tensor.classes(); ++c) {
      const double v = tensor(p, c);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError(what + ": score outside [0, 1] at pixel (" + std::to_string(p / tensor.width()) + ", " +
                        std::to_string(p % tensor.width()) + ")");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-3) {
      throw DataError(what + ": scores do not sum to 1 at pixel (" + std::to_string(p / tensor.width()) + ", " +
                      std::to_string(p % tensor.width()) + ")");
    }
  }
}

// A labeled collection: images[n][i] is classifier i's tensor for image n.
struct Dataset {
  std::vector<std::vector<BeliefTensor>> images;
  std::vector<LabelMap> labels;

  std::size_t size() const { return images.size(); }
  int classifiers() const { return images.empty() ? 0 : static_cast<int>(images.front().size()); }
  int classes() const { return images.empty() || images.front().empty() ? 0 : images.front().front().classes(); }
  // Throws UsageError on inconsistent shapes.
  void check_consistent() const;
};

}  // namespace ccf
