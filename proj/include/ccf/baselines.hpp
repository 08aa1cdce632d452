#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ccf/error.hpp"
#include "ccf/tensor.hpp"

namespace ccf {

inline constexpr double kLogitClamp = 1e-6;

class FusionWeights {
 public:
  // Nonnegative, summing to 1 within 1e-9.
  explicit FusionWeights(std::vector<double> w);
  static FusionWeights uniform(int classifiers);

  const std::vector<double>& values() const { return w_; }
  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }

 private:
  std::vector<double> w_;
};

namespace detail {

template <typename Scalar>
void check_aligned(std::span<const BasicBeliefTensor<Scalar>> tensors, const char* what) {
  if (tensors.empty()) throw UsageError(std::string(what) + ": no input tensors");
  for (std::size_t i = 1; i < tensors.size(); ++i) {
    if (!tensors[i].same_shape(tensors[0])) {
      throw UsageError(std::string(what) + ": tensor " + std::to_string(i) + " shape differs from tensor 0");
    }
  }
}

}  // namespace detail

// Linear opinion pool: p = sum_i w_i p_i.
template <typename Scalar>
BasicBeliefTensor<Scalar> lop_fuse(std::span<const BasicBeliefTensor<Scalar>> tensors, const FusionWeights& weights) {
  detail::check_aligned(tensors, "lop_fuse");
  if (weights.size() != tensors.size()) throw UsageError("lop_fuse: one weight per classifier required");
  const auto& ref = tensors[0];
  using Wide = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Wide acc = Wide::Zero(ref.pixels(), ref.classes());
  Wide lo = Wide::Constant(ref.pixels(), ref.classes(), std::numeric_limits<double>::infinity());
  Wide hi = -lo;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const Wide v = tensors[i].values().template cast<double>();
    acc += weights[i] * v;
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  // Rounding can step outside the inputs' range; equal inputs come back exactly.
  acc = acc.cwiseMax(lo).cwiseMin(hi);
  return BasicBeliefTensor<Scalar>(ref.height(), ref.width(), acc.template cast<Scalar>());
}

template <typename Scalar>
BasicBeliefTensor<Scalar> lop_fuse(std::span<const BasicBeliefTensor<Scalar>> tensors) {
  return lop_fuse(tensors, FusionWeights::uniform(static_cast<int>(tensors.size())));
}

// Plurality of per-classifier argmax votes. Ties among the top classes go to
// the class holding the highest single voter confidence, then the lowest index.
template <typename Scalar>
LabelMap majority_vote(std::span<const BasicBeliefTensor<Scalar>> tensors) {
  detail::check_aligned(tensors, "majority_vote");
  if (tensors.size() < 2) throw UsageError("majority_vote: need at least two classifiers");
  const auto& ref = tensors[0];
  const int M = ref.classes();
  LabelMap out(ref.height(), ref.width());
  std::vector<int> votes(M);
  std::vector<double> confidence(M);
  for (Eigen::Index p = 0; p < ref.pixels(); ++p) {
    std::fill(votes.begin(), votes.end(), 0);
    std::fill(confidence.begin(), confidence.end(), -1.0);
    for (const auto& t : tensors) {
      int best = 0;
      for (int c = 1; c < M; ++c)
        if (t(p, c) > t(p, best)) best = c;
      ++votes[best];
      confidence[best] = std::max(confidence[best], static_cast<double>(t(p, best)));
    }
    int winner = 0;
    for (int c = 1; c < M; ++c) {
      if (votes[c] > votes[winner] || (votes[c] == votes[winner] && confidence[c] > confidence[winner])) winner = c;
    }
    out[p] = static_cast<std::uint16_t>(winner);
  }
  return out;
}

// Geometric mean of odds raised to `a`, mapped back to a probability:
// sigmoid(a * mean_i logit(p_i)), scores clamped into (eps, 1 - eps).
template <typename Scalar>
BasicBeliefTensor<Scalar> logit_fuse(std::span<const BasicBeliefTensor<Scalar>> tensors, double a = 1.0) {
  detail::check_aligned(tensors, "logit_fuse");
  if (!(a > 0.0) || !std::isfinite(a)) throw UsageError("logit_fuse: exponent a must be positive");
  const auto& ref = tensors[0];
  BasicBeliefTensor<Scalar> out(ref.height(), ref.width(), ref.classes());
  const double inv_l = 1.0 / static_cast<double>(tensors.size());
  for (Eigen::Index p = 0; p < ref.pixels(); ++p) {
    for (int c = 0; c < ref.classes(); ++c) {
      double mean_logit = 0.0;
      for (const auto& t : tensors) {
        const double v = std::clamp(static_cast<double>(t(p, c)), kLogitClamp, 1.0 - kLogitClamp);
        mean_logit += std::log(v) - std::log1p(-v);
      }
      const double z = a * mean_logit * inv_l;
      out(p, c) = static_cast<Scalar>(z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)));
    }
  }
  return out;
}

}  // namespace ccf
