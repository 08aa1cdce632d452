#include "ccf/baselines.hpp"

#include <numeric>

namespace ccf {

FusionWeights::FusionWeights(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) throw UsageError("fusion weights: empty weight vector");
  for (double v : w_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError("fusion weights must be nonnegative and finite");
  }
  const double sum = std::accumulate(w_.begin(), w_.end(), 0.0);
  if (std::fabs(sum - 1.0) > 1e-9) throw UsageError("fusion weights must sum to 1 (got " + std::to_string(sum) + ")");
}

FusionWeights FusionWeights::uniform(int classifiers) {
  if (classifiers < 1) throw UsageError("fusion weights: classifier count must be positive");
  return FusionWeights(std::vector<double>(classifiers, 1.0 / classifiers));
}

}  // namespace ccf
