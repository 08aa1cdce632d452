#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccf/copula.hpp"
#include "ccf/fitting.hpp"
#include "ccf/kde.hpp"
#include "ccf/tensor.hpp"

namespace ccf {

struct BuildSettings {
  std::size_t max_pixels_per_class = 100000;
  std::size_t min_pixels = 500;
  std::optional<CopulaFamily> forced_family;
  Criterion criterion = Criterion::AIC;
  std::vector<CopulaFamily> candidates{std::begin(kFittedFamilies), std::end(kFittedFamilies)};
  std::optional<double> bandwidth;  // overrides Silverman's rule
  std::vector<std::uint16_t> ignore;  // labels excluded besides 65535
  std::uint64_t seed = 42;

  bool ignored(std::uint16_t label) const;
  nlohmann::json to_json() const;
  static BuildSettings from_json(const nlohmann::json& j);
};

struct ClassModel {
  CopulaModel copula;
  std::vector<KdeModel> marginals;  // one per classifier
  double prior = 0.0;
  std::size_t pixels = 0;  // training pixels carrying this label
  std::size_t used = 0;    // rows kept after subsampling
  std::vector<std::string> warnings;
};

// Per-class copula + marginals + priors, with evaluation caches built once.
class ClassModelSet {
 public:
  ClassModelSet(int classifiers, std::vector<ClassModel> models, BuildSettings settings);

  int classes() const { return static_cast<int>(models_.size()); }
  int classifiers() const { return classifiers_; }
  const ClassModel& model(int cls) const { return models_.at(cls); }
  const std::vector<ClassModel>& models() const { return models_; }
  const BuildSettings& settings() const { return settings_; }
  std::string fingerprint() const;

  const PreparedCopula& copula(int cls) const { return copulas_[cls]; }
  const TabulatedKde& marginal(int cls, int classifier) const { return tables_[cls][classifier]; }

  // Same marginals and priors, class copulas replaced.
  ClassModelSet with_copulas(std::vector<CopulaModel> copulas) const;

 private:
  int classifiers_;
  std::vector<ClassModel> models_;
  BuildSettings settings_;
  std::vector<PreparedCopula> copulas_;
  std::vector<std::vector<TabulatedKde>> tables_;
};

// prior[m] = (count_m + alpha) / (N + alpha * M); ignore pixels excluded.
std::vector<double> estimate_priors(std::span<const LabelMap> gt, int classes,
                                    std::span<const std::uint16_t> ignore = {}, double alpha = 1.0);

struct ClassModelBuild {
  ClassModelSet models;
  std::vector<std::optional<SelectionReport>> selections;  // empty for fallback classes
};

ClassModelBuild build_class_models_with_reports(const Dataset& train, const BuildSettings& settings);
ClassModelSet build_class_models(const Dataset& train, const BuildSettings& settings);

// Replaces every fitted class's copula by its fit for `family`, giving the
// single-family configuration. Fallback classes, and classes where that
// family's fit failed, use the independence copula.
ClassModelSet with_single_family(const ClassModelBuild& build, CopulaFamily family);

struct PixelFusion {
  int label = 0;
  Eigen::VectorXd posterior;  // normalized
  bool fallback = false;
};

// scores is L x M: row i holds classifier i's scores for this pixel.
PixelFusion fuse_pixel(const ClassModelSet& models, const Eigen::Ref<const Eigen::MatrixXd>& scores);

struct FusedResult {
  LabelMap labels;
  std::optional<BeliefTensor> scores;
  std::size_t fallback_pixels = 0;
};

FusedResult fuse_dataset(const ClassModelSet& models, std::span<const BeliefTensor> inputs, bool with_scores = false);

nlohmann::json to_json(const ClassModelSet& models, bool quantize_samples = false);
ClassModelSet class_model_set_from_json(const nlohmann::json& j);

}  // namespace ccf
