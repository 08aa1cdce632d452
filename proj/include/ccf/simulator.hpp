#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccf/copula.hpp"
#include "ccf/metrics.hpp"
#include "ccf/tensor.hpp"

namespace ccf {

// Dependence and score quality of one class: the copula ties the L
// classifiers' correct-class scores together, quality[i] is classifier i's
// mean correct-class score (1 means a perfect classifier).
struct ClassSpec {
  CopulaModel copula;
  std::vector<double> quality;
};

struct ScenarioConfig {
  int height = 64;
  int width = 64;
  int classes = 4;
  int classifiers = 3;
  int images = 20;  // per split
  std::uint64_t seed = 42;
  double concentration = 10.0;
  // Symmetric Dirichlet parameter of the off-class split; larger is more even.
  double split_concentration = 1.0;
  std::vector<ClassSpec> class_specs;

  // Throws ConfigError on invalid counts, qualities or copula parameters.
  void validate() const;

  // Four classes with planted Clayton, Gaussian, Gumbel and Frank dependence.
  static ScenarioConfig default_scenario();
};

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& config);

// Correct-class score law: the Beta(q k, (1 - q) k) quantile of u.
double quality_score(double u, double quality, double concentration);

// Split 0 is train, 1 is test. Each image, class and split draws from its own
// derived stream, so images are independent of generation order.
Dataset generate_split(const ScenarioConfig& config, int split);

struct SyntheticData {
  Dataset train;
  Dataset test;
};
SyntheticData generate(const ScenarioConfig& config);

// Fusion methods a benchmark can run.
enum class Method { Proposed, Gaussian, StudentT, Clayton, Frank, Gumbel, Lop, MajorityVote, Logit, PerClassifier };

std::string_view method_name(Method method);  // row label
Method parse_method(std::string_view name);
std::vector<Method> all_methods();

struct BenchmarkRow {
  std::string name;
  double oa = 0.0;
  double mean_ca = 0.0;
  double miou = 0.0;
};

struct BenchmarkResult {
  std::uint64_t seed = 0;
  std::vector<BenchmarkRow> rows;
  std::vector<std::string> chosen_families;  // proposed model, per class

  const BenchmarkRow& row(std::string_view name) const;
};

// Trains class models on the train split, fuses the test split with each
// method and scores it. Deterministic per config.seed.
BenchmarkResult run_benchmark(const ScenarioConfig& config, const std::vector<Method>& methods);

// Row-wise mean over repeated results with the same rows.
std::vector<BenchmarkRow> mean_rows(const std::vector<BenchmarkResult>& results);

std::string benchmark_markdown(const std::vector<BenchmarkRow>& rows);
std::string benchmark_csv(const std::vector<BenchmarkRow>& rows);

}  // namespace ccf
