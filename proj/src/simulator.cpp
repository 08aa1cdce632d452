#include "ccf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ccf/baselines.hpp"
#include "ccf/error.hpp"
#include "ccf/fusion.hpp"
#include "ccf/random.hpp"
#include "ccf/special.hpp"

namespace ccf {

namespace {

constexpr std::uint64_t kLabelStream = 1;
constexpr std::uint64_t kScoreStream = 2;
constexpr std::uint64_t kSplitStream = 3;

ClassSpec spec(CopulaModel copula, std::vector<double> quality) { return {std::move(copula), std::move(quality)}; }

LabelMap random_label_map(const ScenarioConfig& config, Rng& rng) {
  const int H = config.height;
  const int W = config.width;
  const int M = config.classes;
  LabelMap map(H, W, static_cast<std::uint16_t>(rng.below(M)));
  const int patches = 4 + static_cast<int>(rng.below(5));
  const int min_side = std::max(1, std::min(H, W) / 8);
  const int max_side = std::max(min_side, std::min(H, W) / 2);
  for (int k = 0; k < patches; ++k) {
    const auto cls = static_cast<std::uint16_t>(rng.below(M));
    const int h = min_side + static_cast<int>(rng.below(max_side - min_side + 1));
    const int w = min_side + static_cast<int>(rng.below(max_side - min_side + 1));
    const int y0 = static_cast<int>(rng.below(H));
    const int x0 = static_cast<int>(rng.below(W));
    for (int y = y0; y < std::min(H, y0 + h); ++y)
      for (int x = x0; x < std::min(W, x0 + w); ++x) map[Eigen::Index(y) * W + x] = cls;
  }
  return map;
}

// Off-class shares: for true class m and classifier i, how 1 - s is split
// over the other classes. Symmetric Dirichlet, drawn once per seed.
std::vector<std::vector<std::vector<double>>> off_class_split(const ScenarioConfig& config) {
  const int M = config.classes;
  std::vector<std::vector<std::vector<double>>> split(M, std::vector<std::vector<double>>(config.classifiers));
  for (int m = 0; m < M; ++m) {
    for (int i = 0; i < config.classifiers; ++i) {
      Rng rng(derive_seed(config.seed, {kSplitStream, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(i)}));
      std::vector<double> share(M, 0.0);
      double total = 0.0;
      for (int c = 0; c < M; ++c) {
        if (c == m) continue;
        share[c] = rng.gamma(config.split_concentration);
        total += share[c];
      }
      if (M > 1)
        for (double& v : share) v /= total;
      split[m][i] = std::move(share);
    }
  }
  return split;
}

CopulaModel copula_from_json(const nlohmann::json& j, int dim) {
  const CopulaFamily family = parse_family(j.at("family").get<std::string>());
  switch (family) {
    case CopulaFamily::Independence:
      return CopulaModel::independence(dim);
    case CopulaFamily::Gaussian:
    case CopulaFamily::StudentT: {
      Eigen::MatrixXd sigma;
      if (j.contains("sigma")) {
        const auto flat = j.at("sigma").get<std::vector<double>>();
        if (flat.size() != std::size_t(dim) * dim) throw ConfigError("sigma must hold classifiers^2 entries");
        sigma = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(),
                                                                                                        dim, dim);
      } else {
        sigma = equicorrelation(dim, j.at("rho").get<double>());
      }
      if (family == CopulaFamily::Gaussian) return CopulaModel::gaussian(sigma);
      return CopulaModel::student_t(sigma, j.at("nu").get<double>());
    }
    default:
      return CopulaModel::archimedean(family, dim, j.at("theta").get<double>());
  }
}

nlohmann::json copula_to_json(const CopulaModel& model) {
  nlohmann::json j;
  j["family"] = std::string(to_string(model.family));
  if (is_elliptical(model.family)) {
    std::vector<double> flat;
    for (int r = 0; r < model.dim(); ++r)
      for (int c = 0; c < model.dim(); ++c) flat.push_back(model.params.sigma(r, c));
    j["sigma"] = flat;
    if (model.family == CopulaFamily::StudentT) j["nu"] = model.params.nu;
  } else if (is_archimedean(model.family)) {
    j["theta"] = model.params.theta;
  }
  return j;
}

LabelMap argmax_of(const BeliefTensor& t) { return argmax_labels(t); }

}  // namespace

void ScenarioConfig::validate() const {
  if (height < 1 || width < 1) throw ConfigError("scenario: height and width must be positive");
  if (classes < 2) throw ConfigError("scenario: need at least two classes");
  if (classifiers < 2) throw ConfigError("scenario: need at least two classifiers");
  if (images < 1) throw ConfigError("scenario: images must be positive");
  if (!(concentration > 0.0) || !std::isfinite(concentration)) throw ConfigError("scenario: concentration must be positive");
  if (!(split_concentration > 0.0) || !std::isfinite(split_concentration)) {
    throw ConfigError("scenario: split_concentration must be positive");
  }
  if (static_cast<int>(class_specs.size()) != classes) {
    throw ConfigError("scenario: " + std::to_string(class_specs.size()) + " class specs for " +
                      std::to_string(classes) + " classes");
  }
  for (int m = 0; m < classes; ++m) {
    const ClassSpec& s = class_specs[m];
    const std::string where = "scenario class " + std::to_string(m) + ": ";
    if (s.copula.dim() != classifiers) throw ConfigError(where + "copula dimension differs from classifier count");
    try {
      ccf::validate(s.copula);
      PreparedCopula check(s.copula);
    } catch (const Error& e) {
      throw ConfigError(where + e.what());
    }
    if (static_cast<int>(s.quality.size()) != classifiers) throw ConfigError(where + "one quality per classifier");
    for (double q : s.quality)
      if (!(q > 0.0 && q <= 1.0)) throw ConfigError(where + "quality must lie in (0, 1]");
  }
}

ScenarioConfig ScenarioConfig::default_scenario() {
  ScenarioConfig c;
  const int L = c.classifiers;
  c.class_specs = {
      spec(CopulaModel::clayton(L, 2.0), {0.75, 0.7, 0.8}),
      spec(CopulaModel::gaussian(L, 0.7), {0.7, 0.8, 0.75}),
      spec(CopulaModel::gumbel(L, 2.0), {0.8, 0.75, 0.7}),
      spec(CopulaModel::frank(L, 5.0), {0.7, 0.75, 0.8}),
  };
  return c;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  try {
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.classes = j.value("classes", c.classes);
    c.classifiers = j.value("classifiers", c.classifiers);
    c.images = j.value("images", c.images);
    c.seed = j.value("seed", c.seed);
    c.concentration = j.value("concentration", c.concentration);
    c.split_concentration = j.value("split_concentration", c.split_concentration);
    if (c.classifiers < 2) throw ConfigError("scenario: need at least two classifiers");
    for (const auto& cls : j.at("class_specs")) {
      ClassSpec s;
      s.copula = copula_from_json(cls, c.classifiers);
      const auto& q = cls.at("quality");
      if (q.is_array()) {
        s.quality = q.get<std::vector<double>>();
      } else {
        s.quality.assign(c.classifiers, q.get<double>());
      }
      c.class_specs.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const ScenarioConfig& config) {
  nlohmann::json j;
  j["height"] = config.height;
  j["width"] = config.width;
  j["classes"] = config.classes;
  j["classifiers"] = config.classifiers;
  j["images"] = config.images;
  j["seed"] = config.seed;
  j["concentration"] = config.concentration;
  j["split_concentration"] = config.split_concentration;
  j["class_specs"] = nlohmann::json::array();
  for (const auto& s : config.class_specs) {
    nlohmann::json e = copula_to_json(s.copula);
    e["quality"] = s.quality;
    j["class_specs"].push_back(std::move(e));
  }
  return j;
}

double quality_score(double u, double quality, double concentration) {
  if (quality >= 1.0) return 1.0;
  return beta_quantile(u, quality * concentration, (1.0 - quality) * concentration);
}

Dataset generate_split(const ScenarioConfig& config, int split) {
  config.validate();
  const int M = config.classes;
  const int L = config.classifiers;
  const auto shares = off_class_split(config);
  Dataset data;
  for (int n = 0; n < config.images; ++n) {
    const auto s = static_cast<std::uint64_t>(split);
    const auto image = static_cast<std::uint64_t>(n);
    Rng label_rng(derive_seed(config.seed, {kLabelStream, s, image}));
    LabelMap gt = random_label_map(config, label_rng);

    std::vector<BeliefTensor> tensors(L, BeliefTensor(config.height, config.width, M));
    for (int m = 0; m < M; ++m) {
      std::vector<Eigen::Index> pixels;
      for (Eigen::Index p = 0; p < gt.pixels(); ++p)
        if (gt[p] == m) pixels.push_back(p);
      if (pixels.empty()) continue;
      const ClassSpec& cs = config.class_specs[m];
      const Eigen::MatrixXd u = sample_copula(cs.copula, static_cast<Eigen::Index>(pixels.size()),
                                              derive_seed(config.seed, {kScoreStream, s, image, std::uint64_t(m)}));
      for (std::size_t k = 0; k < pixels.size(); ++k) {
        const Eigen::Index p = pixels[k];
        for (int i = 0; i < L; ++i) {
          const double score = quality_score(u(static_cast<Eigen::Index>(k), i), cs.quality[i], config.concentration);
          const std::vector<double>& share = shares[m][i];
          for (int c = 0; c < M; ++c) {
            tensors[i](p, c) = static_cast<float>(c == m ? score : (1.0 - score) * share[c]);
          }
        }
      }
    }
    data.images.push_back(std::move(tensors));
    data.labels.push_back(std::move(gt));
  }
  return data;
}

SyntheticData generate(const ScenarioConfig& config) { return {generate_split(config, 0), generate_split(config, 1)}; }

std::string_view method_name(Method method) {
  switch (method) {
    case Method::Proposed: return "Proposed";
    case Method::Gaussian: return "Gaussian";
    case Method::StudentT: return "Student-t";
    case Method::Clayton: return "Clayton";
    case Method::Frank: return "Frank";
    case Method::Gumbel: return "Gumbel";
    case Method::Lop: return "LOP";
    case Method::MajorityVote: return "Majority_voting";
    case Method::Logit: return "Logit";
    case Method::PerClassifier: return "per-classifier";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "proposed") return Method::Proposed;
  if (s == "gaussian") return Method::Gaussian;
  if (s == "student-t" || s == "studentt" || s == "t") return Method::StudentT;
  if (s == "clayton") return Method::Clayton;
  if (s == "frank") return Method::Frank;
  if (s == "gumbel") return Method::Gumbel;
  if (s == "lop") return Method::Lop;
  if (s == "mv" || s == "majority" || s == "majority_voting") return Method::MajorityVote;
  if (s == "logit") return Method::Logit;
  if (s == "per-classifier" || s == "classifiers") return Method::PerClassifier;
  throw UsageError("unknown method '" + std::string(name) + "'");
}

std::vector<Method> all_methods() {
  return {Method::Proposed, Method::Gaussian, Method::StudentT,     Method::Clayton, Method::Frank,
          Method::Gumbel,   Method::Lop,      Method::MajorityVote, Method::Logit,   Method::PerClassifier};
}

const BenchmarkRow& BenchmarkResult::row(std::string_view name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw UsageError("benchmark has no row '" + std::string(name) + "'");
}

BenchmarkResult run_benchmark(const ScenarioConfig& config, const std::vector<Method>& methods) {
  const SyntheticData data = generate(config);
  const Dataset& test = data.test;
  const int M = config.classes;
  const int L = config.classifiers;

  auto needs_models = [&] {
    for (Method m : methods)
      if (m <= Method::Gumbel) return true;
    return false;
  }();
  BuildSettings settings;
  settings.seed = config.seed;
  std::optional<ClassModelBuild> build;
  if (needs_models) build.emplace(build_class_models_with_reports(data.train, settings));

  BenchmarkResult result;
  result.seed = config.seed;
  if (build) {
    for (int m = 0; m < M; ++m) result.chosen_families.emplace_back(to_string(build->models.model(m).copula.family));
  }

  auto score = [&](std::string name, auto&& predict) {
    ConfusionMatrix cm(M);
    for (std::size_t n = 0; n < test.size(); ++n) cm.accumulate(predict(n), test.labels[n]);
    const MetricSummary s = summarize(cm);
    result.rows.push_back({std::move(name), s.oa, s.mean_ca, s.miou});
  };
  auto fused_with = [&](const ClassModelSet& models) {
    return [&models, &test](std::size_t n) { return fuse_dataset(models, test.images[n]).labels; };
  };

  for (Method method : methods) {
    const std::string name(method_name(method));
    switch (method) {
      case Method::Proposed:
        score(name, fused_with(build->models));
        break;
      case Method::Gaussian:
      case Method::StudentT:
      case Method::Clayton:
      case Method::Frank:
      case Method::Gumbel: {
        const CopulaFamily family = method == Method::Gaussian   ? CopulaFamily::Gaussian
                                    : method == Method::StudentT ? CopulaFamily::StudentT
                                    : method == Method::Clayton  ? CopulaFamily::Clayton
                                    : method == Method::Frank    ? CopulaFamily::Frank
                                                                 : CopulaFamily::Gumbel;
        const ClassModelSet single = with_single_family(*build, family);
        score(name, fused_with(single));
        break;
      }
      case Method::Lop:
        score(name, [&](std::size_t n) { return argmax_of(lop_fuse<float>(test.images[n])); });
        break;
      case Method::MajorityVote:
        score(name, [&](std::size_t n) { return majority_vote<float>(test.images[n]); });
        break;
      case Method::Logit:
        score(name, [&](std::size_t n) { return argmax_of(logit_fuse<float>(test.images[n])); });
        break;
      case Method::PerClassifier:
        for (int i = 0; i < L; ++i) {
          score("Classifier " + std::to_string(i + 1), [&](std::size_t n) { return argmax_of(test.images[n][i]); });
        }
        break;
    }
  }
  return result;
}

std::vector<BenchmarkRow> mean_rows(const std::vector<BenchmarkResult>& results) {
  if (results.empty()) return {};
  std::vector<BenchmarkRow> rows = results.front().rows;
  for (auto& r : rows) r.oa = r.mean_ca = r.miou = 0.0;
  for (const auto& res : results) {
    if (res.rows.size() != rows.size()) throw UsageError("mean_rows: results have different rows");
    for (std::size_t k = 0; k < rows.size(); ++k) {
      rows[k].oa += res.rows[k].oa;
      rows[k].mean_ca += res.rows[k].mean_ca;
      rows[k].miou += res.rows[k].miou;
    }
  }
  const double n = static_cast<double>(results.size());
  for (auto& r : rows) {
    r.oa /= n;
    r.mean_ca /= n;
    r.miou /= n;
  }
  return rows;
}

std::string benchmark_markdown(const std::vector<BenchmarkRow>& rows) {
  std::string out = "| Method | Overall Accuracy | Mean Accuracy | Mean IOU |\n|---|---:|---:|---:|\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "| %s | %.6f | %.6f | %.6f |\n", r.name.c_str(), r.oa, r.mean_ca, r.miou);
    out += buf;
  }
  return out;
}

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
  std::string out = "method,overall_accuracy,mean_accuracy,mean_iou\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f\n", r.name.c_str(), r.oa, r.mean_ca, r.miou);
    out += buf;
  }
  return out;
}

}  // namespace ccf
