#include "ccf/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "ccf/error.hpp"
#include "ccf/random.hpp"

namespace ccf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string pixel_name(Eigen::Index p, int width) {
  return "(" + std::to_string(p / width) + ", " + std::to_string(p % width) + ")";
}

// Training rows for one class: one column per classifier, one row per pixel
// whose ground truth is `cls`.
struct ClassRows {
  Eigen::MatrixXd rows;
  std::size_t total = 0;
};

ClassRows collect_class_rows(const Dataset& train, int cls, const BuildSettings& settings) {
  const int L = train.classifiers();
  std::size_t total = 0;
  for (const auto& gt : train.labels)
    for (Eigen::Index p = 0; p < gt.pixels(); ++p)
      if (gt[p] == cls) ++total;

  std::vector<std::size_t> keep;
  const std::size_t cap = settings.max_pixels_per_class;
  if (total > cap) {
    // Seeded partial Fisher-Yates over row ordinals, then sorted for a stable order.
    std::vector<std::size_t> ordinals(total);
    std::iota(ordinals.begin(), ordinals.end(), 0);
    Rng rng(derive_seed(settings.seed, {0x5ab5ULL, static_cast<std::uint64_t>(cls)}));
    for (std::size_t i = 0; i < cap; ++i) std::swap(ordinals[i], ordinals[i + rng.below(total - i)]);
    keep.assign(ordinals.begin(), ordinals.begin() + static_cast<std::ptrdiff_t>(cap));
    std::sort(keep.begin(), keep.end());
  }

  ClassRows out;
  out.total = total;
  out.rows.resize(static_cast<Eigen::Index>(keep.empty() ? total : keep.size()), L);
  std::size_t ordinal = 0;
  Eigen::Index row = 0;
  auto next_keep = keep.begin();
  for (std::size_t n = 0; n < train.size(); ++n) {
    const LabelMap& gt = train.labels[n];
    for (Eigen::Index p = 0; p < gt.pixels(); ++p) {
      if (gt[p] != cls) continue;
      const bool take = keep.empty() || (next_keep != keep.end() && *next_keep == ordinal);
      if (take) {
        for (int i = 0; i < L; ++i) out.rows(row, i) = train.images[n][i](p, cls);
        ++row;
        if (!keep.empty()) ++next_keep;
      }
      ++ordinal;
    }
  }
  return out;
}

KdeModel fit_marginal(const Eigen::Ref<const Eigen::MatrixXd>& rows, Eigen::Index column,
                      const BuildSettings& settings) {
  std::vector<double> samples(rows.col(column).data(), rows.col(column).data() + rows.rows());
  if (settings.bandwidth) return KdeModel(std::move(samples), *settings.bandwidth);
  return KdeModel(std::move(samples));
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_labels(const Dataset& data, const BuildSettings& settings) {
  const int M = data.classes();
  for (std::size_t n = 0; n < data.size(); ++n) {
    const LabelMap& gt = data.labels[n];
    for (Eigen::Index p = 0; p < gt.pixels(); ++p) {
      if (gt[p] >= M && !settings.ignored(gt[p])) {
        throw DataError("image " + std::to_string(n) + ": label " + std::to_string(gt[p]) + " >= class count " +
                        std::to_string(M) + " at pixel " + pixel_name(p, gt.width()));
      }
    }
  }
}

}  // namespace

void Dataset::check_consistent() const {
  if (images.size() != labels.size()) throw UsageError("dataset: image and label counts differ");
  if (images.empty()) throw UsageError("dataset is empty");
  const int L = classifiers();
  const BeliefTensor& ref = images.front().front();
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (static_cast<int>(images[n].size()) != L) {
      throw UsageError("dataset: image " + std::to_string(n) + " has a different classifier count");
    }
    for (const auto& t : images[n]) {
      if (t.classes() != ref.classes()) throw UsageError("dataset: image " + std::to_string(n) + " class count differs");
      if (t.height() != labels[n].height() || t.width() != labels[n].width()) {
        throw UsageError("dataset: image " + std::to_string(n) + " tensor and label shapes differ");
      }
      if (t.height() != images[n].front().height() || t.width() != images[n].front().width()) {
        throw UsageError("dataset: image " + std::to_string(n) + " classifier tensors differ in shape");
      }
    }
  }
}

bool BuildSettings::ignored(std::uint16_t label) const {
  return label == kIgnoreLabel || std::find(ignore.begin(), ignore.end(), label) != ignore.end();
}

nlohmann::json BuildSettings::to_json() const {
  nlohmann::json j;
  j["max_pixels_per_class"] = max_pixels_per_class;
  j["min_pixels"] = min_pixels;
  j["forced_family"] = forced_family ? nlohmann::json(std::string(to_string(*forced_family))) : nlohmann::json();
  j["criterion"] = std::string(to_string(criterion));
  std::vector<std::string> names;
  for (auto f : candidates) names.emplace_back(to_string(f));
  j["candidates"] = names;
  j["bandwidth"] = bandwidth ? nlohmann::json(*bandwidth) : nlohmann::json();
  j["ignore"] = ignore;
  j["seed"] = seed;
  return j;
}

BuildSettings BuildSettings::from_json(const nlohmann::json& j) {
  BuildSettings s;
  s.max_pixels_per_class = j.at("max_pixels_per_class").get<std::size_t>();
  s.min_pixels = j.at("min_pixels").get<std::size_t>();
  if (!j.at("forced_family").is_null()) s.forced_family = parse_family(j.at("forced_family").get<std::string>());
  s.criterion = parse_criterion(j.at("criterion").get<std::string>());
  s.candidates.clear();
  for (const auto& name : j.at("candidates")) s.candidates.push_back(parse_family(name.get<std::string>()));
  if (!j.at("bandwidth").is_null()) s.bandwidth = j.at("bandwidth").get<double>();
  s.ignore = j.at("ignore").get<std::vector<std::uint16_t>>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

ClassModelSet::ClassModelSet(int classifiers, std::vector<ClassModel> models, BuildSettings settings)
    : classifiers_(classifiers), models_(std::move(models)), settings_(std::move(settings)) {
  if (classifiers_ < 2) throw UsageError("class model set: need at least two classifiers");
  double prior_sum = 0.0;
  copulas_.reserve(models_.size());
  tables_.resize(models_.size());
  for (std::size_t m = 0; m < models_.size(); ++m) {
    const ClassModel& cm = models_[m];
    if (static_cast<int>(cm.marginals.size()) != classifiers_ || cm.copula.dim() != classifiers_) {
      throw DataError("class model " + std::to_string(m) + " is incomplete: expected " +
                      std::to_string(classifiers_) + " marginals and a copula of that dimension");
    }
    prior_sum += cm.prior;
    copulas_.emplace_back(cm.copula);
    for (const auto& kde : cm.marginals) tables_[m].emplace_back(kde);
  }
  if (std::fabs(prior_sum - 1.0) > 1e-9) throw DataError("class priors must sum to 1");
}

std::string ClassModelSet::fingerprint() const {
  const std::string basis = settings_.to_json().dump() + "|" + std::to_string(classes()) + "|" +
                            std::to_string(classifiers_);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(basis)));
  return buf;
}

ClassModelSet ClassModelSet::with_copulas(std::vector<CopulaModel> copulas) const {
  if (copulas.size() != models_.size()) throw UsageError("with_copulas: one copula per class required");
  std::vector<ClassModel> models = models_;
  for (std::size_t m = 0; m < models.size(); ++m) models[m].copula = std::move(copulas[m]);
  return ClassModelSet(classifiers_, std::move(models), settings_);
}

std::vector<double> estimate_priors(std::span<const LabelMap> gt, int classes, std::span<const std::uint16_t> ignore,
                                    double alpha) {
  if (classes < 1) throw UsageError("estimate_priors: class count must be positive");
  std::vector<double> counts(classes, 0.0);
  double total = 0.0;
  for (const auto& map : gt) {
    for (Eigen::Index p = 0; p < map.pixels(); ++p) {
      const std::uint16_t l = map[p];
      if (l == kIgnoreLabel || std::find(ignore.begin(), ignore.end(), l) != ignore.end()) continue;
      if (l >= classes) {
        throw DataError("estimate_priors: label " + std::to_string(l) + " >= class count at pixel " +
                        pixel_name(p, map.width()));
      }
      counts[l] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw UsageError("estimate_priors: no usable (non-ignored) pixels");
  std::vector<double> prior(classes);
  for (int m = 0; m < classes; ++m) prior[m] = (counts[m] + alpha) / (total + alpha * classes);
  return prior;
}

ClassModelBuild build_class_models_with_reports(const Dataset& train, const BuildSettings& settings) {
  train.check_consistent();
  const int L = train.classifiers();
  const int M = train.classes();
  if (L < 2) throw UsageError("build_class_models: need at least two classifiers, got " + std::to_string(L));
  check_labels(train, settings);
  const std::vector<double> priors = estimate_priors(train.labels, M, settings.ignore);

  std::vector<CopulaFamily> candidates = settings.candidates;
  if (settings.forced_family) candidates = {*settings.forced_family};
  if (candidates.empty()) throw UsageError("build_class_models: no candidate families");

  std::vector<ClassModel> models(M);
  std::vector<std::optional<SelectionReport>> selections(M);
  for (int m = 0; m < M; ++m) {
    ClassModel& cm = models[m];
    cm.prior = priors[m];
    const bool ignored_class = settings.ignored(static_cast<std::uint16_t>(m));
    ClassRows data = ignored_class ? ClassRows{} : collect_class_rows(train, m, settings);
    cm.pixels = data.total;
    cm.used = static_cast<std::size_t>(data.rows.rows());
    if (cm.used >= 2) {
      for (int i = 0; i < L; ++i) cm.marginals.push_back(fit_marginal(data.rows, i, settings));
    } else {
      // No data to smooth: a broad kernel over the score range.
      for (int i = 0; i < L; ++i) cm.marginals.emplace_back(std::vector<double>{0.0, 1.0}, 0.5);
      cm.warnings.emplace_back("fewer than 2 training pixels; marginals are a broad default");
    }
    for (int i = 0; i < L; ++i) {
      if (cm.marginals[i].bandwidth_fallback()) {
        cm.warnings.emplace_back("classifier " + std::to_string(i) + ": zero-spread scores, bandwidth fallback");
      }
    }
    cm.copula = CopulaModel::independence(L);
    if (cm.used < settings.min_pixels || cm.used < 10) {
      cm.warnings.emplace_back("only " + std::to_string(cm.used) + " usable pixels (< " +
                               std::to_string(settings.min_pixels) + "); independence copula used");
      continue;
    }
    std::vector<TabulatedKde> tables;
    for (const auto& kde : cm.marginals) tables.emplace_back(kde);
    const Eigen::MatrixXd u = pseudo_observations(data.rows, std::span<const TabulatedKde>(tables));
    try {
      SelectionReport report = select_family(u, candidates, settings.criterion);
      cm.copula = report.chosen_fit().model;
      for (const auto& failure : report.failures) {
        cm.warnings.push_back(std::string(to_string(failure.family)) + " fit failed: " + failure.reason);
      }
      selections[m] = std::move(report);
    } catch (const EstimationError& e) {
      cm.warnings.push_back(std::string("copula selection failed (") + e.what() + "); independence copula used");
    }
  }
  ClassModelSet set(L, std::move(models), settings);
  return {std::move(set), std::move(selections)};
}

ClassModelSet build_class_models(const Dataset& train, const BuildSettings& settings) {
  return build_class_models_with_reports(train, settings).models;
}

ClassModelSet with_single_family(const ClassModelBuild& build, CopulaFamily family) {
  std::vector<CopulaModel> copulas;
  for (int m = 0; m < build.models.classes(); ++m) {
    const auto& selection = build.selections[m];
    if (!selection) {
      copulas.push_back(build.models.model(m).copula);
      continue;
    }
    const FitReport* fit = selection->find(family);
    copulas.push_back(fit != nullptr ? fit->model : CopulaModel::independence(build.models.classifiers()));
  }
  return build.models.with_copulas(std::move(copulas));
}

namespace {

// Log posterior for every class at one pixel; `scores(i, c)` is classifier i's score for class c.
template <typename ScoreAt>
bool class_log_posteriors(const ClassModelSet& models, ScoreAt&& score_at, double* log_post) {
  const int L = models.classifiers();
  double u[16];
  std::vector<double> heap;
  double* uu = u;
  if (L > 16) {
    heap.resize(L);
    uu = heap.data();
  }
  bool any_finite = false;
  for (int c = 0; c < models.classes(); ++c) {
    double lp = std::log(models.model(c).prior);
    for (int i = 0; i < L && lp > kNegInf; ++i) {
      const TabulatedKde& marginal = models.marginal(c, i);
      const double x = score_at(i, c);
      lp += std::log(marginal.pdf(x));
      uu[i] = clamp_unit(marginal.cdf(x));
    }
    if (lp > kNegInf) lp += models.copula(c).log_density(std::span<const double>(uu, L));
    if (std::isnan(lp) || lp == std::numeric_limits<double>::infinity()) return false;
    log_post[c] = lp;
    any_finite = any_finite || lp > kNegInf;
  }
  return any_finite;
}

template <typename ScoreAt>
int lop_argmax(int classes, int classifiers, ScoreAt&& score_at) {
  int best = 0;
  double best_value = kNegInf;
  for (int c = 0; c < classes; ++c) {
    double sum = 0.0;
    for (int i = 0; i < classifiers; ++i) sum += score_at(i, c);
    if (sum > best_value) {
      best_value = sum;
      best = c;
    }
  }
  return best;
}

template <typename ScoreAt>
PixelFusion fuse_one(const ClassModelSet& models, ScoreAt&& score_at, std::vector<double>& log_post) {
  const int M = models.classes();
  PixelFusion out;
  out.posterior = Eigen::VectorXd::Zero(M);
  if (!class_log_posteriors(models, score_at, log_post.data())) {
    out.fallback = true;
    out.label = lop_argmax(M, models.classifiers(), score_at);
    double total = 0.0;
    for (int c = 0; c < M; ++c) {
      double sum = 0.0;
      for (int i = 0; i < models.classifiers(); ++i) sum += score_at(i, c);
      out.posterior[c] = sum;
      total += sum;
    }
    if (total > 0.0) out.posterior /= total;
    return out;
  }
  int best = 0;
  for (int c = 1; c < M; ++c)
    if (log_post[c] > log_post[best]) best = c;
  out.label = best;
  double total = 0.0;
  for (int c = 0; c < M; ++c) {
    out.posterior[c] = log_post[c] > kNegInf ? std::exp(log_post[c] - log_post[best]) : 0.0;
    total += out.posterior[c];
  }
  out.posterior /= total;
  return out;
}

}  // namespace

PixelFusion fuse_pixel(const ClassModelSet& models, const Eigen::Ref<const Eigen::MatrixXd>& scores) {
  if (scores.rows() != models.classifiers() || scores.cols() != models.classes()) {
    throw UsageError("fuse_pixel: expected a " + std::to_string(models.classifiers()) + "x" +
                     std::to_string(models.classes()) + " score matrix");
  }
  std::vector<double> log_post(models.classes());
  return fuse_one(models, [&](int i, int c) { return scores(i, c); }, log_post);
}

FusedResult fuse_dataset(const ClassModelSet& models, std::span<const BeliefTensor> inputs, bool with_scores) {
  if (static_cast<int>(inputs.size()) != models.classifiers()) {
    throw UsageError("fuse_dataset: model expects " + std::to_string(models.classifiers()) + " classifiers, got " +
                     std::to_string(inputs.size()));
  }
  const BeliefTensor& ref = inputs.front();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].same_shape(ref)) throw UsageError("fuse_dataset: tensor " + std::to_string(i) + " shape mismatch");
  }
  if (ref.classes() != models.classes()) {
    throw UsageError("fuse_dataset: tensors have " + std::to_string(ref.classes()) + " classes, model has " +
                     std::to_string(models.classes()));
  }
  FusedResult result;
  result.labels = LabelMap(ref.height(), ref.width());
  if (with_scores) result.scores.emplace(ref.height(), ref.width(), ref.classes());
  std::vector<double> log_post(models.classes());
  for (Eigen::Index p = 0; p < ref.pixels(); ++p) {
    const PixelFusion fused =
        fuse_one(models, [&](int i, int c) { return static_cast<double>(inputs[i](p, c)); }, log_post);
    result.labels[p] = static_cast<std::uint16_t>(fused.label);
    if (fused.fallback) ++result.fallback_pixels;
    if (with_scores) {
      for (int c = 0; c < models.classes(); ++c) (*result.scores)(p, c) = static_cast<float>(fused.posterior[c]);
    }
  }
  return result;
}

nlohmann::json to_json(const ClassModelSet& models, bool quantize_samples) {
  nlohmann::json j;
  j["format"] = "ccf-class-models";
  j["version"] = 1;
  j["classes"] = models.classes();
  j["classifiers"] = models.classifiers();
  j["seed"] = models.settings().seed;
  j["settings"] = models.settings().to_json();
  j["fingerprint"] = models.fingerprint();
  j["models"] = nlohmann::json::array();
  for (int m = 0; m < models.classes(); ++m) {
    const ClassModel& cm = models.model(m);
    nlohmann::json entry;
    entry["class"] = m;
    entry["prior"] = cm.prior;
    entry["pixels"] = cm.pixels;
    entry["used"] = cm.used;
    entry["warnings"] = cm.warnings;
    entry["copula"] = to_json(cm.copula);
    entry["marginals"] = nlohmann::json::array();
    for (const auto& kde : cm.marginals) entry["marginals"].push_back(to_json(kde, quantize_samples));
    j["models"].push_back(std::move(entry));
  }
  return j;
}

ClassModelSet class_model_set_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "ccf-class-models") throw DataError("not a class model file");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported class model file version");
    const int L = j.at("classifiers").get<int>();
    std::vector<ClassModel> models;
    for (const auto& entry : j.at("models")) {
      ClassModel cm;
      cm.prior = entry.at("prior").get<double>();
      cm.pixels = entry.at("pixels").get<std::size_t>();
      cm.used = entry.at("used").get<std::size_t>();
      cm.warnings = entry.at("warnings").get<std::vector<std::string>>();
      cm.copula = copula_model_from_json(entry.at("copula"));
      for (const auto& k : entry.at("marginals")) cm.marginals.push_back(kde_model_from_json(k));
      models.push_back(std::move(cm));
    }
    if (static_cast<int>(models.size()) != j.at("classes").get<int>()) throw DataError("class count mismatch");
    return ClassModelSet(L, std::move(models), BuildSettings::from_json(j.at("settings")));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("class model file: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("class model file: ") + e.what());
  }
}

}  // namespace ccf
