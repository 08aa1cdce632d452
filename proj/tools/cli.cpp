#include "ccf/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "ccf/baselines.hpp"
#include "ccf/error.hpp"
#include "ccf/fusion.hpp"
#include "ccf/io.hpp"
#include "ccf/metrics.hpp"
#include "ccf/simulator.hpp"

namespace ccf {

namespace {

std::string numbered(const std::string& stem, std::size_t n, const std::string& suffix = ".edc3") {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu", n);
  return stem + buf + suffix;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::logic_error&) {
      throw UsageError(std::string(flag) + ": cannot parse '" + item + "'");
    }
  }
  return out;
}

struct FitOptions {
  std::string manifest;
  std::string split = "train";
  std::string criterion = "aic";
  std::string family;
  std::size_t max_pixels = BuildSettings{}.max_pixels_per_class;
  std::size_t min_pixels = BuildSettings{}.min_pixels;
  std::uint64_t seed = 42;
  std::optional<double> bandwidth;
  std::string kde_encoding = "plain";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--manifest", manifest, "Dataset manifest JSON")->required();
    cmd->add_option("--split", split, "Manifest split to train on")->capture_default_str();
    cmd->add_option("--criterion", criterion, "Selection criterion: aic, bic or ll")->capture_default_str();
    cmd->add_option("--family", family, "Force one copula family for every class");
    cmd->add_option("--max-pixels", max_pixels, "Training pixels kept per class")->capture_default_str();
    cmd->add_option("--min-pixels", min_pixels, "Below this, a class uses the independence copula")
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    cmd->add_option("--bandwidth", bandwidth, "Fixed KDE bandwidth (default: Silverman's rule)");
    cmd->add_option("--kde-encoding", kde_encoding, "KDE samples in the model file: plain or q16")
        ->capture_default_str();
  }

  BuildSettings settings(const DatasetManifest& manifest) const {
    BuildSettings s;
    s.criterion = parse_criterion(criterion);
    if (!family.empty()) {
      s.forced_family = parse_family(family);
      if (*s.forced_family == CopulaFamily::Independence) s.candidates = {CopulaFamily::Independence};
    }
    if (max_pixels < 1) throw UsageError("--max-pixels must be positive");
    s.max_pixels_per_class = max_pixels;
    s.min_pixels = min_pixels;
    s.seed = seed;
    if (bandwidth && !(*bandwidth > 0.0)) throw UsageError("--bandwidth must be positive");
    s.bandwidth = bandwidth;
    s.ignore = manifest.ignore;
    return s;
  }

  bool quantize() const {
    if (kde_encoding == "plain") return false;
    if (kde_encoding == "q16") return true;
    throw UsageError("--kde-encoding must be plain or q16");
  }
};

void print_build_summary(const ClassModelBuild& build, std::ostream& out) {
  const ClassModelSet& models = build.models;
  for (int m = 0; m < models.classes(); ++m) {
    const ClassModel& cm = models.model(m);
    out << "class " << m << ": family=" << to_string(cm.copula.family) << " pixels=" << cm.pixels
        << " used=" << cm.used << " prior=" << cm.prior << "\n";
    for (const auto& w : cm.warnings) out << "  warning: " << w << "\n";
  }
}

nlohmann::json model_document(const ClassModelBuild& build, bool quantize) {
  return to_json(build.models, quantize);
}

int cmd_fit(const FitOptions& o, const std::string& out_path, std::ostream& out) {
  const DatasetManifest manifest = read_manifest(o.manifest);
  const BuildSettings settings = o.settings(manifest);
  const bool quantize = o.quantize();
  const Dataset train = load_split(manifest, o.split);
  const ClassModelBuild build = build_class_models_with_reports(train, settings);
  write_json(model_document(build, quantize), out_path);
  print_build_summary(build, out);
  out << "model written to " << out_path << "\n";
  return kExitOk;
}

int cmd_select(const FitOptions& o, const std::string& json_path, const std::string& csv_path,
               const std::string& out_path, std::ostream& out) {
  const DatasetManifest manifest = read_manifest(o.manifest);
  const BuildSettings settings = o.settings(manifest);
  const bool quantize = o.quantize();
  const Dataset train = load_split(manifest, o.split);
  const ClassModelBuild build = build_class_models_with_reports(train, settings);
  nlohmann::json reports = nlohmann::json::array();
  std::string csv = "class,family,ll,aic,bic,chosen\n";
  for (int m = 0; m < build.models.classes(); ++m) {
    const auto& sel = build.selections[m];
    if (!sel) {
      nlohmann::json j;
      j["class"] = m;
      j["chosen"] = std::string(to_string(build.models.model(m).copula.family));
      j["fits"] = nlohmann::json::array();
      j["warnings"] = build.models.model(m).warnings;
      reports.push_back(std::move(j));
      continue;
    }
    reports.push_back(to_json(*sel, m));
    csv += selection_csv_rows(*sel, m);
  }
  if (!json_path.empty()) write_json(reports, json_path);
  if (!csv_path.empty()) write_text(csv, csv_path);
  if (json_path.empty() && csv_path.empty()) out << csv;
  if (!out_path.empty()) {
    write_json(model_document(build, quantize), out_path);
    out << "model written to " << out_path << "\n";
  }
  print_build_summary(build, out);
  return kExitOk;
}

int cmd_fuse(const std::string& model_path, const std::string& manifest_path, const std::string& split,
             const std::string& out_dir, bool scores, std::ostream& out) {
  const ClassModelSet models = class_model_set_from_json(read_json(model_path));
  const DatasetManifest manifest = read_manifest(manifest_path);
  if (static_cast<int>(manifest.classifiers.size()) != models.classifiers() || manifest.classes != models.classes()) {
    throw UsageError(manifest_path + ": classifier or class count differs from model " + model_path);
  }
  const Dataset data = load_split(manifest, split);
  nlohmann::json summary;
  summary["images"] = data.size();
  summary["fallback_pixels"] = nlohmann::json::array();
  std::size_t total_fallback = 0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const FusedResult r = fuse_dataset(models, data.images[n], scores);
    write_label_map(r.labels, fs::path(out_dir) / numbered("pred", n));
    if (r.scores) write_belief_tensor(*r.scores, fs::path(out_dir) / numbered("fused", n));
    summary["fallback_pixels"].push_back(r.fallback_pixels);
    total_fallback += r.fallback_pixels;
  }
  summary["total_fallback_pixels"] = total_fallback;
  write_json(summary, fs::path(out_dir) / "summary.json");
  out << "fused " << data.size() << " images into " << out_dir << " (" << total_fallback << " fallback pixels)\n";
  return kExitOk;
}

int cmd_baseline(const std::string& method, const std::string& manifest_path, const std::string& split,
                 const std::string& out_dir, const std::string& weights_text, double logit_a, bool scores,
                 std::ostream& out) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const int L = static_cast<int>(manifest.classifiers.size());
  const FusionWeights weights =
      weights_text.empty() ? FusionWeights::uniform(L) : FusionWeights(parse_list<double>(weights_text, "--weights"));
  if (static_cast<int>(weights.size()) != L) throw UsageError("--weights: expected " + std::to_string(L) + " values");
  if (method != "lop" && method != "mv" && method != "logit") throw UsageError("--method must be lop, mv or logit");
  if (!(logit_a > 0.0)) throw UsageError("--logit-a must be positive");
  const Dataset data = load_split(manifest, split);
  for (std::size_t n = 0; n < data.size(); ++n) {
    std::span<const BeliefTensor> tensors(data.images[n]);
    std::optional<BeliefTensor> fused;
    LabelMap labels;
    if (method == "mv") {
      labels = majority_vote(tensors);
    } else {
      fused = method == "lop" ? lop_fuse(tensors, weights) : logit_fuse(tensors, logit_a);
      labels = argmax_labels(*fused);
    }
    write_label_map(labels, fs::path(out_dir) / numbered("pred", n));
    if (scores && fused) write_belief_tensor(*fused, fs::path(out_dir) / numbered("fused", n));
  }
  out << method << ": wrote " << data.size() << " label maps to " << out_dir << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& pred_dir, const std::string& manifest_path, const std::string& split,
             const std::string& json_path, const std::string& csv_path, bool per_image, const std::string& ignore_text,
             bool zero_absent, std::ostream& out) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  auto it = manifest.splits.find(split);
  if (it == manifest.splits.end() || it->second.empty()) {
    throw UsageError(manifest_path + ": no images in split '" + split + "'");
  }
  std::vector<std::uint16_t> ignore = manifest.ignore;
  for (auto v : parse_list<std::uint16_t>(ignore_text, "--ignore")) ignore.push_back(v);
  ConfusionMatrix total(manifest.classes);
  nlohmann::json images = nlohmann::json::array();
  for (std::size_t n = 0; n < it->second.size(); ++n) {
    const LabelMap gt = read_label_map(manifest.resolve(it->second[n].labels));
    const fs::path pred_path = fs::path(pred_dir) / numbered("pred", n);
    const LabelMap pred = read_label_map(pred_path);
    if (pred.height() != gt.height() || pred.width() != gt.width()) {
      throw DataError(pred_path.string() + ": shape differs from ground truth");
    }
    ConfusionMatrix cm(manifest.classes);
    cm.accumulate(pred, gt, ignore);
    total.merge(cm);
    if (per_image) {
      nlohmann::json j = cm.total() > 0 ? to_json(summarize(cm, zero_absent)) : nlohmann::json::object();
      j["image"] = n;
      images.push_back(std::move(j));
    }
  }
  const MetricSummary summary = summarize(total, zero_absent);
  nlohmann::json j = to_json(summary);
  if (per_image) j["per_image"] = std::move(images);
  if (!json_path.empty()) write_json(j, json_path);
  if (!csv_path.empty()) write_text(per_class_csv(summary), csv_path);
  out << j.dump(2) << "\n";
  return kExitOk;
}

ScenarioConfig load_scenario(const std::string& path, std::optional<std::uint64_t> seed) {
  ScenarioConfig config = path.empty() ? ScenarioConfig::default_scenario() : scenario_from_json(read_json(path));
  if (seed) config.seed = *seed;
  return config;
}

void write_split(const Dataset& data, const std::string& split, const fs::path& root, DatasetManifest& manifest) {
  auto& items = manifest.splits[split];
  for (std::size_t n = 0; n < data.size(); ++n) {
    SplitItem item;
    for (std::size_t i = 0; i < data.images[n].size(); ++i) {
      const fs::path rel = fs::path(split) / numbered("image", n, "_c" + std::to_string(i) + ".edc3");
      write_belief_tensor(data.images[n][i], root / rel);
      item.tensors.push_back(rel);
    }
    item.labels = fs::path(split) / numbered("labels", n);
    write_label_map(data.labels[n], root / item.labels);
    items.push_back(std::move(item));
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
                 std::ostream& out) {
  const ScenarioConfig config = load_scenario(config_path, seed);
  const SyntheticData data = generate(config);
  DatasetManifest manifest;
  for (int i = 0; i < config.classifiers; ++i) manifest.classifiers.push_back("classifier_" + std::to_string(i + 1));
  manifest.classes = config.classes;
  write_split(data.train, "train", out_dir, manifest);
  write_split(data.test, "test", out_dir, manifest);
  write_manifest(manifest, fs::path(out_dir) / "manifest.json");
  write_json(to_json(config), fs::path(out_dir) / "scenario.json");
  out << "wrote " << config.images << " train and " << config.images << " test images to " << out_dir << "\n";
  return kExitOk;
}

int cmd_benchmark(const std::string& config_path, std::optional<std::uint64_t> seed, int repeats,
                  const std::string& methods_text, const std::string& md_path, const std::string& csv_path,
                  std::ostream& out) {
  if (repeats < 1) throw UsageError("--repeats must be positive");
  const ScenarioConfig base = load_scenario(config_path, seed);
  std::vector<Method> methods;
  if (methods_text.empty()) {
    methods = all_methods();
  } else {
    std::stringstream ss(methods_text);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) methods.push_back(parse_method(item));
  }
  std::vector<BenchmarkResult> results;
  for (int r = 0; r < repeats; ++r) {
    ScenarioConfig config = base;
    config.seed = base.seed + static_cast<std::uint64_t>(r);
    results.push_back(run_benchmark(config, methods));
  }
  const auto rows = mean_rows(results);
  const std::string md = benchmark_markdown(rows);
  if (!md_path.empty()) write_text(md, md_path);
  if (!csv_path.empty()) write_text(benchmark_csv(rows), csv_path);
  out << md;
  return kExitOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const CapabilityError*>(&e)) {
    return kExitUsage;
  }
  return kExitData;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Class-specific copula fusion of segmentation classifiers", "ccfuse"};
  app.require_subcommand(1);

  FitOptions fit_opts;
  std::string out_path;
  auto* fit = app.add_subcommand("fit", "Build class models from a manifest split");
  fit_opts.add_to(fit);
  fit->add_option("--out", out_path, "Model file to write")->required();

  FitOptions sel_opts;
  std::string sel_json, sel_csv, sel_out;
  auto* select = app.add_subcommand("select", "Fit every family per class and report the selection");
  sel_opts.add_to(select);
  select->add_option("--json", sel_json, "Selection report JSON");
  select->add_option("--csv", sel_csv, "Selection report CSV");
  select->add_option("--out", sel_out, "Also write the chosen model file");

  std::string model_path, manifest_path, split = "test", out_dir;
  bool scores = false;
  auto* fuse = app.add_subcommand("fuse", "Fuse a manifest split with a model file");
  fuse->add_option("--model", model_path, "Model file")->required();
  fuse->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  fuse->add_option("--split", split, "Split to fuse")->capture_default_str();
  fuse->add_option("--out-dir", out_dir, "Output directory")->required();
  fuse->add_flag("--scores", scores, "Also write fused score tensors");

  std::string method, weights_text;
  double logit_a = 1.0;
  auto* baseline = app.add_subcommand("baseline", "Fuse with a baseline rule");
  baseline->add_option("--method", method, "lop, mv or logit")->required();
  baseline->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  baseline->add_option("--split", split, "Split to fuse")->capture_default_str();
  baseline->add_option("--out-dir", out_dir, "Output directory")->required();
  baseline->add_option("--weights", weights_text, "Comma-separated LOP weights summing to 1");
  baseline->add_option("--logit-a", logit_a, "Logit exponent")->capture_default_str();
  baseline->add_flag("--scores", scores, "Also write fused score tensors");

  std::string pred_dir, eval_json, eval_csv, ignore_text;
  bool per_image = false, zero_absent = false;
  auto* eval = app.add_subcommand("eval", "Score predicted label maps against ground truth");
  eval->add_option("--pred-dir", pred_dir, "Directory of pred_NNNN.edc3 files")->required();
  eval->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  eval->add_option("--split", split, "Split with the ground truth")->capture_default_str();
  eval->add_option("--json", eval_json, "Metrics JSON");
  eval->add_option("--csv", eval_csv, "Per-class CSV");
  eval->add_flag("--per-image", per_image, "Include per-image metrics in the JSON");
  eval->add_option("--ignore", ignore_text, "Comma-separated labels to exclude");
  eval->add_flag("--zero-absent", zero_absent, "Count classes absent from ground truth as 0");

  std::string config_path;
  std::optional<std::uint64_t> sim_seed;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("--config", config_path, "Scenario JSON (default: built-in scenario)");
  simulate->add_option("--out-dir", out_dir, "Output directory")->required();
  simulate->add_option("--seed", sim_seed, "Random seed (default 42)");

  int repeats = 1;
  std::string methods_text, md_path, bench_csv;
  auto* bench = app.add_subcommand("benchmark", "Compare fusion methods on synthetic data");
  bench->add_option("--config", config_path, "Scenario JSON (default: built-in scenario)");
  bench->add_option("--seed", sim_seed, "Random seed (default 42)");
  bench->add_option("--repeats", repeats, "Consecutive seeds to average")->capture_default_str();
  bench->add_option("--methods", methods_text, "Comma-separated methods (default: all)");
  bench->add_option("--markdown", md_path, "Markdown table output");
  bench->add_option("--csv", bench_csv, "CSV table output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  auto seed_of = [&]() -> std::uint64_t {
    if (*fit) return fit_opts.seed;
    if (*select) return sel_opts.seed;
    return sim_seed.value_or(42);
  };
  const std::string name = app.get_subcommands().front()->get_name();
  out << "ccfuse " << name << " (seed " << seed_of() << ")\n";
  try {
    if (*fit) return cmd_fit(fit_opts, out_path, out);
    if (*select) return cmd_select(sel_opts, sel_json, sel_csv, sel_out, out);
    if (*fuse) return cmd_fuse(model_path, manifest_path, split, out_dir, scores, out);
    if (*baseline) return cmd_baseline(method, manifest_path, split, out_dir, weights_text, logit_a, scores, out);
    if (*eval) return cmd_eval(pred_dir, manifest_path, split, eval_json, eval_csv, per_image, ignore_text,
                               zero_absent, out);
    if (*simulate) return cmd_simulate(config_path, out_dir, sim_seed, out);
    if (*bench) return cmd_benchmark(config_path, sim_seed, repeats, methods_text, md_path, bench_csv, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace ccf
