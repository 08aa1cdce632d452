#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ccf/baselines.hpp"
#include "ccf/error.hpp"
#include "ccf/fitting.hpp"
#include "ccf/simulator.hpp"

using ccf::CopulaModel;
using ccf::Method;

namespace {

ccf::ScenarioConfig tiny(int images, std::uint64_t seed) {
  ccf::ScenarioConfig c = ccf::ScenarioConfig::default_scenario();
  c.images = images;
  c.seed = seed;
  return c;
}

std::vector<double> correct_scores(const ccf::Dataset& d, int cls, int classifier) {
  std::vector<double> out;
  for (std::size_t n = 0; n < d.size(); ++n)
    for (Eigen::Index p = 0; p < d.labels[n].pixels(); ++p)
      if (d.labels[n][p] == cls) out.push_back(d.images[n][classifier](p, cls));
  return out;
}

}  // namespace

TEST(Scenario, DefaultIsValid) {
  const auto c = ccf::ScenarioConfig::default_scenario();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.height, 64);
  EXPECT_EQ(c.classes, 4);
  EXPECT_EQ(c.classifiers, 3);
  EXPECT_EQ(c.images, 20);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.class_specs[0].copula.family, ccf::CopulaFamily::Clayton);
  EXPECT_EQ(c.class_specs[1].copula.family, ccf::CopulaFamily::Gaussian);
}

TEST(Scenario, ValidationErrors) {
  auto c = ccf::ScenarioConfig::default_scenario();
  c.images = 0;
  EXPECT_THROW(c.validate(), ccf::ConfigError);
  c = ccf::ScenarioConfig::default_scenario();
  c.class_specs[2].copula = CopulaModel::gumbel(3, 0.5);
  EXPECT_THROW(c.validate(), ccf::ConfigError);
  c = ccf::ScenarioConfig::default_scenario();
  c.class_specs[0].quality = {0.5, 1.2, 0.5};
  EXPECT_THROW(c.validate(), ccf::ConfigError);
  c = ccf::ScenarioConfig::default_scenario();
  c.class_specs.pop_back();
  EXPECT_THROW(c.validate(), ccf::ConfigError);
  c = ccf::ScenarioConfig::default_scenario();
  c.class_specs[1].copula = CopulaModel::gaussian(2, 0.5);
  EXPECT_THROW(c.validate(), ccf::ConfigError);
}

TEST(Scenario, JsonRoundTripAndErrors) {
  const auto c = ccf::ScenarioConfig::default_scenario();
  const nlohmann::json j = ccf::to_json(c);
  EXPECT_EQ(ccf::to_json(ccf::scenario_from_json(j)), j);

  const auto scalar = ccf::scenario_from_json(nlohmann::json::parse(R"({
    "classes": 2, "classifiers": 2, "images": 3,
    "class_specs": [{"family": "clayton", "theta": 1.5, "quality": 0.6},
                    {"family": "student-t", "rho": 0.3, "nu": 6, "quality": [0.7, 0.8]}]})"));
  EXPECT_EQ(scalar.class_specs[0].quality, (std::vector<double>{0.6, 0.6}));
  EXPECT_EQ(scalar.class_specs[1].copula.params.nu, 6.0);
  EXPECT_EQ(scalar.height, 64);

  EXPECT_THROW(ccf::scenario_from_json(nlohmann::json::parse(R"({"classes": 2})")), ccf::ConfigError);
  EXPECT_THROW(ccf::scenario_from_json(nlohmann::json::parse(
                   R"({"classes": 1, "class_specs": [{"family": "frank", "theta": 2, "quality": 0.5}]})")),
               ccf::ConfigError);
  EXPECT_THROW(ccf::scenario_from_json(nlohmann::json::parse(
                   R"({"classes": 2, "class_specs": [{"family": "bogus", "quality": 0.5},
                                                     {"family": "frank", "theta": 2, "quality": 0.5}]})")),
               ccf::ConfigError);
}

TEST(QualityScore, MonotoneWithMeanAtQuality) {
  EXPECT_EQ(ccf::quality_score(0.3, 1.0, 10.0), 1.0);
  double prev = 0.0;
  double mean = 0.0;
  const int n = 2000;
  for (int k = 0; k < n; ++k) {
    const double s = ccf::quality_score((k + 0.5) / n, 0.7, 10.0);
    EXPECT_GE(s, prev);
    prev = s;
    mean += s / n;
  }
  EXPECT_NEAR(mean, 0.7, 1e-3);
}

TEST(Generate, TensorInvariantsAndShapes) {
  const auto c = tiny(3, 81);
  const ccf::Dataset d = ccf::generate_split(c, 0);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_NO_THROW(d.check_consistent());
  for (std::size_t n = 0; n < d.size(); ++n) {
    ASSERT_EQ(d.images[n].size(), 3u);
    for (const auto& t : d.images[n]) {
      EXPECT_EQ(t.height(), 64);
      EXPECT_EQ(t.classes(), 4);
      EXPECT_NO_THROW(ccf::check_belief_tensor(t, "generated"));
      for (Eigen::Index p = 0; p < t.pixels(); ++p) EXPECT_NEAR(t.values().row(p).cast<double>().sum(), 1.0, 1e-6);
    }
  }
}

TEST(Generate, DeterministicPerSeedAndSplit) {
  const auto c = tiny(2, 82);
  const ccf::Dataset a = ccf::generate_split(c, 0);
  const ccf::Dataset b = ccf::generate_split(c, 0);
  const ccf::Dataset t = ccf::generate_split(c, 1);
  EXPECT_EQ(a.labels, b.labels);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(a.images[1][i].values() == b.images[1][i].values());
  EXPECT_FALSE(a.images[0][0].values() == t.images[0][0].values());

  // image n does not depend on how many images precede or follow it
  auto fewer = c;
  fewer.images = 1;
  EXPECT_EQ(ccf::generate_split(fewer, 0).labels[0], a.labels[0]);
}

TEST(Generate, SeedsDifferButStatisticsAgree) {
  const ccf::Dataset a = ccf::generate_split(tiny(6, 83), 0);
  const ccf::Dataset b = ccf::generate_split(tiny(6, 84), 0);
  EXPECT_FALSE(a.images[0][0].values() == b.images[0][0].values());
  for (int i = 0; i < 3; ++i) {
    for (const auto* d : {&a, &b}) {
      const auto s = correct_scores(*d, 2, i);
      double mean = 0.0;
      for (double x : s) mean += x / s.size();
      EXPECT_NEAR(mean, ccf::ScenarioConfig::default_scenario().class_specs[2].quality[i], 0.02);
    }
  }
}

TEST(Generate, PlantedClaytonTau) {
  ccf::ScenarioConfig c = tiny(8, 85);
  for (auto& s : c.class_specs) s = {CopulaModel::clayton(3, 2.0), {0.7, 0.7, 0.7}};
  const ccf::Dataset d = ccf::generate_split(c, 0);
  for (int m = 0; m < 4; ++m) {
    const auto x = correct_scores(d, m, 0);
    const auto y = correct_scores(d, m, 1);
    const auto z = correct_scores(d, m, 2);
    if (x.size() < 2000) continue;
    EXPECT_NEAR(ccf::kendall_tau(x, y), 0.5, 0.03);
    EXPECT_NEAR(ccf::kendall_tau(y, z), 0.5, 0.03);
    EXPECT_NEAR(ccf::kendall_tau(x, z), 0.5, 0.03);
  }
}

TEST(Generate, PerfectQualityGivesPerfectClassifiers) {
  ccf::ScenarioConfig c = tiny(2, 86);
  for (auto& s : c.class_specs) s = {CopulaModel::independence(3), {1.0, 1.0, 1.0}};
  const ccf::Dataset d = ccf::generate_split(c, 1);
  for (std::size_t n = 0; n < d.size(); ++n)
    for (const auto& t : d.images[n]) EXPECT_EQ(ccf::argmax_labels(t), d.labels[n]);

  const auto r = ccf::run_benchmark(c, {Method::Proposed, Method::Lop, Method::MajorityVote, Method::Logit});
  for (const auto& row : r.rows) EXPECT_EQ(row.oa, 100.0) << row.name;
}

TEST(Benchmark, PerClassifierRowsMatchStandaloneMetrics) {
  const auto c = tiny(2, 87);
  const auto r = ccf::run_benchmark(c, {Method::PerClassifier});
  ASSERT_EQ(r.rows.size(), 3u);
  const ccf::Dataset test = ccf::generate_split(c, 1);
  for (int i = 0; i < 3; ++i) {
    ccf::ConfusionMatrix cm(4);
    for (std::size_t n = 0; n < test.size(); ++n) cm.accumulate(ccf::argmax_labels(test.images[n][i]), test.labels[n]);
    EXPECT_EQ(r.rows[i].name, "Classifier " + std::to_string(i + 1));
    EXPECT_EQ(r.rows[i].oa, ccf::overall_accuracy(cm));
    EXPECT_EQ(r.rows[i].miou, ccf::iou(cm).mean);
  }
}

TEST(Benchmark, IdenticalClassifiersMakeBaselinesAgree) {
  ccf::ScenarioConfig same = tiny(2, 88);
  for (auto& s : same.class_specs) s = {CopulaModel::independence(3), {0.6, 0.6, 0.6}};
  const ccf::SyntheticData data = ccf::generate(same);
  ccf::Dataset test = data.test;
  for (auto& image : test.images)
    for (auto& t : image) t = image[0];
  for (std::size_t n = 0; n < test.size(); ++n) {
    const auto lop = ccf::argmax_labels(ccf::lop_fuse<float>(test.images[n]));
    const auto mv = ccf::majority_vote<float>(test.images[n]);
    const auto logit = ccf::argmax_labels(ccf::logit_fuse<float>(test.images[n]));
    const auto single = ccf::argmax_labels(test.images[n][0]);
    EXPECT_EQ(lop, single);
    EXPECT_EQ(mv, single);
    EXPECT_EQ(logit, single);
  }
}

TEST(Benchmark, RowsAndFormatting) {
  const auto c = tiny(2, 89);
  const auto r = ccf::run_benchmark(c, ccf::all_methods());
  ASSERT_EQ(r.rows.size(), 12u);
  EXPECT_EQ(r.rows[0].name, "Proposed");
  EXPECT_EQ(r.rows[2].name, "Student-t");
  EXPECT_EQ(r.chosen_families.size(), 4u);
  EXPECT_NO_THROW(r.row("Majority_voting"));
  EXPECT_THROW(r.row("nothing"), ccf::UsageError);
  for (const auto& row : r.rows) {
    EXPECT_GT(row.oa, 25.0);
    EXPECT_LE(row.oa, 100.0);
    EXPECT_LE(row.miou, 1.0);
  }

  const auto again = ccf::run_benchmark(c, ccf::all_methods());
  for (std::size_t k = 0; k < r.rows.size(); ++k) EXPECT_EQ(again.rows[k].oa, r.rows[k].oa);

  const auto mean = ccf::mean_rows({r, again});
  EXPECT_EQ(mean[0].oa, r.rows[0].oa);
  const std::string md = ccf::benchmark_markdown(mean);
  EXPECT_EQ(md.rfind("| Method | Overall Accuracy | Mean Accuracy | Mean IOU |\n", 0), 0u);
  EXPECT_NE(md.find("| LOP | "), std::string::npos);
  const std::string csv = ccf::benchmark_csv(mean);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
}

TEST(Methods, NamesParse) {
  for (Method m : ccf::all_methods()) {
    if (m == Method::PerClassifier) continue;
    EXPECT_EQ(ccf::parse_method(ccf::method_name(m)), m);
  }
  EXPECT_EQ(ccf::parse_method("mv"), Method::MajorityVote);
  EXPECT_THROW(ccf::parse_method("median"), ccf::UsageError);
}
