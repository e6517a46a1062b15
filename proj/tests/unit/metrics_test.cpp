#include <gtest/gtest.h>

#include <random>

#include "direcnet/error.hpp"
#include "direcnet/metrics.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "reference_tables.hpp"

namespace direcnet {
namespace {

std::vector<double> one_hot_probs(const std::vector<std::int64_t>& predicted, std::size_t classes) {
  std::vector<double> p(predicted.size() * classes, 0.0);
  for (std::size_t i = 0; i < predicted.size(); ++i) p[i * classes + predicted[i]] = 1.0;
  return p;
}

MetricsReport single(const std::vector<std::int64_t>& truth, const std::vector<std::int64_t>& pred,
                     std::size_t classes) {
  const auto p = one_hot_probs(pred, classes);
  return single_label_metrics<double>(truth, p, classes);
}

TEST(SingleLabelMetrics, PerfectClassifier) {
  auto r = single({0, 1, 2, 2, 1}, {0, 1, 2, 2, 1}, 3);
  for (const auto& c : r.classes) EXPECT_EQ(c.f1, 1.0);
  EXPECT_EQ(r.weighted_f1, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
}

TEST(SingleLabelMetrics, HandComputedWeighting) {
  // Supports (3, 1); the lone class-1 sample goes to a third class, so the
  // per-class F1s are (1, 0) and the weighted F1 is 3/4.
  auto r = single({0, 0, 0, 1}, {0, 0, 0, 2}, 3);
  EXPECT_EQ(r.classes[0].f1, 1.0);
  EXPECT_EQ(r.classes[1].f1, 0.0);
  EXPECT_DOUBLE_EQ(r.weighted_f1, 0.75);
  // Everything predicted as class 0: P0 = 3/4, R0 = 1, F1 = 6/7.
  auto s = single({0, 0, 0, 1}, {0, 0, 0, 0}, 2);
  EXPECT_DOUBLE_EQ(s.classes[0].f1, 6.0 / 7.0);
  EXPECT_DOUBLE_EQ(s.weighted_f1, 0.75 * 6.0 / 7.0);
  EXPECT_EQ(s.classes[1].precision, 0.0) << "no predicted positives gives precision 0";
}

TEST(SingleLabelMetrics, ArgmaxTiesGoToLowestIndex) {
  const std::vector<float> row{0.3f, 0.3f, 0.3f, 0.1f};
  EXPECT_EQ(argmax<float>(row), 0u);
  const std::vector<double> p{0.25, 0.25, 0.25, 0.25};
  const std::vector<std::int64_t> truth{1};
  auto r = single_label_metrics<double>(truth, p, 4);
  EXPECT_EQ(r.accuracy, 0.0);
}

TEST(SingleLabelMetrics, MatchesBruteForceOracle) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = std::uniform_int_distribution<int>(1, 5)(rng);
    const int n = std::uniform_int_distribution<int>(1, 50)(rng);
    std::uniform_int_distribution<int> cls(0, k - 1);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::int64_t> truth(n);
    std::vector<double> probs(static_cast<std::size_t>(n * k));
    std::vector<int> t_int(n), p_int(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = t_int[i] = cls(rng);
      int best = 0;
      for (int c = 0; c < k; ++c) {
        probs[i * k + c] = u(rng);
        if (probs[i * k + c] > probs[i * k + best]) best = c;
      }
      p_int[i] = best;
    }
    const auto r = single_label_metrics<double>(truth, probs, k);
    ASSERT_NEAR(r.weighted_f1, oracle::weighted_f1_bruteforce(t_int, p_int, k), 1e-9) << "trial " << trial;
  }
}

TEST(SingleLabelMetrics, Errors) {
  const std::vector<std::int64_t> none;
  const std::vector<double> empty;
  EXPECT_THROW(single_label_metrics<double>(none, empty, 2), ContractError);
  const std::vector<std::int64_t> one{0};
  const std::vector<double> three{0.1, 0.2, 0.7};
  EXPECT_THROW(single_label_metrics<double>(one, three, 2), ContractError);
}

TEST(MultiLabelMetrics, ThresholdIsStrict) {
  const std::vector<std::uint8_t> y{1, 1, 0, 1, 0, 1};
  const std::vector<double> p(6, 0.5);
  auto r = multilabel_metrics<double>(y, p, 3, 0.5, {0, 1, 2});
  for (const auto& c : r.classes) {
    EXPECT_EQ(c.recall, 0.0);
    EXPECT_EQ(c.precision, 0.0);
    EXPECT_EQ(c.f1, 0.0);
  }
}

TEST(MultiLabelMetrics, CountsPerClassOverSubset) {
  // Four samples, four classes; only the first three classes are scored.
  const std::vector<std::uint8_t> y{1, 1, 0, 0,  //
                                    1, 0, 0, 1,  //
                                    0, 1, 1, 0,  //
                                    1, 0, 1, 0};
  const std::vector<double> p{0.9, 0.2, 0.1, 0.9,  //
                              0.8, 0.7, 0.2, 0.1,  //
                              0.1, 0.6, 0.9, 0.9,  //
                              0.3, 0.1, 0.6, 0.2};
  auto r = multilabel_metrics<double>(y, p, 4, 0.5, {0, 1, 2}, {"a", "b", "c", "d"});
  ASSERT_EQ(r.classes.size(), 3u);
  // Class a: tp 2, fn 1, fp 0.
  EXPECT_DOUBLE_EQ(r.classes[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(r.classes[0].recall, 2.0 / 3.0);
  // Class b: tp 1, fp 1, fn 1.
  EXPECT_DOUBLE_EQ(r.classes[1].f1, 0.5);
  // Class c: tp 2, fp 0, fn 0.
  EXPECT_DOUBLE_EQ(r.classes[2].f1, 1.0);
  for (const auto& c : r.classes) EXPECT_DOUBLE_EQ(c.f1, f1_from_pr(c.precision, c.recall));
  EXPECT_DOUBLE_EQ(r.average_f1, (0.8 + 0.5 + 1.0) / 3);
  // Exact match over the subset: only the third sample.
  EXPECT_DOUBLE_EQ(r.accuracy, 0.25);
}

TEST(MultiLabelMetrics, Errors) {
  const std::vector<std::uint8_t> y{1, 0};
  const std::vector<double> p{0.7, 0.2};
  EXPECT_THROW(multilabel_metrics<double>(y, p, 2, 1.0, {0}), ConfigError);
  EXPECT_THROW(multilabel_metrics<double>(y, p, 2, 0.5, {2}), ConfigError);
  EXPECT_THROW(multilabel_metrics<double>(y, p, 2, 0.5, {}), ConfigError);
}

TEST(F1FromPr, DefinitionAndZeroCase) {
  EXPECT_EQ(f1_from_pr(0, 0), 0.0);
  EXPECT_NEAR(f1_from_pr(1.0, 0.485), 0.653, 5e-4);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1);
  for (int i = 0; i < 100; ++i) {
    const double p = u(rng), r = u(rng);
    EXPECT_DOUBLE_EQ(f1_from_pr(p, r), 2 * p * r / (p + r));
  }
}

// Every reference per-class cell, except one that the table misprints: the
// GCVit XXtiny Earthquakes F1 is printed as 0.591 while its own P and R
// give 0.491, and the row average only works out with 0.491.
TEST(ReferenceMultiLabelTable, PerClassCellsFollowFromPrecisionAndRecall) {
  for (const auto& row : reference::multilabel_table()) {
    for (int c = 0; c < 3; ++c) {
      if (std::string(row.model) == "GCVit XXtiny" && c == 0) continue;
      const auto& cell = row.classes[c];
      EXPECT_NEAR(f1_from_pr(cell[0], cell[1]), cell[2], 1e-3) << row.model << " class " << c;
    }
  }
}

TEST(ReferenceMultiLabelTable, MisprintedCellIsInconsistentWithItsRow) {
  const auto& rows = reference::multilabel_table();
  const auto it = std::find_if(rows.begin(), rows.end(),
                               [](const auto& r) { return std::string(r.model) == "GCVit XXtiny"; });
  ASSERT_NE(it, rows.end());
  const double computed = f1_from_pr(it->classes[0][0], it->classes[0][1]);
  EXPECT_NEAR(computed, 0.4906, 1e-4);
  EXPECT_GT(std::abs(computed - it->classes[0][2]), 0.09);
  EXPECT_NEAR((computed + it->classes[1][2] + it->classes[2][2]) / 3, it->average, 1e-3);
}

TEST(ReferenceMultiLabelTable, AveragesOfComputedF1MatchAverageColumn) {
  for (const auto& row : reference::multilabel_table()) {
    double sum = 0;
    for (const auto& cell : row.classes) sum += f1_from_pr(cell[0], cell[1]);
    EXPECT_NEAR(sum / 3, row.average, 1e-3) << row.model;
  }
  EXPECT_NEAR((0.754 + 0.438 + 0.649) / 3, 0.614, 1e-3);
}

TEST(MetricsReport, CsvAndJson) {
  auto r = single({0, 0, 0, 1}, {0, 0, 0, 2}, 3);
  const auto csv = metrics_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "class,precision,recall,f1,support");
  EXPECT_NE(csv.find("class0,1.000,1.000,1.000,3\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("weighted average,"), std::string::npos);
  EXPECT_NE(csv.find("accuracy,,,0.750,4\n"), std::string::npos) << csv;
  const auto j = nlohmann::json::parse(metrics_json(r));
  EXPECT_EQ(j["mode"], "single");
  EXPECT_DOUBLE_EQ(j["weighted_f1"].get<double>(), 0.75);
  EXPECT_EQ(j["classes"].size(), 3u);
}

}  // namespace
}  // namespace direcnet
