// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "hallmark/hallmark.hpp"

using namespace hallmark;

namespace {

double pairwise_auc(const std::vector<double> &s, const std::vector<std::uint8_t> &y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

double auc(const std::vector<double> &s, const std::vector<std::uint8_t> &y) {
  return roc_auc(std::span<const double>(s), std::span<const std::uint8_t>(y));
}

ConfusionCounts counts(const std::vector<double> &s, const std::vector<std::uint8_t> &y) {
  return confusion(std::span<const double>(s), std::span<const std::uint8_t>(y));
}

MetricsRow row(std::string name, double acc, double p, double r, double f, double a) {
  return {std::move(name), acc / 100, p / 100, r / 100, f / 100, a / 100};
}

std::vector<std::string> lines_of(const std::string &s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

} // namespace

TEST(Confusion, Examples) {
  EXPECT_EQ(counts({0.9, 0.1}, {1, 0}), (ConfusionCounts{1, 0, 0, 1}));
  EXPECT_EQ(counts({0.5}, {0}), (ConfusionCounts{0, 1, 0, 0}));
  EXPECT_EQ(counts({0.5}, {1}), (ConfusionCounts{1, 0, 0, 0}));
  EXPECT_THROW(counts({0.5, 0.2}, {1}), DataError);
}

TEST(Confusion, MatchesRecount) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(1000);
  std::vector<std::uint8_t> y(1000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    y[i] = rng() % 2;
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int cell = (s[i] >= 0.5 ? 2 : 0) + y[i];
    tp += cell == 3;
    fp += cell == 2;
    fn += cell == 1;
    tn += cell == 0;
  }
  const auto c = counts(s, y);
  EXPECT_EQ(c, (ConfusionCounts{tp, fp, fn, tn}));
  EXPECT_EQ(c.total(), 1000u);
}

TEST(MacroPRF, HandComputedFixture) {
  const ConfusionCounts c{8, 2, 1, 9};
  const auto m = binary_macro_prf(c);
  EXPECT_NEAR(m.precision, 0.85, 1e-12);
  EXPECT_NEAR(m.recall, (8.0 / 9.0 + 9.0 / 11.0) / 2.0, 1e-12);
  EXPECT_NEAR(m.recall, 0.8535, 1e-4);
  EXPECT_NEAR(m.f1, 0.8496, 1e-4);
  EXPECT_DOUBLE_EQ(accuracy(c), 0.85);
}

TEST(MacroPRF, DegenerateCases) {
  const auto perfect = binary_macro_prf({5, 0, 0, 7});
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  EXPECT_EQ(accuracy({5, 0, 0, 7}), 1.0);

  const auto all_pos = binary_macro_prf({6, 4, 0, 0});
  EXPECT_DOUBLE_EQ(all_pos.precision, 0.6 / 2.0);
  EXPECT_DOUBLE_EQ(all_pos.recall, 0.5);
  EXPECT_DOUBLE_EQ(all_pos.f1, (2.0 * 0.6 / 1.6) / 2.0);
  EXPECT_EQ(accuracy({0, 3, 4, 0}), 0.0);
  EXPECT_THROW(accuracy({}), DataError);
}

TEST(MacroPRF, MatchesRecountOracle) {
  std::mt19937_64 rng(2);
  auto safe = [](double a, double b) { return b == 0.0 ? 0.0 : a / b; };
  for (int i = 0; i < 500; ++i) {
    const ConfusionCounts c{rng() % 20, rng() % 20, rng() % 20, rng() % 20 + 1};
    const double tp = c.tp, fp = c.fp, fn = c.fn, tn = c.tn;
    const double p1 = safe(tp, tp + fp), r1 = safe(tp, tp + fn);
    const double p0 = safe(tn, tn + fn), r0 = safe(tn, tn + fp);
    const double f1 = safe(2 * p1 * r1, p1 + r1), f0 = safe(2 * p0 * r0, p0 + r0);
    const auto m = binary_macro_prf(c);
    EXPECT_DOUBLE_EQ(m.precision, (p1 + p0) / 2);
    EXPECT_DOUBLE_EQ(m.recall, (r1 + r0) / 2);
    EXPECT_DOUBLE_EQ(m.f1, (f1 + f0) / 2);
    EXPECT_DOUBLE_EQ(accuracy(c), (tp + tn) / (tp + fp + fn + tn));
  }
}

TEST(RocAuc, Examples) {
  EXPECT_EQ(auc({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}), 1.0);
  EXPECT_EQ(auc({0.9, 0.6, 0.4, 0.1}, {1, 0, 1, 0}), 0.75);
  EXPECT_EQ(auc({0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}), 0.5);
}

TEST(RocAuc, SingleClassIsAnError) {
  try {
    auc({0.1, 0.2}, {1, 1});
    FAIL() << "expected DataError";
  } catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("no negative"), std::string::npos);
  }
  EXPECT_THROW(auc({0.1, 0.2}, {0, 0}), DataError);
  EXPECT_THROW(auc({0.1}, {0, 1}), DataError);
}

TEST(RocAuc, ExactlyMatchesPairwiseOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 12) / 11.0; // coarse grid forces ties
      y[i] = rng() % 2;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(auc(s, y), pairwise_auc(s, y)) << "trial " << trial;
  }
}

TEST(RocAuc, ComplementAndMonotoneInvariance) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + rng() % 40;
    std::vector<double> s(n), neg(n), warped(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = g(rng);
      neg[i] = -s[i];
      warped[i] = std::exp(3.0 * s[i]) + s[i];
      y[i] = rng() % 2;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(auc(s, y) + auc(neg, y), 1.0, 1e-12);
    EXPECT_EQ(auc(s, y), auc(warped, y));
  }
}

TEST(Report, AverageRowAndLayout) {
  std::vector<MetricsRow> rows;
  for (std::size_t k = 0; k < n_hallmarks; ++k)
    rows.push_back(row(std::string(hallmarks[k].code), 90.0 + static_cast<double>(k), 80, 70, 75, 95));
  const auto rep = build_report(rows);
  EXPECT_NEAR(rep.average.accuracy, 0.945, 1e-12);
  const auto text = lines_of(rep.to_text());
  ASSERT_EQ(text.size(), 12u);
  EXPECT_EQ(text[11].rfind("Average", 0), 0u);
  const auto tsv = lines_of(rep.to_tsv());
  ASSERT_EQ(tsv.size(), 12u);
  EXPECT_EQ(tsv[0], "Hallmark\tAccuracy\tMacro-Precision\tMacro-Recall\tMacro-F1\tAUC");
  for (std::size_t i = 1; i < tsv.size(); ++i)
    EXPECT_EQ(std::count(tsv[i].begin(), tsv[i].end(), '\t'), 5);
  EXPECT_EQ(tsv[11], "Average\t94.50\t80.00\t70.00\t75.00\t95.00");
  for (const auto &l : text) EXPECT_EQ(l.size(), text[0].size());
}

TEST(Report, SmallExamples) {
  const auto one = build_report({row("PS", 91.25, 80, 70, 74.5, 88)});
  EXPECT_EQ(MetricsReport::values(one.average), MetricsReport::values(one.rows[0]));
  const auto two = build_report({row("A", 90, 50, 50, 50, 50), row("B", 100, 50, 50, 50, 50)});
  EXPECT_EQ(MetricsReport::percent(two.average.accuracy), "95.00");
  EXPECT_THROW(build_report({}), DataError);
}

TEST(Report, ReaveragesPublishedTable) {
  // Per-hallmark test-set rows of the published cased-model table.
  const std::vector<MetricsRow> rows = {
      row("PS", 93.44, 85.36, 91.56, 88.04, 96.97), row("GS", 98.09, 91.92, 90.04, 90.96, 98.87),
      row("CD", 99.18, 93.75, 99.57, 96.45, 99.82), row("RI", 99.18, 95.69, 97.53, 96.59, 98.44),
      row("A", 90.98, 79.57, 79.02, 79.29, 89.36),  row("IM", 92.62, 87.96, 87.52, 87.74, 95.96),
      row("GI", 96.17, 85.88, 92.06, 88.65, 96.02), row("TPI", 94.81, 91.77, 94.12, 92.87, 97.01),
      row("CE", 83.61, 78.00, 81.00, 79.23, 88.29), row("ID", 96.45, 91.76, 92.52, 92.14, 96.05)};
  const auto avg = build_report(rows).average;
  const std::vector<double> printed = {94.45, 88.17, 90.49, 89.20, 95.68};
  const auto got = MetricsReport::values(avg);
  for (std::size_t i = 0; i < printed.size(); ++i) EXPECT_NEAR(got[i] * 100, printed[i], 0.01);
}

TEST(Report, UndefinedAucIsShownAndSkipped) {
  const std::vector<double> scores = {0.7, 0.8, 0.2};
  const std::vector<std::uint8_t> labels = {1, 1, 1};
  const auto degenerate = evaluate_hallmark("X", scores, labels);
  EXPECT_TRUE(std::isnan(degenerate.auc));
  const auto rep = build_report({degenerate, row("Y", 100, 100, 100, 100, 80)});
  EXPECT_DOUBLE_EQ(rep.average.auc, 0.8);
  EXPECT_NE(rep.to_tsv().find("n/a"), std::string::npos);
}

TEST(Report, PercentagesStayInRange) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(40);
    std::vector<std::uint8_t> y(40);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = u(rng);
      y[i] = rng() % 2;
    }
    y[0] = 1;
    y[1] = 0;
    const auto r = evaluate_hallmark("H", s, y);
    for (double v : MetricsReport::values(r)) {
      const double pct = std::stod(MetricsReport::percent(v));
      EXPECT_GE(pct, 0.0);
      EXPECT_LE(pct, 100.0);
    }
  }
}
