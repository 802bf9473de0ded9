// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   metrics.hpp
 * @brief  Per-hallmark binary evaluation: accuracy, two-class macro
 *         precision/recall/F1, ROC-AUC, and the averaged report table.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hallmark/errors.hpp"

namespace hallmark {

inline constexpr double decision_threshold = 0.5;

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts &, const ConfusionCounts &) = default;
};

/// Positive prediction iff score >= threshold.
template <typename S>
ConfusionCounts confusion(std::span<const S> scores, std::span<const std::uint8_t> labels,
                          double threshold = decision_threshold) {
  if (scores.size() != labels.size()) {
    throw DataError("confusion: " + std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = static_cast<double>(scores[i]) >= threshold;
    const bool truth = labels[i] != 0;
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace detail {
inline double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
inline double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }
} // namespace detail

struct MacroPRF {
  double precision;
  double recall;
  double f1;
};

/// Unweighted mean over the positive and negative class of one binary task.
/// 0/0 ratios count as 0.
inline MacroPRF binary_macro_prf(const ConfusionCounts &c) {
  const double pp = detail::ratio(c.tp, c.tp + c.fp);
  const double pr = detail::ratio(c.tp, c.tp + c.fn);
  const double np = detail::ratio(c.tn, c.tn + c.fn);
  const double nr = detail::ratio(c.tn, c.tn + c.fp);
  return {(pp + np) / 2.0, (pr + nr) / 2.0,
          (detail::harmonic(pp, pr) + detail::harmonic(np, nr)) / 2.0};
}

inline double accuracy(const ConfusionCounts &c) {
  if (c.total() == 0) throw DataError("accuracy: no evaluated examples");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

/**
 * Mann-Whitney ROC-AUC: the fraction of (positive, negative) pairs where the
 * positive scores higher, ties counting one half. Sort-based, O(n log n).
 */
template <typename S>
double roc_auc(std::span<const S> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(static_cast<double>(scores[i])))
      throw DataError("roc_auc: non-finite score at index " + std::to_string(i));
    n_pos += labels[i] ? 1 : 0;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0) throw DataError("roc_auc: no positive labels; AUC undefined");
  if (n_neg == 0) throw DataError("roc_auc: no negative labels; AUC undefined");

  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Every term is a multiple of 1/2, so the sum is exact in double.
  double wins = 0.0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      labels[order[j]] ? ++pos : ++neg;
      ++j;
    }
    wins += static_cast<double>(pos) * static_cast<double>(neg_below) +
            0.5 * static_cast<double>(pos) * static_cast<double>(neg);
    neg_below += neg;
    i = j;
  }
  return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// One table row. Values are fractions in [0, 1]; auc is NaN when the split
/// held a single class for this hallmark.
struct MetricsRow {
  std::string name;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double auc = 0.0;

  friend bool operator==(const MetricsRow &, const MetricsRow &) = default;
};

inline MetricsRow evaluate_hallmark(std::string name, std::span<const double> scores,
                                    std::span<const std::uint8_t> labels) {
  const auto c = confusion(scores, labels);
  const auto prf = binary_macro_prf(c);
  MetricsRow row{std::move(name), accuracy(c), prf.precision, prf.recall, prf.f1,
                 std::numeric_limits<double>::quiet_NaN()};
  std::size_t pos = 0;
  for (auto y : labels) pos += y ? 1 : 0;
  if (pos > 0 && pos < labels.size()) row.auc = roc_auc(scores, labels);
  return row;
}

inline const std::vector<std::string> &report_columns() {
  static const std::vector<std::string> cols = {"Accuracy", "Macro-Precision",
                                                "Macro-Recall", "Macro-F1", "AUC"};
  return cols;
}

struct MetricsReport {
  std::vector<MetricsRow> rows; ///< per-hallmark rows
  MetricsRow average;           ///< column means over rows

  /// Aligned plain-text table in percent with two decimals.
  std::string to_text() const {
    std::size_t name_w = std::string("Hallmark").size();
    for (const auto &r : rows) name_w = std::max(name_w, r.name.size());
    name_w = std::max(name_w, average.name.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(name_w)) << "Hallmark";
    for (const auto &c : report_columns())
      os << "  " << std::right << std::setw(15) << c;
    os << '\n';
    auto line = [&](const MetricsRow &r) {
      os << std::left << std::setw(static_cast<int>(name_w)) << r.name;
      for (double v : values(r)) os << "  " << std::right << std::setw(15) << percent(v);
      os << '\n';
    };
    for (const auto &r : rows) line(r);
    line(average);
    return os.str();
  }

  /// Tab-separated: header row, one row per hallmark, then Average.
  std::string to_tsv() const {
    std::ostringstream os;
    os << "Hallmark";
    for (const auto &c : report_columns()) os << '\t' << c;
    os << '\n';
    auto line = [&](const MetricsRow &r) {
      os << r.name;
      for (double v : values(r)) os << '\t' << percent(v);
      os << '\n';
    };
    for (const auto &r : rows) line(r);
    line(average);
    return os.str();
  }

  static std::vector<double> values(const MetricsRow &r) {
    return {r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1, r.auc};
  }

  static std::string percent(double fraction) {
    if (std::isnan(fraction)) return "n/a";
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << fraction * 100.0;
    return os.str();
  }
};

/// Appends the Average row: the unweighted mean of each column. Rows whose
/// AUC is undefined are left out of the AUC mean only.
inline MetricsReport build_report(std::vector<MetricsRow> rows) {
  if (rows.empty()) throw DataError("build_report: no hallmark rows");
  MetricsRow avg{"Average"};
  std::size_t auc_rows = 0;
  double auc_sum = 0.0;
  for (const auto &r : rows) {
    avg.accuracy += r.accuracy;
    avg.macro_precision += r.macro_precision;
    avg.macro_recall += r.macro_recall;
    avg.macro_f1 += r.macro_f1;
    if (!std::isnan(r.auc)) {
      auc_sum += r.auc;
      ++auc_rows;
    }
  }
  const double n = static_cast<double>(rows.size());
  avg.accuracy /= n;
  avg.macro_precision /= n;
  avg.macro_recall /= n;
  avg.macro_f1 /= n;
  avg.auc = auc_rows ? auc_sum / static_cast<double>(auc_rows)
                     : std::numeric_limits<double>::quiet_NaN();
  return MetricsReport{std::move(rows), std::move(avg)};
}

} // namespace hallmark
