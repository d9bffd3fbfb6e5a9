/*
 * Copyright 2026 The riskboost Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskboost/error.hpp"

namespace riskboost::metrics {

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

// Cumulative counts after including every sample scoring >= a threshold,
// one entry per distinct score, thresholds descending.
struct ThresholdCounts {
  double threshold = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
};

namespace detail {

inline void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "scores and labels differ in length");
  for (double s : scores) {
    if (std::isnan(s)) throw MetricsError("NaN score");
  }
}

inline std::vector<ThresholdCounts> sweep(std::span<const double> scores, std::span<const int> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<ThresholdCounts> out;
  std::int64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      (labels[order[k]] == 1 ? tp : fp) += 1;
      ++k;
    }
    out.push_back({s, tp, fp});
  }
  return out;
}

inline void require_both_classes(std::span<const int> labels) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw MetricsError("both classes must be present");
  }
}

// Step integral sum_n (R_n - R_{n-1}) P_n over tie-grouped thresholds.
// Shared by auc_pr and the tuning objective so the two agree bit for bit.
inline double step_average_precision(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = sweep(scores, labels);
  const double positives = static_cast<double>(counts.back().tp);
  double ap = 0.0;
  std::int64_t prev_tp = 0;
  for (const auto& c : counts) {
    if (c.tp != prev_tp) {
      const double delta_recall = static_cast<double>(c.tp - prev_tp) / positives;
      const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
      ap += delta_recall * precision;
      prev_tp = c.tp;
    }
  }
  return ap;
}

}  // namespace detail

// (FPR, TPR) at every distinct threshold plus the (0,0) and (1,1) endpoints.
inline std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  detail::check_inputs(scores, labels);
  detail::require_both_classes(labels);
  const auto counts = detail::sweep(scores, labels);
  const double p = static_cast<double>(counts.back().tp);
  const double n = static_cast<double>(counts.back().fp);
  std::vector<CurvePoint> points{{0.0, 0.0}};
  for (const auto& c : counts) points.push_back({static_cast<double>(c.fp) / n, static_cast<double>(c.tp) / p});
  if (points.back() != CurvePoint{1.0, 1.0}) points.push_back({1.0, 1.0});
  return points;
}

// Trapezoidal area, accumulated on integer counts so it is exactly the
// Mann-Whitney statistic P(s+ > s-) + P(s+ == s-)/2.
inline double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_inputs(scores, labels);
  detail::require_both_classes(labels);
  const auto counts = detail::sweep(scores, labels);
  std::int64_t twice_area = 0;
  std::int64_t prev_tp = 0, prev_fp = 0;
  for (const auto& c : counts) {
    twice_area += (c.fp - prev_fp) * (c.tp + prev_tp);
    prev_tp = c.tp;
    prev_fp = c.fp;
  }
  const double pairs = static_cast<double>(counts.back().tp) * static_cast<double>(counts.back().fp);
  return static_cast<double>(twice_area) / (2.0 * pairs);
}

// (recall, precision) at every distinct threshold, starting from (0, 1).
inline std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const int> labels) {
  detail::check_inputs(scores, labels);
  detail::require_both_classes(labels);
  const auto counts = detail::sweep(scores, labels);
  const double p = static_cast<double>(counts.back().tp);
  std::vector<CurvePoint> points{{0.0, 1.0}};
  for (const auto& c : counts) {
    points.push_back({static_cast<double>(c.tp) / p,
                      static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)});
  }
  return points;
}

inline double auc_pr(std::span<const double> scores, std::span<const int> labels) {
  detail::check_inputs(scores, labels);
  detail::require_both_classes(labels);
  return detail::step_average_precision(scores, labels);
}

struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;
  double threshold = 0.5;

  std::int64_t total() const { return tp + fp + tn + fn; }
  double accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
  }
  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
};

inline double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

// A sample is predicted positive iff score >= threshold.
inline ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  detail::check_inputs(scores, labels);
  ConfusionMatrix m;
  m.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? m.tp : m.fn) += 1;
    } else {
      (predicted ? m.fp : m.tn) += 1;
    }
  }
  return m;
}

struct EvalReport {
  double auc_roc = 0.0;
  double auc_pr = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionMatrix confusion;
  std::vector<CurvePoint> roc_points;
  std::vector<CurvePoint> pr_points;
};

inline EvalReport summarize(std::span<const double> scores, std::span<const int> labels, double threshold) {
  EvalReport r;
  r.roc_points = roc_curve(scores, labels);
  r.pr_points = pr_curve(scores, labels);
  r.auc_roc = auc_roc(scores, labels);
  r.auc_pr = auc_pr(scores, labels);
  r.confusion = confusion_at(scores, labels, threshold);
  r.accuracy = r.confusion.accuracy();
  r.precision = r.confusion.precision();
  r.recall = r.confusion.recall();
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

// Checks whether reported precision/recall figures are consistent with a
// reported confusion matrix. Both derivations are kept; nothing is
// reconciled.
struct RateConsistency {
  ConfusionMatrix reported;
  double reported_precision = 0.0;
  double reported_recall = 0.0;
  double accuracy_from_counts = 0.0;
  double precision_from_counts = 0.0;
  double recall_from_counts = 0.0;
  double f1_from_counts = 0.0;
  double f1_from_rates = 0.0;
  std::int64_t implied_tp = 0;
  std::int64_t implied_fp = 0;
  std::int64_t implied_fn = 0;
  bool consistent = true;
  std::string note;
};

inline RateConsistency check_rate_consistency(const ConfusionMatrix& reported, double precision, double recall) {
  RateConsistency c;
  c.reported = reported;
  c.reported_precision = precision;
  c.reported_recall = recall;
  c.accuracy_from_counts = reported.accuracy();
  c.precision_from_counts = reported.precision();
  c.recall_from_counts = reported.recall();
  c.f1_from_counts = f1_score(c.precision_from_counts, c.recall_from_counts);
  c.f1_from_rates = f1_score(precision, recall);

  const std::int64_t positives = reported.tp + reported.fn;
  c.implied_tp = std::llround(recall * static_cast<double>(positives));
  c.implied_fn = positives - c.implied_tp;
  c.implied_fp = precision > 0.0
                     ? std::llround(static_cast<double>(c.implied_tp) * (1.0 - precision) / precision)
                     : 0;
  c.consistent = c.implied_tp == reported.tp && c.implied_fp == reported.fp && c.implied_fn == reported.fn;
  if (c.consistent) {
    c.note = "reported rates agree with the reported confusion matrix";
  } else {
    c.note = "reported rates imply TP=" + std::to_string(c.implied_tp) + ", FP=" + std::to_string(c.implied_fp) +
             ", FN=" + std::to_string(c.implied_fn) + " but the reported matrix has TP=" +
             std::to_string(reported.tp) + ", FP=" + std::to_string(reported.fp) +
             ", FN=" + std::to_string(reported.fn);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::ordered_json& j, const ConfusionMatrix& m) {
  j = {{"threshold", m.threshold}, {"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
}

inline void to_json(nlohmann::ordered_json& j, const EvalReport& r) {
  j = {{"auc_roc", r.auc_roc},     {"auc_pr", r.auc_pr}, {"accuracy", r.accuracy},
       {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1},
       {"confusion", r.confusion}};
}

inline void to_json(nlohmann::ordered_json& j, const RateConsistency& c) {
  j = {{"reported_confusion", c.reported},
       {"reported_precision", c.reported_precision},
       {"reported_recall", c.reported_recall},
       {"accuracy_from_counts", c.accuracy_from_counts},
       {"precision_from_counts", c.precision_from_counts},
       {"recall_from_counts", c.recall_from_counts},
       {"f1_from_counts", c.f1_from_counts},
       {"f1_from_rates", c.f1_from_rates},
       {"implied_tp", c.implied_tp},
       {"implied_fp", c.implied_fp},
       {"implied_fn", c.implied_fn},
       {"consistent", c.consistent},
       {"note", c.note}};
}

inline std::string curve_csv(const std::vector<CurvePoint>& points, const char* x_name, const char* y_name) {
  std::string out = std::string(x_name) + "," + y_name + "\n";
  for (const auto& p : points) {
    out += nlohmann::json(p.x).dump() + "," + nlohmann::json(p.y).dump() + "\n";
  }
  return out;
}

}  // namespace riskboost::metrics
