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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskboost/data.hpp"
#include "riskboost/error.hpp"
#include "riskboost/explain.hpp"
#include "riskboost/gbdt.hpp"
#include "riskboost/metrics.hpp"
#include "riskboost/stats.hpp"

namespace riskboost::erroranalysis {

struct OutcomePartition {
  std::vector<std::size_t> tp, fp, tn, fn;
  double threshold = 0.5;
};

// Same rule as metrics::confusion_at: positive iff score >= threshold.
inline OutcomePartition partition_outcomes(std::span<const double> scores, std::span<const int> labels,
                                           double threshold) {
  require(scores.size() == labels.size(), "scores and labels differ in length");
  OutcomePartition p;
  p.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? p.tp : p.fn).push_back(i);
    } else {
      (predicted ? p.fp : p.tn).push_back(i);
    }
  }
  return p;
}

struct TTestResult {
  std::size_t feature = 0;
  double mean_a = 0.0;  // false negatives
  double mean_b = 0.0;  // true positives
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  double p_bonferroni = 1.0;
  bool flagged = false;
  bool degenerate = false;
  std::optional<bool> selected;
};

struct FnTpReport {
  std::size_t n_fn = 0;
  std::size_t n_tp = 0;
  double alpha = 0.05;
  std::vector<TTestResult> tests;  // by p ascending, then feature index
};

// Welch test of every feature between the FN group (a) and the TP group (b).
// `selected`, when given, marks which features survived feature selection.
inline FnTpReport fn_vs_tp_report(const Cohort& cohort, const OutcomePartition& partition, double alpha = 0.05,
                                  std::optional<std::span<const std::size_t>> selected = std::nullopt) {
  if (partition.fn.size() < 2 || partition.tp.size() < 2) {
    throw AnalysisError("FN and TP groups need at least 2 members each (have " + std::to_string(partition.fn.size()) +
                        " FN, " + std::to_string(partition.tp.size()) +
                        " TP); lower the classification threshold to enlarge the TP group");
  }
  FnTpReport report;
  report.n_fn = partition.fn.size();
  report.n_tp = partition.tp.size();
  report.alpha = alpha;
  const double n_tests = static_cast<double>(cohort.n_features());
  std::vector<double> a(partition.fn.size()), b(partition.tp.size());
  for (std::size_t j = 0; j < cohort.n_features(); ++j) {
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = cohort.value(partition.fn[k], j);
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = cohort.value(partition.tp[k], j);
    const auto w = stats::welch_t_test(a, b);
    TTestResult r;
    r.feature = j;
    r.mean_a = w.mean_a;
    r.mean_b = w.mean_b;
    r.t_statistic = w.t_statistic;
    r.degrees_of_freedom = w.degrees_of_freedom;
    r.p_value = w.p_value;
    r.p_bonferroni = std::min(1.0, w.p_value * n_tests);
    r.flagged = w.p_value < alpha;
    r.degenerate = w.degenerate;
    if (selected) r.selected = std::find(selected->begin(), selected->end(), j) != selected->end();
    report.tests.push_back(r);
  }
  std::stable_sort(report.tests.begin(), report.tests.end(),
                   [](const TTestResult& x, const TTestResult& y) { return x.p_value < y.p_value; });
  return report;
}

struct Contributor {
  std::size_t feature = 0;
  std::string name;
  double value = 0.0;
  double attribution = 0.0;
};

struct FpCase {
  explain::Waterfall waterfall;
  double probability = 0.0;
  std::optional<Contributor> top_positive;
  std::optional<Contributor> top_negative;
};

// Waterfall of one false-positive sample plus its strongest positive and
// negative contributors.
inline FpCase fp_case_study(const gbdt::BoostedModel& model, const Cohort& cohort, const OutcomePartition& partition,
                            std::string_view sample_id, std::size_t top_k = 10) {
  if (partition.fp.empty()) throw AnalysisError("no false-positive cases at this threshold");
  const std::size_t row = cohort.find(sample_id);
  if (row >= cohort.size() || std::find(partition.fp.begin(), partition.fp.end(), row) == partition.fp.end()) {
    throw AnalysisError("sample '" + std::string(sample_id) + "' is not a false positive");
  }
  const auto x = cohort.row(row);
  const auto shap = explain::tree_shap(model, x);

  explain::AttributionSet single;
  single.base_value = shap.base_value;
  single.n_features = cohort.n_features();
  single.phi = shap.phi;
  single.margins = {gbdt::predict_margin(model, x)};
  single.sample_ids = {std::string(sample_id)};
  single.feature_names = cohort.feature_names();

  FpCase out;
  out.waterfall = explain::waterfall(single, sample_id, top_k);
  out.probability = gbdt::predict_proba(model, x);
  for (std::size_t j = 0; j < shap.phi.size(); ++j) {
    const Contributor c{j, cohort.feature_names()[j], x[j], shap.phi[j]};
    if (shap.phi[j] > 0.0 && (!out.top_positive || shap.phi[j] > out.top_positive->attribution)) out.top_positive = c;
    if (shap.phi[j] < 0.0 && (!out.top_negative || shap.phi[j] < out.top_negative->attribution)) out.top_negative = c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const TTestResult& r, const std::vector<std::string>& names) {
  nlohmann::ordered_json j = {{"feature", r.feature},
                              {"name", names[r.feature]},
                              {"mean_fn", r.mean_a},
                              {"mean_tp", r.mean_b},
                              {"t_statistic", r.t_statistic},
                              {"degrees_of_freedom", r.degrees_of_freedom},
                              {"p_value", r.p_value},
                              {"p_bonferroni_supplementary", r.p_bonferroni},
                              {"flagged", r.flagged},
                              {"degenerate", r.degenerate}};
  if (r.selected) j["selected"] = *r.selected;
  return j;
}

inline nlohmann::ordered_json to_json(const FnTpReport& report, const std::vector<std::string>& names) {
  nlohmann::ordered_json tests = nlohmann::ordered_json::array();
  for (const auto& t : report.tests) tests.push_back(to_json(t, names));
  return {{"test", "welch_two_sided"}, {"group_a", "false_negative"}, {"group_b", "true_positive"},
          {"n_fn", report.n_fn},        {"n_tp", report.n_tp},        {"alpha", report.alpha},
          {"tests", std::move(tests)}};
}

inline std::string to_csv(const FnTpReport& report, const std::vector<std::string>& names) {
  std::string out =
      "feature,name,mean_fn,mean_tp,t_statistic,degrees_of_freedom,p_value,p_bonferroni_supplementary,flagged,"
      "selected\n";
  for (const auto& r : report.tests) {
    out += std::to_string(r.feature) + "," + names[r.feature] + "," + nlohmann::json(r.mean_a).dump() + "," +
           nlohmann::json(r.mean_b).dump() + "," + nlohmann::json(r.t_statistic).dump() + "," +
           nlohmann::json(r.degrees_of_freedom).dump() + "," + nlohmann::json(r.p_value).dump() + "," +
           nlohmann::json(r.p_bonferroni).dump() + "," + (r.flagged ? "1" : "0") + "," +
           (r.selected ? (*r.selected ? "1" : "0") : "") + "\n";
  }
  return out;
}

inline nlohmann::ordered_json to_json(const FpCase& c) {
  auto contributor = [](const std::optional<Contributor>& x) {
    if (!x) return nlohmann::ordered_json(nullptr);
    return nlohmann::ordered_json{
        {"feature", x->feature}, {"name", x->name}, {"value", x->value}, {"attribution", x->attribution}};
  };
  return {{"waterfall", explain::to_json(c.waterfall)},
          {"probability", c.probability},
          {"top_positive", contributor(c.top_positive)},
          {"top_negative", contributor(c.top_negative)}};
}

}  // namespace riskboost::erroranalysis
