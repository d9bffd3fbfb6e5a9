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
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskboost/data.hpp"
#include "riskboost/error.hpp"
#include "riskboost/gbdt.hpp"
#include "riskboost/parallel.hpp"

namespace riskboost::explain {

struct ShapValues {
  double base_value = 0.0;
  std::vector<double> phi;
};

namespace detail {

// One element of the feature path in the polynomial-time TreeSHAP recursion.
// zero_fraction: share of cover that flows down this path when the feature
// is absent; one_fraction: 1 when x follows this path, else 0.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

inline void extend_path(std::vector<PathElement>& path, std::size_t depth, double zero_fraction,
                        double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) / d1;
    path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) / d1;
  }
}

inline void unwind_path(std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].weight;
  for (std::size_t i = depth; i-- > 0;) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next_one_portion * d1 / (static_cast<double>(i + 1) * one_fraction);
      next_one_portion = tmp - path[i].weight * zero_fraction * static_cast<double>(depth - i) / d1;
    } else {
      path[i].weight = path[i].weight * d1 / (zero_fraction * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total path weight with element `index` removed, without modifying path.
inline double unwound_path_sum(const std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].weight;
  double total = 0.0;
  for (std::size_t i = depth; i-- > 0;) {
    if (one_fraction != 0.0) {
      const double tmp = next_one_portion * d1 / (static_cast<double>(i + 1) * one_fraction);
      total += tmp;
      next_one_portion = path[i].weight - tmp * zero_fraction * static_cast<double>(depth - i) / d1;
    } else {
      total += path[i].weight / zero_fraction / (static_cast<double>(depth - i) / d1);
    }
  }
  return total;
}

inline void recurse(const gbdt::Tree& tree, std::span<const double> x, std::span<double> phi, int node_id,
                    const std::vector<PathElement>& parent_path, std::size_t depth, double zero_fraction,
                    double one_fraction, int feature) {
  std::vector<PathElement> path(parent_path.begin(), parent_path.begin() + static_cast<std::ptrdiff_t>(depth));
  path.resize(depth + 1);
  extend_path(path, depth, zero_fraction, one_fraction, feature);

  const auto& node = tree.nodes[node_id];
  if (node.is_leaf()) {
    for (std::size_t i = 1; i <= depth; ++i) {
      const double w = unwound_path_sum(path, depth, i);
      phi[path[i].feature] += w * (path[i].one_fraction - path[i].zero_fraction) * node.leaf;
    }
    return;
  }

  const int hot = x[node.feature] < node.threshold ? node.left : node.right;
  const int cold = hot == node.left ? node.right : node.left;
  const double hot_fraction = tree.nodes[hot].cover / node.cover;
  const double cold_fraction = tree.nodes[cold].cover / node.cover;

  double incoming_zero = 1.0, incoming_one = 1.0;
  std::size_t next_depth = depth + 1;
  for (std::size_t k = 1; k <= depth; ++k) {
    if (path[k].feature == node.feature) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, depth, k);
      --next_depth;
      break;
    }
  }
  recurse(tree, x, phi, hot, path, next_depth, hot_fraction * incoming_zero, incoming_one, node.feature);
  recurse(tree, x, phi, cold, path, next_depth, cold_fraction * incoming_zero, 0.0, node.feature);
}

inline void check_covers(const gbdt::Tree& tree) {
  for (const auto& n : tree.nodes) {
    if (!(n.cover > 0.0)) throw ExplanationError("tree node with non-positive cover; the model is invalid");
  }
}

// Cover-weighted mean leaf value, i.e. the tree's expected output when no
// feature is known.
inline double expected_value(const gbdt::Tree& tree, int node_id = 0) {
  const auto& n = tree.nodes[node_id];
  if (n.is_leaf()) return n.leaf;
  return (tree.nodes[n.left].cover * expected_value(tree, n.left) +
          tree.nodes[n.right].cover * expected_value(tree, n.right)) /
         n.cover;
}

}  // namespace detail

inline double base_value(const gbdt::BoostedModel& model) {
  double base = model.base_margin();
  for (const auto& tree : model.trees) {
    detail::check_covers(tree);
    base += detail::expected_value(tree);
  }
  return base;
}

// Path-dependent exact TreeSHAP on the margin scale. Absent features send
// weight down both children in proportion to child cover.
inline ShapValues tree_shap(const gbdt::BoostedModel& model, std::span<const double> x) {
  require(x.size() == model.feature_names.size(), "feature vector length differs from the model");
  for (double v : x) require(std::isfinite(v), "non-finite feature value");
  ShapValues out;
  out.phi.assign(x.size(), 0.0);
  out.base_value = base_value(model);
  std::vector<detail::PathElement> root;
  for (const auto& tree : model.trees) {
    if (tree.nodes.size() == 1) continue;
    detail::recurse(tree, x, out.phi, 0, root, 0, 1.0, 1.0, -1);
  }
  return out;
}

// Exact Shapley values by enumerating all subsets of the features the model
// uses, with v(S) the cover-weighted expectation given the features in S.
// Exponential; meant as a verification oracle.
inline std::vector<double> brute_force_shapley(const gbdt::BoostedModel& model, std::span<const double> x,
                                               std::size_t max_features = 20) {
  require(x.size() == model.feature_names.size(), "feature vector length differs from the model");
  std::vector<int> used;
  for (const auto& tree : model.trees) {
    detail::check_covers(tree);
    for (const auto& n : tree.nodes) {
      if (!n.is_leaf()) used.push_back(n.feature);
    }
  }
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  const std::size_t m = used.size();
  if (m > max_features) {
    throw ExplanationError("brute-force Shapley refuses " + std::to_string(m) + " features (limit " +
                           std::to_string(max_features) + ")");
  }
  std::vector<int> slot(x.size(), -1);
  for (std::size_t s = 0; s < m; ++s) slot[used[s]] = static_cast<int>(s);

  auto conditional = [&](const gbdt::Tree& tree, std::uint32_t mask) {
    auto walk = [&](auto&& self, int id) -> double {
      const auto& n = tree.nodes[id];
      if (n.is_leaf()) return n.leaf;
      if (mask >> slot[n.feature] & 1u) return self(self, x[n.feature] < n.threshold ? n.left : n.right);
      return tree.nodes[n.left].cover / n.cover * self(self, n.left) +
             tree.nodes[n.right].cover / n.cover * self(self, n.right);
    };
    return walk(walk, 0);
  };

  const std::uint32_t subsets = 1u << m;
  std::vector<double> value(subsets, 0.0);
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    double v = model.base_margin();
    for (const auto& tree : model.trees) v += conditional(tree, mask);
    value[mask] = v;
  }

  // weight(|S|) = |S|! (m - |S| - 1)! / m!
  std::vector<double> weight(m, 0.0);
  for (std::size_t s = 0; s < m; ++s) {
    double w = 1.0 / static_cast<double>(m);
    for (std::size_t i = 1; i <= s; ++i) w *= static_cast<double>(i) / static_cast<double>(m - i);
    weight[s] = w;
  }

  std::vector<double> phi(x.size(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const std::uint32_t bit = 1u << j;
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      total += weight[static_cast<std::size_t>(std::popcount(mask))] * (value[mask | bit] - value[mask]);
    }
    phi[used[j]] = total;
  }
  return phi;
}

// Per-sample, per-feature margin attributions sharing one base value.
struct AttributionSet {
  double base_value = 0.0;
  std::size_t n_features = 0;
  std::vector<double> phi;      // row-major n_samples x n_features
  std::vector<double> margins;  // model margin of each sample
  std::vector<std::string> sample_ids;
  std::vector<std::string> feature_names;

  std::size_t size() const { return sample_ids.size(); }
  std::span<const double> row(std::size_t i) const { return {phi.data() + i * n_features, n_features}; }
  double at(std::size_t i, std::size_t j) const { return phi[i * n_features + j]; }

  std::size_t find(std::string_view id) const {
    return static_cast<std::size_t>(std::find(sample_ids.begin(), sample_ids.end(), id) - sample_ids.begin());
  }

  // Largest |base + sum(phi) - margin| over samples.
  double max_local_accuracy_error() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      double total = base_value;
      for (double v : row(i)) total += v;
      worst = std::max(worst, std::abs(total - margins[i]));
    }
    return worst;
  }
};

inline AttributionSet explain_cohort(const gbdt::BoostedModel& model, const Cohort& cohort, std::size_t workers = 1) {
  AttributionSet out;
  out.base_value = base_value(model);
  out.n_features = cohort.n_features();
  out.sample_ids = cohort.subject_ids();
  out.feature_names = cohort.feature_names();
  out.phi.assign(cohort.size() * cohort.n_features(), 0.0);
  out.margins.assign(cohort.size(), 0.0);
  parallel_for(cohort.size(), workers, [&](std::size_t i) {
    const auto shap = tree_shap(model, cohort.row(i));
    std::copy(shap.phi.begin(), shap.phi.end(), out.phi.begin() + static_cast<std::ptrdiff_t>(i * out.n_features));
    out.margins[i] = gbdt::predict_margin(model, cohort.row(i));
  });
  return out;
}

struct Importance {
  std::size_t feature = 0;
  std::string name;
  double mean_abs = 0.0;
  double mean = 0.0;
};

// Mean |phi| per feature, descending, ties by feature index.
inline std::vector<Importance> global_importance(const AttributionSet& attr) {
  if (attr.size() == 0) throw ExplanationError("no explained samples");
  std::vector<Importance> out(attr.n_features);
  for (std::size_t j = 0; j < attr.n_features; ++j) {
    out[j].feature = j;
    out[j].name = attr.feature_names[j];
  }
  for (std::size_t i = 0; i < attr.size(); ++i) {
    for (std::size_t j = 0; j < attr.n_features; ++j) {
      out[j].mean_abs += std::abs(attr.at(i, j));
      out[j].mean += attr.at(i, j);
    }
  }
  const double n = static_cast<double>(attr.size());
  for (auto& e : out) {
    e.mean_abs /= n;
    e.mean /= n;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Importance& a, const Importance& b) { return a.mean_abs > b.mean_abs; });
  return out;
}

// Pearson correlation between a feature's values and its attributions:
// positive when larger values push the margin up. 0 for constant inputs.
inline double attribution_direction(const AttributionSet& attr, const Cohort& cohort, std::size_t feature) {
  require(cohort.size() == attr.size(), "cohort and attribution set differ in size");
  require(feature < attr.n_features, "feature index out of range");
  const double n = static_cast<double>(attr.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < attr.size(); ++i) {
    mx += cohort.value(i, feature);
    my += attr.at(i, feature);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < attr.size(); ++i) {
    const double dx = cohort.value(i, feature) - mx;
    const double dy = attr.at(i, feature) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct SummaryRecord {
  std::string sample_id;
  std::size_t feature = 0;
  std::size_t rank = 0;  // 1-based rank in global importance
  double attribution = 0.0;
  double normalized_value = 0.0;
};

// One record per (sample, top-k feature); feature values are min-max
// normalized over the explained samples, constant features map to 0.5.
inline std::vector<SummaryRecord> summary_data(const AttributionSet& attr, const Cohort& cohort, std::size_t top_k = 20) {
  require(cohort.size() == attr.size(), "cohort and attribution set differ in size");
  const auto ranking = global_importance(attr);
  top_k = std::min(top_k, ranking.size());
  std::vector<SummaryRecord> out;
  out.reserve(attr.size() * top_k);
  for (std::size_t r = 0; r < top_k; ++r) {
    const std::size_t j = ranking[r].feature;
    const auto col = cohort.column(j);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < attr.size(); ++i) {
      const double normalized = range > 0.0 ? (col[i] - *lo) / range : 0.5;
      out.push_back({attr.sample_ids[i], j, r + 1, attr.at(i, j), normalized});
    }
  }
  return out;
}

struct DependencePoint {
  double value = 0.0;
  double attribution = 0.0;
};

inline std::vector<DependencePoint> dependence_data(const AttributionSet& attr, const Cohort& cohort,
                                                    std::size_t feature) {
  require(cohort.size() == attr.size(), "cohort and attribution set differ in size");
  require(feature < attr.n_features, "feature index out of range");
  std::vector<DependencePoint> out(attr.size());
  for (std::size_t i = 0; i < attr.size(); ++i) out[i] = {cohort.value(i, feature), attr.at(i, feature)};
  return out;
}

struct WaterfallStep {
  std::string label;
  int feature = -1;  // -1 for the aggregated remainder
  double contribution = 0.0;
  double cumulative = 0.0;
};

struct Waterfall {
  std::string sample_id;
  double base_value = 0.0;
  double margin = 0.0;
  std::vector<WaterfallStep> steps;

  double end_value() const { return steps.empty() ? base_value : steps.back().cumulative; }
};

// Top-k features by |phi| (ties by index), then one "other" step with the
// sum of the rest unless every feature is listed.
inline Waterfall waterfall(const AttributionSet& attr, std::string_view sample_id, std::size_t top_k) {
  const std::size_t i = attr.find(sample_id);
  if (i >= attr.size()) throw ExplanationError("unknown sample '" + std::string(sample_id) + "'");
  const auto phi = attr.row(i);
  std::vector<std::size_t> order(phi.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(phi[a]) > std::abs(phi[b]); });

  Waterfall w;
  w.sample_id = std::string(sample_id);
  w.base_value = attr.base_value;
  w.margin = attr.margins[i];
  double cumulative = attr.base_value;
  const std::size_t listed = std::min(top_k, phi.size());
  for (std::size_t r = 0; r < listed; ++r) {
    const std::size_t j = order[r];
    cumulative += phi[j];
    w.steps.push_back({attr.feature_names[j], static_cast<int>(j), phi[j], cumulative});
  }
  if (listed < phi.size()) {
    double rest = 0.0;
    for (std::size_t r = listed; r < phi.size(); ++r) rest += phi[order[r]];
    cumulative += rest;
    w.steps.push_back({"other (" + std::to_string(phi.size() - listed) + " features)", -1, rest, cumulative});
  }
  return w;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string attributions_csv(const AttributionSet& attr) {
  std::string out = "subject_id,base_value,margin";
  for (const auto& name : attr.feature_names) out += "," + name;
  out += "\n";
  for (std::size_t i = 0; i < attr.size(); ++i) {
    out += attr.sample_ids[i] + "," + nlohmann::json(attr.base_value).dump() + "," +
           nlohmann::json(attr.margins[i]).dump();
    for (double v : attr.row(i)) out += "," + nlohmann::json(v).dump();
    out += "\n";
  }
  return out;
}

inline nlohmann::ordered_json to_json(const Waterfall& w) {
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const auto& s : w.steps) {
    steps.push_back({{"label", s.label}, {"feature", s.feature}, {"contribution", s.contribution},
                     {"cumulative", s.cumulative}});
  }
  return {{"sample_id", w.sample_id}, {"scale", "log-odds margin"}, {"base_value", w.base_value},
          {"margin", w.margin},       {"steps", std::move(steps)}};
}

inline std::string importance_csv(const std::vector<Importance>& ranking) {
  std::string out = "rank,feature,name,mean_abs_attribution,mean_attribution\n";
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    const auto& e = ranking[r];
    out += std::to_string(r + 1) + "," + std::to_string(e.feature) + "," + e.name + "," +
           nlohmann::json(e.mean_abs).dump() + "," + nlohmann::json(e.mean).dump() + "\n";
  }
  return out;
}

}  // namespace riskboost::explain
