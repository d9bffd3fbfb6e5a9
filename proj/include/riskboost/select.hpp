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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskboost/data.hpp"
#include "riskboost/error.hpp"
#include "riskboost/gbdt.hpp"
#include "riskboost/parallel.hpp"
#include "riskboost/tune.hpp"

namespace riskboost::select {

struct DominantValue {
  std::size_t feature = 0;
  double fraction = 0.0;
};

struct VarianceResult {
  std::vector<std::size_t> survivors;
  std::vector<DominantValue> dropped;
};

// Fraction of samples holding the most frequent value of a column, after
// rounding to 6 decimals.
inline double dominant_fraction(std::span<const double> column) {
  std::vector<long long> q(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) q[i] = std::llround(column[i] * 1e6);
  std::sort(q.begin(), q.end());
  std::size_t best = 0;
  for (std::size_t i = 0; i < q.size();) {
    std::size_t j = i;
    while (j < q.size() && q[j] == q[i]) ++j;
    best = std::max(best, j - i);
    i = j;
  }
  return static_cast<double>(best) / static_cast<double>(column.size());
}

// Drops every feature whose dominant value covers strictly more than
// dominance_threshold of the samples.
inline VarianceResult variance_filter(const Cohort& cohort, double dominance_threshold = 0.90) {
  if (cohort.empty()) throw SelectionError("variance filter on an empty cohort");
  if (!(dominance_threshold > 0.0 && dominance_threshold <= 1.0)) {
    throw SelectionError("dominance_threshold must lie in (0,1]");
  }
  VarianceResult out;
  for (std::size_t j = 0; j < cohort.n_features(); ++j) {
    const auto col = cohort.column(j);
    const double fraction = dominant_fraction(col);
    if (fraction > dominance_threshold) {
      out.dropped.push_back({j, fraction});
    } else {
      out.survivors.push_back(j);
    }
  }
  return out;
}

// Sample Pearson correlation; nullopt when either input is constant.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "pearson inputs differ in length");
  require(x.size() >= 2, "pearson needs at least two observations");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Shannon entropy (bits) of an equal-width histogram on [0,1]; empty bins
// contribute nothing.
inline double feature_entropy(std::span<const double> column, int n_bins = 10) {
  require(!column.empty(), "entropy of an empty column");
  require(n_bins >= 2, "entropy needs at least two bins");
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_bins), 0);
  for (double v : column) {
    const auto bin = static_cast<std::size_t>(std::clamp(std::floor(v * n_bins), 0.0, static_cast<double>(n_bins - 1)));
    ++counts[bin];
  }
  const double n = static_cast<double>(column.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

struct CorrelatedPair {
  std::size_t first = 0;
  std::size_t second = 0;
  double r = 0.0;
};

struct PrunedPair {
  std::size_t kept = 0;
  std::size_t dropped = 0;
  double r = 0.0;
};

struct PruneResult {
  std::vector<std::size_t> survivors;
  std::vector<PrunedPair> dropped;
  std::vector<CorrelatedPair> pairs;  // every pair with |r| > threshold
};

// Visits pairs with |r| > threshold by descending |r| (ties: ascending index
// pair). When both members still survive, the one with lower entropy is
// dropped; equal entropies drop the higher index.
inline PruneResult correlation_prune(const Cohort& cohort, std::span<const std::size_t> survivors, double threshold = 0.70,
                                     int n_bins = 10) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw SelectionError("correlation threshold must lie in (0,1)");
  std::vector<std::size_t> features(survivors.begin(), survivors.end());
  std::sort(features.begin(), features.end());
  std::vector<std::vector<double>> columns;
  std::vector<double> entropy;
  for (auto j : features) {
    columns.push_back(cohort.column(j));
    entropy.push_back(feature_entropy(columns.back(), n_bins));
  }

  PruneResult out;
  for (std::size_t a = 0; a < features.size(); ++a) {
    for (std::size_t b = a + 1; b < features.size(); ++b) {
      const auto r = pearson(columns[a], columns[b]);
      if (r && std::abs(*r) > threshold) out.pairs.push_back({a, b, *r});
    }
  }
  std::stable_sort(out.pairs.begin(), out.pairs.end(),
                   [](const CorrelatedPair& x, const CorrelatedPair& y) { return std::abs(x.r) > std::abs(y.r); });

  std::vector<char> alive(features.size(), 1);
  for (auto& pair : out.pairs) {
    const std::size_t a = pair.first, b = pair.second;
    if (alive[a] && alive[b]) {
      const bool drop_b = entropy[b] <= entropy[a];
      const std::size_t victim = drop_b ? b : a;
      alive[victim] = 0;
      out.dropped.push_back({features[drop_b ? a : b], features[victim], pair.r});
    }
    pair.first = features[a];
    pair.second = features[b];
  }
  for (std::size_t a = 0; a < features.size(); ++a) {
    if (alive[a]) out.survivors.push_back(features[a]);
  }
  return out;
}

struct EntropyEntry {
  std::size_t feature = 0;
  double entropy = 0.0;
};

// Descending entropy, ties by ascending feature index.
inline std::vector<EntropyEntry> rank_by_entropy(const Cohort& cohort, std::span<const std::size_t> features,
                                                 int n_bins = 10) {
  std::vector<EntropyEntry> out;
  for (auto j : features) out.push_back({j, feature_entropy(cohort.column(j), n_bins)});
  std::sort(out.begin(), out.end(), [](const EntropyEntry& x, const EntropyEntry& y) {
    return x.entropy > y.entropy || (x.entropy == y.entropy && x.feature < y.feature);
  });
  return out;
}

struct PrefixScore {
  std::size_t length = 0;
  double auc = 0.0;
};

struct SelectionReport {
  std::size_t n_features_in = 0;
  std::vector<DominantValue> dropped_low_variance;
  std::vector<CorrelatedPair> correlated_pairs;
  std::vector<PrunedPair> dropped_correlated;
  std::vector<EntropyEntry> entropy_ranking;
  std::vector<std::size_t> entropy_order;
  std::vector<PrefixScore> auc_by_prefix;
  std::vector<std::size_t> selected;
  double best_auc = 0.0;
};

// Scores a feature prefix; must be deterministic.
using PrefixEvaluator = std::function<double(std::span<const std::size_t>)>;

inline PrefixEvaluator cv_auc_evaluator(const Cohort& train, gbdt::TrainConfig config, int k, std::uint64_t seed) {
  return [&train, config, k, seed](std::span<const std::size_t> features) {
    return tune::cross_validated_auc(train, features, config, k, seed);
  };
}

// Scores every prefix of entropy_order and keeps the shortest prefix that
// reaches the maximum score. Prefixes are evaluated independently, so the
// report does not depend on the worker count.
inline SelectionReport forward_select(std::span<const std::size_t> entropy_order, const PrefixEvaluator& evaluator,
                                      std::size_t workers = 1) {
  if (entropy_order.empty()) throw SelectionError("forward selection needs a nonempty entropy order");
  std::vector<double> auc(entropy_order.size());
  parallel_for(auc.size(), workers, [&](std::size_t i) {
    try {
      auc[i] = evaluator(entropy_order.first(i + 1));
    } catch (const Error& e) {
      throw SelectionError("prefix length " + std::to_string(i + 1) + ": " + e.what());
    }
  });
  SelectionReport report;
  report.entropy_order.assign(entropy_order.begin(), entropy_order.end());
  std::size_t best = 0;
  for (std::size_t i = 0; i < auc.size(); ++i) {
    report.auc_by_prefix.push_back({i + 1, auc[i]});
    if (auc[i] > auc[best]) best = i;
  }
  report.best_auc = auc[best];
  report.selected.assign(entropy_order.begin(), entropy_order.begin() + static_cast<std::ptrdiff_t>(best + 1));
  return report;
}

struct SelectionOptions {
  double dominance_threshold = 0.90;
  double correlation_threshold = 0.70;
  int entropy_bins = 10;
  int cv_folds = 5;
  gbdt::TrainConfig evaluator_config;
  std::uint64_t seed = 7;
};

// Variance filter, correlation pruning, then entropy-ordered forward
// selection, all on the given (training) cohort.
inline SelectionReport run_selection(const Cohort& train, const SelectionOptions& options, std::size_t workers = 1) {
  const auto variance = variance_filter(train, options.dominance_threshold);
  const auto pruned = correlation_prune(train, variance.survivors, options.correlation_threshold, options.entropy_bins);
  if (pruned.survivors.empty()) throw SelectionError("no features survive the filters");
  auto ranking = rank_by_entropy(train, pruned.survivors, options.entropy_bins);
  std::vector<std::size_t> order;
  for (const auto& e : ranking) order.push_back(e.feature);

  auto report = forward_select(order, cv_auc_evaluator(train, options.evaluator_config, options.cv_folds, options.seed),
                               workers);
  report.n_features_in = train.n_features();
  report.dropped_low_variance = variance.dropped;
  report.correlated_pairs = pruned.pairs;
  report.dropped_correlated = pruned.dropped;
  report.entropy_ranking = std::move(ranking);
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const SelectionReport& r, const std::vector<std::string>& names) {
  using nlohmann::ordered_json;
  ordered_json low = ordered_json::array();
  for (const auto& d : r.dropped_low_variance) {
    low.push_back({{"feature", d.feature}, {"name", names[d.feature]}, {"dominant_fraction", d.fraction}});
  }
  ordered_json pairs = ordered_json::array();
  for (const auto& p : r.correlated_pairs) {
    pairs.push_back({{"first", p.first}, {"second", p.second}, {"r", p.r}});
  }
  ordered_json pruned = ordered_json::array();
  for (const auto& p : r.dropped_correlated) {
    pruned.push_back({{"kept", p.kept}, {"dropped", p.dropped}, {"dropped_name", names[p.dropped]}, {"r", p.r}});
  }
  ordered_json entropy = ordered_json::array();
  for (const auto& e : r.entropy_ranking) entropy.push_back({{"feature", e.feature}, {"entropy", e.entropy}});
  ordered_json prefix = ordered_json::array();
  for (const auto& p : r.auc_by_prefix) prefix.push_back({{"length", p.length}, {"auc", p.auc}});
  std::vector<std::string> selected_names;
  for (auto j : r.selected) selected_names.push_back(names[j]);

  return {{"n_features_in", r.n_features_in},
          {"counts",
           {{"after_variance_filter", r.n_features_in - r.dropped_low_variance.size()},
            {"correlated_pairs", r.correlated_pairs.size()},
            {"after_correlation_prune", r.n_features_in - r.dropped_low_variance.size() - r.dropped_correlated.size()},
            {"selected", r.selected.size()}}},
          {"dropped_low_variance", std::move(low)},
          {"correlated_pairs", std::move(pairs)},
          {"dropped_correlated", std::move(pruned)},
          {"entropy_ranking", std::move(entropy)},
          {"entropy_order", r.entropy_order},
          {"auc_by_prefix", std::move(prefix)},
          {"selected", r.selected},
          {"selected_names", selected_names},
          {"best_auc", r.best_auc}};
}

inline SelectionReport selection_from_json(const nlohmann::json& j) {
  SelectionReport r;
  try {
    r.n_features_in = j.at("n_features_in").get<std::size_t>();
    for (const auto& d : j.at("dropped_low_variance")) {
      r.dropped_low_variance.push_back({d.at("feature").get<std::size_t>(), d.at("dominant_fraction").get<double>()});
    }
    for (const auto& p : j.at("correlated_pairs")) {
      r.correlated_pairs.push_back({p.at("first").get<std::size_t>(), p.at("second").get<std::size_t>(),
                                    p.at("r").get<double>()});
    }
    for (const auto& p : j.at("dropped_correlated")) {
      r.dropped_correlated.push_back({p.at("kept").get<std::size_t>(), p.at("dropped").get<std::size_t>(),
                                      p.at("r").get<double>()});
    }
    for (const auto& e : j.at("entropy_ranking")) {
      r.entropy_ranking.push_back({e.at("feature").get<std::size_t>(), e.at("entropy").get<double>()});
    }
    r.entropy_order = j.at("entropy_order").get<std::vector<std::size_t>>();
    for (const auto& p : j.at("auc_by_prefix")) {
      r.auc_by_prefix.push_back({p.at("length").get<std::size_t>(), p.at("auc").get<double>()});
    }
    r.selected = j.at("selected").get<std::vector<std::size_t>>();
    r.best_auc = j.at("best_auc").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SelectionError(std::string("malformed selection report: ") + e.what());
  }
  if (r.selected.empty()) throw SelectionError("selection report has an empty selected set");
  return r;
}

inline std::string prefix_auc_csv(const SelectionReport& r) {
  std::string out = "prefix_length,auc,added_feature\n";
  for (std::size_t i = 0; i < r.auc_by_prefix.size(); ++i) {
    out += std::to_string(r.auc_by_prefix[i].length) + "," + nlohmann::json(r.auc_by_prefix[i].auc).dump() + "," +
           std::to_string(r.entropy_order[i]) + "\n";
  }
  return out;
}

}  // namespace riskboost::select
