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
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskboost/data.hpp"
#include "riskboost/error.hpp"
#include "riskboost/metrics.hpp"
#include "riskboost/parallel.hpp"
#include "riskboost/tune.hpp"

namespace riskboost::baselines {

enum class Metric { kEuclidean, kManhattan };
enum class Weighting { kUniform, kInverseDistance };

struct KnnConfig {
  int k = 5;
  Metric metric = Metric::kEuclidean;
  Weighting weighting = Weighting::kUniform;
};

struct Neighbor {
  double distance = 0.0;
  std::size_t index = 0;
};

inline double distance(std::span<const double> a, std::span<const double> b, std::span<const std::size_t> features,
                       Metric metric) {
  double total = 0.0;
  for (std::size_t j : features) {
    const double d = a[j] - b[j];
    total += metric == Metric::kEuclidean ? d * d : std::abs(d);
  }
  return metric == Metric::kEuclidean ? std::sqrt(total) : total;
}

// The k nearest training rows by brute force; equal distances prefer the
// lower training index.
inline std::vector<Neighbor> nearest(const Cohort& train, std::span<const std::size_t> features, Metric metric,
                                     std::span<const double> x, std::size_t k) {
  require(x.size() == train.n_features(), "query has " + std::to_string(x.size()) + " features, training set has " +
                                              std::to_string(train.n_features()));
  require(k >= 1 && k <= train.size(), "k must lie in [1, n_train]");
  std::vector<Neighbor> all(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) all[i] = {distance(train.row(i), x, features, metric), i};
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

// Weighted share of positives among the neighbors. With inverse-distance
// weighting, exact matches (distance 0) take all the weight.
inline double score_neighbors(const Cohort& train, std::span<const Neighbor> neighbors, Weighting weighting) {
  if (weighting == Weighting::kUniform) {
    std::size_t positives = 0;
    for (const auto& n : neighbors) positives += static_cast<std::size_t>(train.label(n.index));
    return static_cast<double>(positives) / static_cast<double>(neighbors.size());
  }
  const bool exact = std::any_of(neighbors.begin(), neighbors.end(), [](const Neighbor& n) { return n.distance == 0.0; });
  double positive = 0.0, total = 0.0;
  for (const auto& n : neighbors) {
    if (exact && n.distance != 0.0) continue;
    const double w = exact ? 1.0 : 1.0 / n.distance;
    total += w;
    if (train.label(n.index) == 1) positive += w;
  }
  return positive / total;
}

inline void validate(const KnnConfig& config, const Cohort& train) {
  if (train.empty()) throw ConfigError("KNN needs a nonempty training set");
  if (config.k < 1 || config.k % 2 == 0) throw ConfigError("KNN k must be a positive odd integer");
  if (static_cast<std::size_t>(config.k) > train.size()) throw ConfigError("KNN k exceeds the training set size");
}

inline std::vector<std::size_t> all_features(const Cohort& c) {
  std::vector<std::size_t> out(c.n_features());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = j;
  return out;
}

inline double knn_score(const Cohort& train, const KnnConfig& config, std::span<const double> x,
                        std::span<const std::size_t> features) {
  validate(config, train);
  const auto neighbors = nearest(train, features, config.metric, x, static_cast<std::size_t>(config.k));
  return score_neighbors(train, neighbors, config.weighting);
}

inline double knn_score(const Cohort& train, const KnnConfig& config, std::span<const double> x) {
  return knn_score(train, config, x, all_features(train));
}

inline std::vector<double> knn_scores(const Cohort& train, const Cohort& queries, const KnnConfig& config,
                                      std::span<const std::size_t> features, std::size_t workers = 1) {
  validate(config, train);
  std::vector<double> out(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t i) {
    const auto neighbors = nearest(train, features, config.metric, queries.row(i), static_cast<std::size_t>(config.k));
    out[i] = score_neighbors(train, neighbors, config.weighting);
  });
  return out;
}

inline metrics::EvalReport knn_evaluate(const Cohort& train, const Cohort& test, const KnnConfig& config,
                                        std::span<const std::size_t> features, double threshold = 0.5,
                                        std::size_t workers = 1) {
  const auto scores = knn_scores(train, test, config, features, workers);
  return metrics::summarize(scores, test.labels(), threshold);
}

inline metrics::EvalReport knn_evaluate(const Cohort& train, const Cohort& test, const KnnConfig& config,
                                        double threshold = 0.5, std::size_t workers = 1) {
  return knn_evaluate(train, test, config, all_features(train), threshold, workers);
}

struct KnnCvResult {
  std::vector<int> k_grid;
  std::vector<std::vector<double>> fold_scores;  // [k][fold] average precision
  std::vector<double> mean;
  int best_k = 0;
};

// Chooses k by stratified k-fold average precision; ties prefer smaller k.
// Neighbors are searched once per validation row at the largest k.
inline KnnCvResult knn_tune(const Cohort& train, std::span<const std::size_t> features, std::vector<int> k_grid,
                            const KnnConfig& base, int folds_k, std::uint64_t seed, std::size_t workers = 1) {
  if (k_grid.empty()) throw ConfigError("KNN k grid is empty");
  std::sort(k_grid.begin(), k_grid.end());
  const auto folds = tune::stratified_kfold(train.labels(), folds_k, seed);
  KnnCvResult result;
  result.k_grid = k_grid;
  result.fold_scores.assign(k_grid.size(), std::vector<double>(folds.size(), 0.0));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const Cohort fit_part = train.subset(folds[f].train);
    const Cohort holdout = train.subset(folds[f].validation);
    for (int k : k_grid) {
      KnnConfig c = base;
      c.k = k;
      validate(c, fit_part);
    }
    const auto max_k = static_cast<std::size_t>(k_grid.back());
    std::vector<std::vector<Neighbor>> neighbors(holdout.size());
    parallel_for(holdout.size(), workers, [&](std::size_t i) {
      neighbors[i] = nearest(fit_part, features, base.metric, holdout.row(i), max_k);
    });
    for (std::size_t g = 0; g < k_grid.size(); ++g) {
      std::vector<double> scores(holdout.size());
      for (std::size_t i = 0; i < holdout.size(); ++i) {
        const std::span<const Neighbor> first(neighbors[i].data(), static_cast<std::size_t>(k_grid[g]));
        scores[i] = score_neighbors(fit_part, first, base.weighting);
      }
      result.fold_scores[g][f] = tune::average_precision(scores, holdout.labels());
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 0; g < k_grid.size(); ++g) {
    result.mean.push_back(tune::mean_of(result.fold_scores[g]));
    if (result.mean[g] > result.mean[best]) best = g;
  }
  result.best_k = k_grid[best];
  return result;
}

inline std::string to_string(Metric m) { return m == Metric::kEuclidean ? "euclidean" : "manhattan"; }
inline std::string to_string(Weighting w) { return w == Weighting::kUniform ? "uniform" : "inverse-distance"; }

inline Metric metric_from_string(const std::string& s) {
  if (s == "euclidean") return Metric::kEuclidean;
  if (s == "manhattan") return Metric::kManhattan;
  throw ConfigError("unknown KNN metric '" + s + "'");
}

inline Weighting weighting_from_string(const std::string& s) {
  if (s == "uniform") return Weighting::kUniform;
  if (s == "inverse-distance") return Weighting::kInverseDistance;
  throw ConfigError("unknown KNN weighting '" + s + "'");
}

inline nlohmann::ordered_json to_json(const KnnCvResult& r) {
  return {{"metric", "average_precision"}, {"k_grid", r.k_grid}, {"fold_scores", r.fold_scores},
          {"mean", r.mean},                {"best_k", r.best_k}};
}

}  // namespace riskboost::baselines
