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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskboost/data.hpp"
#include "riskboost/error.hpp"
#include "riskboost/gbdt.hpp"
#include "riskboost/metrics.hpp"
#include "riskboost/parallel.hpp"
#include "riskboost/rng.hpp"

namespace riskboost::tune {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Per-class seeded shuffle, then round-robin assignment. The round-robin
// cursor carries over from one class to the next so fold totals stay within
// one sample of each other.
inline std::vector<Fold> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw TuningError("k must be >= 2");
  std::vector<int> fold_of(labels.size(), 0);
  Rng rng(seed);
  std::size_t cursor = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    if (members.size() < static_cast<std::size_t>(k)) {
      throw TuningError("class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                        " member(s), fewer than k=" + std::to_string(k));
    }
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t m : members) {
      fold_of[m] = static_cast<int>(cursor % static_cast<std::size_t>(k));
      ++cursor;
    }
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int f = 0; f < k; ++f) (f == fold_of[i] ? folds[f].validation : folds[f].train).push_back(i);
  }
  return folds;
}

// Tuning objective: step-integral average precision, identical to
// metrics::auc_pr.
inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "scores and labels differ in length");
  if (std::find(labels.begin(), labels.end(), 1) == labels.end()) {
    throw TuningError("average precision is undefined without positive labels");
  }
  return metrics::detail::step_average_precision(scores, labels);
}

// Marker in Grid::scale_pos_weight for negatives/positives of the cohort
// being tuned.
inline constexpr double kBalancedWeight = -1.0;

struct Grid {
  std::vector<int> n_trees{100, 200, 400};
  std::vector<int> max_depth{3, 4, 6};
  std::vector<double> learning_rate{0.03, 0.1, 0.3};
  std::vector<double> scale_pos_weight{1.0, kBalancedWeight};

  std::size_t size() const {
    return n_trees.size() * max_depth.size() * learning_rate.size() * scale_pos_weight.size();
  }
};

struct ConfigScore {
  gbdt::TrainConfig config;
  std::vector<double> fold_scores;
  double mean = 0.0;
};

struct CvResult {
  std::vector<ConfigScore> entries;
  std::size_t best_index = 0;
  gbdt::TrainConfig best_config;
  int k = 5;
  std::uint64_t seed = 0;
  std::size_t evaluations = 0;
};

inline double mean_of(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

inline std::vector<gbdt::TrainConfig> expand_grid(const Grid& grid, const gbdt::TrainConfig& base,
                                                  double balanced_weight) {
  if (grid.size() == 0) throw TuningError("grid has an empty dimension");
  std::vector<gbdt::TrainConfig> configs;
  for (int trees : grid.n_trees) {
    for (int depth : grid.max_depth) {
      for (double lr : grid.learning_rate) {
        for (double w : grid.scale_pos_weight) {
          gbdt::TrainConfig c = base;
          c.n_trees = trees;
          c.max_depth = depth;
          c.learning_rate = lr;
          c.scale_pos_weight = w == kBalancedWeight ? balanced_weight : w;
          c.validate();
          configs.push_back(c);
        }
      }
    }
  }
  return configs;
}

// True when a should win over b at equal mean score: fewer trees, then
// shallower, then larger learning rate.
inline bool preferred_on_tie(const gbdt::TrainConfig& a, const gbdt::TrainConfig& b) {
  if (a.n_trees != b.n_trees) return a.n_trees < b.n_trees;
  if (a.max_depth != b.max_depth) return a.max_depth < b.max_depth;
  return a.learning_rate > b.learning_rate;
}

inline std::string describe(const gbdt::TrainConfig& c) {
  return "n_trees=" + std::to_string(c.n_trees) + " max_depth=" + std::to_string(c.max_depth) +
         " learning_rate=" + nlohmann::json(c.learning_rate).dump() +
         " scale_pos_weight=" + nlohmann::json(c.scale_pos_weight).dump();
}

// Validation-fold AP of one (config, fold) pair.
inline double score_fold(const Cohort& train, std::span<const std::size_t> features, const gbdt::TrainConfig& config,
                         const Fold& fold) {
  const Cohort fit_part = train.subset(fold.train);
  const Cohort holdout = train.subset(fold.validation);
  const auto model = gbdt::fit(fit_part, features, config);
  return average_precision(gbdt::predict_proba(model, holdout), holdout.labels());
}

inline CvResult grid_search(const Cohort& train, std::span<const std::size_t> features, const Grid& grid, int k,
                            std::uint64_t seed, std::size_t workers = 1, const gbdt::TrainConfig& base = {}) {
  const auto folds = stratified_kfold(train.labels(), k, seed);
  const double positives = static_cast<double>(train.count_label(1));
  const double balanced = (static_cast<double>(train.size()) - positives) / positives;
  const auto configs = expand_grid(grid, base, balanced);

  const std::size_t n_folds = folds.size();
  std::vector<double> scores(configs.size() * n_folds);
  parallel_for(scores.size(), workers, [&](std::size_t job) {
    const auto& config = configs[job / n_folds];
    const std::size_t f = job % n_folds;
    try {
      scores[job] = score_fold(train, features, config, folds[f]);
    } catch (const Error& e) {
      throw TuningError(describe(config) + " fold " + std::to_string(f) + ": " + e.what());
    }
  });

  CvResult result;
  result.k = k;
  result.seed = seed;
  result.evaluations = scores.size();
  for (std::size_t c = 0; c < configs.size(); ++c) {
    ConfigScore entry;
    entry.config = configs[c];
    entry.fold_scores.assign(scores.begin() + static_cast<std::ptrdiff_t>(c * n_folds),
                             scores.begin() + static_cast<std::ptrdiff_t>((c + 1) * n_folds));
    entry.mean = mean_of(entry.fold_scores);
    result.entries.push_back(std::move(entry));
  }
  for (std::size_t c = 1; c < result.entries.size(); ++c) {
    const auto& candidate = result.entries[c];
    const auto& best = result.entries[result.best_index];
    if (candidate.mean > best.mean ||
        (candidate.mean == best.mean && preferred_on_tie(candidate.config, best.config))) {
      result.best_index = c;
    }
  }
  result.best_config = result.entries[result.best_index].config;
  return result;
}

// Mean validation AUC over stratified folds; the scoring procedure used by
// forward feature selection.
inline double cross_validated_auc(const Cohort& train, std::span<const std::size_t> features,
                                  const gbdt::TrainConfig& config, int k, std::uint64_t seed) {
  const auto folds = stratified_kfold(train.labels(), k, seed);
  std::vector<double> aucs;
  for (const auto& fold : folds) {
    const Cohort fit_part = train.subset(fold.train);
    const Cohort holdout = train.subset(fold.validation);
    const auto model = gbdt::fit(fit_part, features, config);
    aucs.push_back(metrics::auc_roc(gbdt::predict_proba(model, holdout), holdout.labels()));
  }
  return mean_of(aucs);
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const CvResult& r) {
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"config", gbdt::config_to_json(e.config)}, {"fold_scores", e.fold_scores}, {"mean", e.mean}});
  }
  return {{"metric", "average_precision"},
          {"k", r.k},
          {"seed", r.seed},
          {"evaluations", r.evaluations},
          {"best_index", r.best_index},
          {"best_config", gbdt::config_to_json(r.best_config)},
          {"best_mean", r.entries.empty() ? 0.0 : r.entries[r.best_index].mean},
          {"entries", std::move(entries)}};
}

inline std::string to_csv(const CvResult& r) {
  std::string out = "config_index,n_trees,max_depth,learning_rate,scale_pos_weight,fold,average_precision\n";
  for (std::size_t c = 0; c < r.entries.size(); ++c) {
    const auto& e = r.entries[c];
    for (std::size_t f = 0; f < e.fold_scores.size(); ++f) {
      out += std::to_string(c) + "," + std::to_string(e.config.n_trees) + "," + std::to_string(e.config.max_depth) +
             "," + nlohmann::json(e.config.learning_rate).dump() + "," +
             nlohmann::json(e.config.scale_pos_weight).dump() + "," + std::to_string(f) + "," +
             nlohmann::json(e.fold_scores[f]).dump() + "\n";
    }
  }
  return out;
}

inline Grid grid_from_json(const nlohmann::json& j) {
  Grid g;
  if (!j.is_object()) throw ConfigError("grid must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "n_trees" && key != "max_depth" && key != "learning_rate" && key != "scale_pos_weight") {
      throw ConfigError("unknown grid key '" + key + "'");
    }
  }
  try {
    if (j.contains("n_trees")) g.n_trees = j.at("n_trees").get<std::vector<int>>();
    if (j.contains("max_depth")) g.max_depth = j.at("max_depth").get<std::vector<int>>();
    if (j.contains("learning_rate")) g.learning_rate = j.at("learning_rate").get<std::vector<double>>();
    if (j.contains("scale_pos_weight")) {
      g.scale_pos_weight.clear();
      for (const auto& w : j.at("scale_pos_weight")) {
        if (w.is_string()) {
          if (w.get<std::string>() != "balanced") throw ConfigError("scale_pos_weight entries are numbers or \"balanced\"");
          g.scale_pos_weight.push_back(kBalancedWeight);
        } else {
          g.scale_pos_weight.push_back(w.get<double>());
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  if (g.size() == 0) throw ConfigError("grid has an empty dimension");
  return g;
}

inline nlohmann::ordered_json grid_to_json(const Grid& g) {
  nlohmann::ordered_json weights = nlohmann::ordered_json::array();
  for (double w : g.scale_pos_weight) {
    weights.push_back(w == kBalancedWeight ? nlohmann::ordered_json("balanced") : nlohmann::ordered_json(w));
  }
  return {{"n_trees", g.n_trees},
          {"max_depth", g.max_depth},
          {"learning_rate", g.learning_rate},
          {"scale_pos_weight", std::move(weights)}};
}

}  // namespace riskboost::tune
