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

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "riskboost/data.hpp"
#include "riskboost/gbdt.hpp"
#include "riskboost/rng.hpp"

namespace testing_support {

using riskboost::Cohort;
using riskboost::Rng;

// Values on a grid of `levels` steps in [0,1] (ties on purpose), labels
// drawn with a weak signal on feature 0 so that trees actually split.
inline Cohort random_cohort(std::size_t n, std::size_t f, std::uint64_t seed, int levels = 20,
                            double prevalence = 0.3) {
  Rng rng(seed);
  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("r" + std::to_string(i));
    double first = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      const double v = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels) + 1)) / levels;
      if (j == 0) first = v;
      values.push_back(v);
    }
    labels.push_back(rng.bernoulli(std::clamp(prevalence + 0.4 * (first - 0.5), 0.02, 0.98)) ? 1 : 0);
  }
  labels[0] = 1;
  labels[1] = 0;
  return Cohort(ids, values, labels, riskboost::default_feature_names(f));
}

inline std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

// Random boosted model: up to `max_features` features, depth 1..max_depth,
// 1..max_trees trees, fitted on a random cohort.
inline riskboost::gbdt::BoostedModel random_model(std::uint64_t seed, std::size_t max_features = 12,
                                                  int max_depth = 6, int max_trees = 10) {
  Rng rng(seed);
  const std::size_t f = 1 + rng.below(max_features);
  const std::size_t n = 30 + rng.below(150);
  const auto cohort = random_cohort(n, f, seed ^ 0x9e3779b97f4a7c15ULL, 4 + static_cast<int>(rng.below(30)));
  riskboost::gbdt::TrainConfig config;
  config.n_trees = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_trees)));
  config.max_depth = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_depth)));
  config.learning_rate = 0.1 + 0.8 * rng.uniform();
  config.reg_lambda = rng.uniform() * 2.0;
  config.min_child_weight = rng.uniform() * 0.5;
  config.scale_pos_weight = 0.5 + 2.0 * rng.uniform();
  return riskboost::gbdt::fit(cohort, iota(f), config);
}

// A random input that often lands exactly on split thresholds.
inline std::vector<double> random_input(const riskboost::gbdt::BoostedModel& model, Rng& rng) {
  std::vector<double> thresholds;
  for (const auto& t : model.trees)
    for (const auto& node : t.nodes)
      if (!node.is_leaf()) thresholds.push_back(node.threshold);
  std::vector<double> x(model.feature_names.size());
  for (auto& v : x) {
    if (!thresholds.empty() && rng.uniform() < 0.3) {
      v = thresholds[rng.below(thresholds.size())];
    } else {
      v = rng.uniform();
    }
  }
  return x;
}

}  // namespace testing_support
