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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "riskboost/baselines.hpp"
#include "support.hpp"

namespace rb = riskboost;
namespace kn = riskboost::baselines;
using testing_support::iota;

namespace {

rb::Cohort continuous(std::size_t n, std::size_t f, std::uint64_t seed) {
  rb::Rng rng(seed);
  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("k" + std::to_string(i));
    for (std::size_t j = 0; j < f; ++j) values.push_back(rng.uniform());
    labels.push_back(rng.bernoulli(0.35) ? 1 : 0);
  }
  labels[0] = 1;
  labels[1] = 0;
  return rb::Cohort(ids, values, labels, rb::default_feature_names(f));
}

}  // namespace

TEST(Knn, SelfMatchAndGlobalNeighborhood) {
  const auto c = continuous(40, 3, 1);
  kn::KnnConfig one;
  one.k = 1;
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(kn::knn_score(c, one, c.row(i)), c.label(i));
  kn::KnnConfig all;
  all.k = 39;
  const auto smaller = c.subset(iota(39));
  const double prevalence = static_cast<double>(smaller.count_label(1)) / 39.0;
  EXPECT_DOUBLE_EQ(kn::knn_score(smaller, all, c.row(39)), prevalence);
}

TEST(Knn, NeighborsMatchFullSortOracle) {
  rb::Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    // Coarse grid values make distance ties common.
    std::vector<std::string> ids;
    std::vector<double> values;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 50; ++i) {
      ids.push_back("n" + std::to_string(i));
      for (int j = 0; j < 2; ++j) values.push_back(static_cast<double>(rng.below(4)) / 4.0);
      labels.push_back(static_cast<int>(rng.below(2)));
    }
    const rb::Cohort c(ids, values, labels, rb::default_feature_names(2));
    const std::vector<double> x{static_cast<double>(rng.below(4)) / 4.0, rng.uniform()};
    const auto metric = trial % 2 ? kn::Metric::kManhattan : kn::Metric::kEuclidean;
    const std::size_t k = 1 + 2 * rng.below(12);
    std::vector<std::pair<double, std::size_t>> oracle;
    for (std::size_t i = 0; i < 50; ++i) {
      const double dx = c.value(i, 0) - x[0], dy = c.value(i, 1) - x[1];
      oracle.push_back({metric == kn::Metric::kEuclidean ? std::hypot(dx, dy) : std::abs(dx) + std::abs(dy), i});
    }
    std::sort(oracle.begin(), oracle.end());
    const auto got = kn::nearest(c, iota(2), metric, x, k);
    ASSERT_EQ(got.size(), k);
    int positives = 0;
    for (std::size_t r = 0; r < k; ++r) {
      EXPECT_EQ(got[r].index, oracle[r].second);
      EXPECT_NEAR(got[r].distance, oracle[r].first, 1e-15);
      positives += c.label(oracle[r].second);
    }
    kn::KnnConfig cfg;
    cfg.k = static_cast<int>(k);
    cfg.metric = metric;
    const double score = kn::knn_score(c, cfg, x);
    EXPECT_EQ(score, static_cast<double>(positives) / static_cast<double>(k));
    const double count = score * static_cast<double>(k);
    EXPECT_EQ(count, std::round(count));
  }
}

TEST(Knn, PermutationInvariance) {
  const auto c = continuous(60, 4, 3);
  auto order = iota(60);
  rb::Rng rng(4);
  rng.shuffle(std::span<std::size_t>(order));
  const auto shuffled = c.subset(order);
  for (auto weighting : {kn::Weighting::kUniform, kn::Weighting::kInverseDistance}) {
    kn::KnnConfig cfg;
    cfg.k = 7;
    cfg.weighting = weighting;
    for (int q = 0; q < 20; ++q) {
      std::vector<double> x(4);
      for (auto& v : x) v = rng.uniform();
      EXPECT_NEAR(kn::knn_score(c, cfg, x), kn::knn_score(shuffled, cfg, x), 1e-15);
    }
  }
}

TEST(Knn, InverseDistanceWeighting) {
  const rb::Cohort c({"a", "b", "c"}, {0.0, 0.3, 0.9}, {1, 0, 0}, {"x"});
  kn::KnnConfig cfg;
  cfg.k = 3;
  cfg.weighting = kn::Weighting::kInverseDistance;
  const std::vector<double> x{0.1};
  const double wa = 1 / 0.1, wb = 1 / 0.2, wc = 1 / 0.8;
  EXPECT_NEAR(kn::knn_score(c, cfg, x), wa / (wa + wb + wc), 1e-14);
  EXPECT_EQ(kn::knn_score(c, cfg, std::vector<double>{0.0}), 1.0);
}

TEST(Knn, EvaluateSeparatedAndDegenerate) {
  rb::Rng rng(5);
  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t i = 0; i < 200; ++i) {
    const int y = i % 2;
    ids.push_back("c" + std::to_string(i));
    for (int j = 0; j < 3; ++j) values.push_back((y ? 0.7 : 0.1) + 0.2 * rng.uniform());
    labels.push_back(y);
  }
  const rb::Cohort c(ids, values, labels, rb::default_feature_names(3));
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < 200; ++i) (i < 140 ? train_rows : test_rows).push_back(i);
  const auto train = c.subset(train_rows), test = c.subset(test_rows);
  const auto good = kn::knn_evaluate(train, test, kn::KnnConfig{}, 0.5, 3);
  EXPECT_GE(good.auc_roc, 0.99);
  EXPECT_EQ(good.confusion.total(), 60);
  kn::KnnConfig everything;
  everything.k = 139;
  const auto flat = kn::knn_evaluate(train.subset(iota(139)), test, everything);
  EXPECT_EQ(flat.auc_roc, 0.5);
  EXPECT_EQ(kn::knn_scores(train, test, kn::KnnConfig{}, kn::all_features(train), 1),
            kn::knn_scores(train, test, kn::KnnConfig{}, kn::all_features(train), 4));
}

TEST(Knn, Errors) {
  const auto c = continuous(10, 2, 6);
  kn::KnnConfig even;
  even.k = 4;
  EXPECT_THROW(kn::knn_score(c, even, c.row(0)), rb::ConfigError);
  kn::KnnConfig big;
  big.k = 11;
  EXPECT_THROW(kn::knn_score(c, big, c.row(0)), rb::ConfigError);
  EXPECT_THROW(kn::knn_score(c, kn::KnnConfig{}, std::vector<double>{0.1}), rb::ContractError);
  EXPECT_THROW(kn::metric_from_string("cosine"), rb::ConfigError);
  EXPECT_EQ(kn::weighting_from_string("inverse-distance"), kn::Weighting::kInverseDistance);
}

TEST(Knn, TuneChoosesByAveragePrecision) {
  const auto c = continuous(150, 3, 7);
  const auto r = kn::knn_tune(c, iota(3), {9, 3, 5}, kn::KnnConfig{}, 3, 8, 2);
  EXPECT_EQ(r.k_grid, (std::vector<int>{3, 5, 9}));
  const auto folds = rb::tune::stratified_kfold(c.labels(), 3, 8);
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t f = 0; f < 3; ++f) {
      kn::KnnConfig cfg;
      cfg.k = r.k_grid[g];
      const auto fit = c.subset(folds[f].train), hold = c.subset(folds[f].validation);
      EXPECT_EQ(r.fold_scores[g][f],
                rb::tune::average_precision(kn::knn_scores(fit, hold, cfg, iota(3)), hold.labels()));
    }
    EXPECT_LE(r.mean[g], r.mean[static_cast<std::size_t>(std::find(r.k_grid.begin(), r.k_grid.end(), r.best_k) - r.k_grid.begin())]);
  }
  // Identical points: every k scores the same, smallest k wins.
  const rb::Cohort flat({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"}, std::vector<double>(10, 0.5),
                        {1, 0, 1, 0, 1, 0, 1, 0, 1, 0}, {"x"});
  EXPECT_EQ(kn::knn_tune(flat, iota(1), {5, 3, 1}, kn::KnnConfig{}, 2, 1).best_k, 1);
}
