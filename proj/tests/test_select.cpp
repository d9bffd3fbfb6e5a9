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
#include <set>

#include "riskboost/select.hpp"
#include "support.hpp"

namespace rb = riskboost;
namespace sel = riskboost::select;

namespace {

rb::Cohort from_columns(const std::vector<std::vector<double>>& cols, std::vector<int> labels) {
  const std::size_t n = labels.size();
  std::vector<std::string> ids;
  std::vector<double> values;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("s" + std::to_string(i));
    for (const auto& c : cols) values.push_back(c[i]);
  }
  return rb::Cohort(ids, values, std::move(labels), rb::default_feature_names(cols.size()));
}

// Independent two-pass oracle.
double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double c = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    c += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(c / std::sqrt(vx * vy));
}

}  // namespace

TEST(Pearson, Examples) {
  EXPECT_DOUBLE_EQ(*sel::pearson(std::vector<double>{0.1, 0.5, 0.9}, std::vector<double>{0.1, 0.5, 0.9}), 1.0);
  EXPECT_DOUBLE_EQ(*sel::pearson(std::vector<double>{0, 1, 2, 3}, std::vector<double>{3, 2, 1, 0}), -1.0);
  // Sxy = 10, Sxx = 10, Syy = 14.8: r = 10 / sqrt(148).
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 6};
  EXPECT_NEAR(*sel::pearson(x, y), 0.8219949365267865, 1e-15);
  EXPECT_NEAR(*sel::pearson(x, y), pearson_oracle(x, y), 1e-15);
}

TEST(Pearson, ConstantInputIsUndefined) {
  EXPECT_FALSE(sel::pearson(std::vector<double>{0.3, 0.3, 0.3}, std::vector<double>{0.1, 0.2, 0.3}).has_value());
  EXPECT_THROW(sel::pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), rb::ContractError);
}

TEST(Pearson, SymmetryAndAffineInvariance) {
  rb::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform();
      y[i] = 0.5 * x[i] + 0.5 * rng.uniform();
    }
    const auto r = sel::pearson(x, y);
    ASSERT_TRUE(r);
    EXPECT_NEAR(*r, *sel::pearson(y, x), 1e-12);
    EXPECT_NEAR(*r, pearson_oracle(x, y), 1e-12);
    const double a = 0.1 + 5 * rng.uniform(), b = rng.uniform() - 0.5;
    std::vector<double> xt(n);
    for (std::size_t i = 0; i < n; ++i) xt[i] = a * x[i] + b;
    EXPECT_NEAR(std::abs(*sel::pearson(xt, y)), std::abs(*r), 1e-12);
  }
}

TEST(Entropy, Examples) {
  EXPECT_EQ(sel::feature_entropy(std::vector<double>(50, 0.37)), 0.0);
  std::vector<double> uniform;
  for (int b = 0; b < 10; ++b)
    for (int k = 0; k < 100; ++k) uniform.push_back((b + 0.5) / 10.0);
  EXPECT_NEAR(sel::feature_entropy(uniform), std::log2(10.0), 1e-12);
  const std::vector<double> col{0.05, 0.05, 0.05, 0.05, 0.55, 0.55, 0.55, 0.55, 0.95, 0.95};
  // -(0.4 log2 0.4 + 0.4 log2 0.4 + 0.2 log2 0.2)
  EXPECT_NEAR(sel::feature_entropy(col), 1.5219280948873621, 1e-12);
  // 1.0 lands in the last bin.
  EXPECT_EQ(sel::feature_entropy(std::vector<double>{1.0, 0.95}), 0.0);
  EXPECT_THROW(sel::feature_entropy(std::vector<double>{}), rb::ContractError);
}

TEST(Entropy, PermutationInvariantAndBounded) {
  rb::Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> col(1 + rng.below(200));
    for (auto& v : col) v = rng.uniform();
    const double h = sel::feature_entropy(col);
    rng.shuffle(std::span<double>(col));
    EXPECT_EQ(sel::feature_entropy(col), h);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log2(10.0) + 1e-12);
  }
}

TEST(VarianceFilter, Examples) {
  std::vector<double> constant(100, 0.3), mostly_zero(100, 0.0), spread(100);
  for (int i = 0; i < 9; ++i) mostly_zero[static_cast<std::size_t>(91 + i)] = 0.1 * (i + 1);
  std::vector<double> ninety(100, 0.0);
  for (int i = 0; i < 10; ++i) ninety[static_cast<std::size_t>(90 + i)] = 0.05 * (i + 1);
  for (std::size_t i = 0; i < 100; ++i) spread[i] = static_cast<double>(i) / 100.0;
  std::vector<int> labels(100, 0);
  labels[0] = 1;
  const auto c = from_columns({constant, mostly_zero, spread, ninety}, labels);
  const auto r = sel::variance_filter(c, 0.9);
  ASSERT_EQ(r.dropped.size(), 2u);
  EXPECT_EQ(r.dropped[0].feature, 0u);
  EXPECT_EQ(r.dropped[0].fraction, 1.0);
  EXPECT_EQ(r.dropped[1].feature, 1u);
  EXPECT_DOUBLE_EQ(r.dropped[1].fraction, 0.91);
  EXPECT_EQ(r.survivors, (std::vector<std::size_t>{2, 3}));  // 0.90 is not strictly above 0.90
}

TEST(VarianceFilter, QuantizesToSixDecimals) {
  EXPECT_DOUBLE_EQ(sel::dominant_fraction(std::vector<double>{0.1, 0.1 + 1e-9, 0.2, 0.1000004}), 0.75);
}

TEST(CorrelationPrune, DropsLowerEntropyMember) {
  rb::Rng rng(3);
  const std::size_t n = 400;
  std::vector<double> wide(n), narrow(n), noise(n);
  for (std::size_t i = 0; i < n; ++i) {
    wide[i] = rng.uniform();
    narrow[i] = 0.4 + 0.1 * wide[i];  // perfectly correlated, fewer occupied bins
    noise[i] = rng.uniform();
  }
  std::vector<int> labels(n, 0);
  labels[0] = 1;
  // wide at index 4, narrow at 5 as in the planted-pair example.
  const auto c = from_columns({noise, noise, noise, noise, wide, narrow}, labels);
  const std::vector<std::size_t> survivors{3, 4, 5};
  const auto r = sel::correlation_prune(c, survivors, 0.7);
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].kept, 4u);
  EXPECT_EQ(r.dropped[0].dropped, 5u);
  EXPECT_EQ(r.survivors, (std::vector<std::size_t>{3, 4}));
}

TEST(CorrelationPrune, EqualEntropyDropsHigherIndex) {
  std::vector<double> a{0.05, 0.15, 0.25, 0.35, 0.45, 0.55}, b = a;
  std::vector<int> labels{0, 1, 0, 1, 0, 1};
  const auto c = from_columns({a, b}, labels);
  const std::vector<std::size_t> s{0, 1};
  const auto r = sel::correlation_prune(c, s, 0.7);
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].dropped, 1u);
}

TEST(CorrelationPrune, VacuousAndIdempotent) {
  const auto c = testing_support::random_cohort(300, 12, 4);
  const auto all = testing_support::iota(12);
  const auto none = sel::correlation_prune(c, all, 0.7);
  EXPECT_TRUE(none.dropped.empty());
  EXPECT_EQ(none.survivors, all);

  // Chains of correlated columns.
  rb::Rng rng(8);
  std::vector<std::vector<double>> cols(8, std::vector<double>(300));
  for (std::size_t i = 0; i < 300; ++i) {
    const double base = rng.uniform();
    for (std::size_t j = 0; j < 8; ++j) {
      const double mix = j < 5 ? 0.15 * static_cast<double>(j) : 1.0;
      cols[j][i] = std::clamp((1 - mix) * base + mix * rng.uniform(), 0.0, 1.0);
    }
  }
  std::vector<int> labels(300, 0);
  labels[0] = 1;
  const auto chained = from_columns(cols, labels);
  const auto first = sel::correlation_prune(chained, testing_support::iota(8), 0.7);
  EXPECT_FALSE(first.dropped.empty());
  // One drop per processed pair whose members were both alive.
  std::set<std::size_t> dropped;
  for (const auto& d : first.dropped) EXPECT_TRUE(dropped.insert(d.dropped).second);
  EXPECT_EQ(first.survivors.size() + dropped.size(), 8u);
  const auto second = sel::correlation_prune(chained, first.survivors, 0.7);
  EXPECT_TRUE(second.dropped.empty());
  EXPECT_EQ(second.survivors, first.survivors);
  // Pairs are listed by descending |r|.
  for (std::size_t k = 1; k < first.pairs.size(); ++k) {
    EXPECT_GE(std::abs(first.pairs[k - 1].r), std::abs(first.pairs[k].r));
  }
}

TEST(ForwardSelect, ShortestPrefixReachingMaximum) {
  const std::vector<std::size_t> order{7, 3, 9, 1};
  const std::vector<double> scores{0.6, 0.8, 0.8, 0.7};
  const auto r = sel::forward_select(order, [&](std::span<const std::size_t> p) { return scores[p.size() - 1]; });
  ASSERT_EQ(r.auc_by_prefix.size(), 4u);
  EXPECT_EQ(r.selected, (std::vector<std::size_t>{7, 3}));
  EXPECT_EQ(r.best_auc, 0.8);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r.auc_by_prefix[i].length, i + 1);
}

TEST(ForwardSelect, ErrorsNamePrefixLength) {
  const std::vector<std::size_t> order{0, 1, 2};
  try {
    sel::forward_select(order, [](std::span<const std::size_t> p) -> double {
      if (p.size() == 2) throw rb::TrainingError("boom");
      return 0.5;
    });
    FAIL();
  } catch (const rb::SelectionError& e) {
    EXPECT_NE(std::string(e.what()).find("prefix length 2"), std::string::npos);
  }
  EXPECT_THROW(sel::forward_select(std::vector<std::size_t>{}, [](auto) { return 0.5; }), rb::SelectionError);
}

TEST(ForwardSelect, WorkerCountInvariant) {
  rb::SimConfig sim;
  sim.n_subjects = 600;
  sim.n_features = 8;
  sim.prevalence = 0.2;
  sim.planted_risk = {2};
  sim.planted_protective = {};
  sim.planted_duplicate_pairs = {};
  sim.effect_size = 0.3;
  const auto c = rb::simulate_cohort(sim);
  rb::gbdt::TrainConfig cfg;
  cfg.n_trees = 15;
  cfg.max_depth = 2;
  const std::vector<std::size_t> order{2, 0, 1, 3, 4};
  const auto ev = sel::cv_auc_evaluator(c, cfg, 3, 5);
  const auto a = sel::forward_select(order, ev, 1);
  const auto b = sel::forward_select(order, ev, 4);
  ASSERT_EQ(a.auc_by_prefix.size(), b.auc_by_prefix.size());
  for (std::size_t i = 0; i < a.auc_by_prefix.size(); ++i) EXPECT_EQ(a.auc_by_prefix[i].auc, b.auc_by_prefix[i].auc);
  EXPECT_EQ(a.selected, b.selected);
  // Single informative feature first: high AUC from the first prefix.
  EXPECT_GT(a.auc_by_prefix[0].auc, 0.75);
  EXPECT_LE(a.selected.size(), 3u);
}

TEST(ForwardSelect, PureNoiseStaysNearChance) {
  rb::SimConfig sim;
  sim.n_subjects = 800;
  sim.n_features = 6;
  sim.prevalence = 0.25;
  sim.planted_risk = {};
  sim.planted_protective = {};
  sim.planted_duplicate_pairs = {};
  const auto c = rb::simulate_cohort(sim);
  rb::gbdt::TrainConfig cfg;
  cfg.n_trees = 20;
  cfg.max_depth = 2;
  const auto r = sel::forward_select(testing_support::iota(6), sel::cv_auc_evaluator(c, cfg, 5, 1));
  for (const auto& p : r.auc_by_prefix) {
    EXPECT_GT(p.auc, 0.4);
    EXPECT_LT(p.auc, 0.6);
  }
}

TEST(RunSelection, CompositionAndReportRoundTrip) {
  rb::SimConfig sim;
  sim.n_subjects = 700;
  sim.n_features = 14;
  sim.prevalence = 0.2;
  sim.planted_risk = {1};
  sim.planted_protective = {2};
  sim.planted_duplicate_pairs = {{4, 5}, {8, 9}};
  sim.near_constant = {11};
  sim.effect_size = 0.25;
  const auto c = rb::simulate_cohort(sim);
  sel::SelectionOptions opt;
  opt.evaluator_config.n_trees = 10;
  opt.evaluator_config.max_depth = 2;
  opt.cv_folds = 3;
  const auto r = sel::run_selection(c, opt, 2);
  ASSERT_EQ(r.dropped_low_variance.size(), 1u);
  EXPECT_EQ(r.dropped_low_variance[0].feature, 11u);
  ASSERT_EQ(r.dropped_correlated.size(), 2u);
  std::set<std::size_t> dropped{11};
  for (const auto& d : r.dropped_correlated) dropped.insert(d.dropped);
  for (auto j : r.entropy_order) EXPECT_FALSE(dropped.count(j));
  for (auto j : r.selected) EXPECT_FALSE(dropped.count(j));
  EXPECT_EQ(r.entropy_order.size(), 14u - 3u);
  EXPECT_EQ(r.auc_by_prefix.size(), r.entropy_order.size());
  double best = 0;
  for (const auto& p : r.auc_by_prefix) best = std::max(best, p.auc);
  EXPECT_EQ(r.best_auc, best);
  for (std::size_t k = 1; k < r.entropy_ranking.size(); ++k) {
    EXPECT_GE(r.entropy_ranking[k - 1].entropy, r.entropy_ranking[k].entropy);
  }

  const auto back = sel::selection_from_json(nlohmann::json::parse(sel::to_json(r, c.feature_names()).dump()));
  EXPECT_EQ(back.selected, r.selected);
  EXPECT_EQ(back.entropy_order, r.entropy_order);
  EXPECT_EQ(back.best_auc, r.best_auc);
  EXPECT_EQ(sel::run_selection(c, opt, 1).selected, r.selected);
}
