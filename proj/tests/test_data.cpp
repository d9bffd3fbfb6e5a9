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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "riskboost/data.hpp"
#include "riskboost/select.hpp"
#include "support.hpp"

namespace rb = riskboost;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const rb::IngestionError& e) {
    return e.what();
  }
  return "";
}

rb::Cohort parse(const std::string& text) {
  std::istringstream in(text);
  return rb::parse_cohort(in);
}

std::vector<int> labels_with(std::size_t positives, std::size_t negatives) {
  std::vector<int> y(positives + negatives, 0);
  // Interleave so class membership is not a contiguous block.
  for (std::size_t i = 0; i < positives; ++i) y[(i * 37) % y.size()] = 1;
  std::size_t count = 0;
  for (int v : y) count += static_cast<std::size_t>(v);
  for (std::size_t i = 0; count < positives; ++i) {
    if (y[i] == 0) {
      y[i] = 1;
      ++count;
    }
  }
  return y;
}

}  // namespace

TEST(Cohort, MinimalFileLoads) {
  const auto c = parse("subject_id,label,F1,F2\na,0,0.5,0.5\nb,1,0.5,0.5\nc,0,0.5,0.5\n");
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(c.n_features(), 2u);
  EXPECT_EQ(c.labels(), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(c.subject_ids()[2], "c");
  EXPECT_EQ(c.feature_names()[1], "F2");
}

TEST(Cohort, OutOfRangeValueNamesRowAndColumn) {
  const auto msg = message_of([] { parse("subject_id,label,F1,F2\na,0,0.5,0.5\nb,1,0.5,1.2\n"); });
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("F2"), std::string::npos) << msg;
}

TEST(Cohort, NonNumericValueNamesRowAndColumn) {
  const auto msg = message_of([] { parse("subject_id,label,F1\na,0,abc\n"); });
  EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("F1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("non-numeric"), std::string::npos) << msg;
}

TEST(Cohort, IngestionErrors) {
  EXPECT_THROW(parse(""), rb::IngestionError);
  EXPECT_THROW(parse("id,label,F1\na,0,0.1\n"), rb::IngestionError);
  EXPECT_THROW(parse("subject_id,label,F1\na,0,0.1\na,1,0.2\n"), rb::IngestionError);
  EXPECT_THROW(parse("subject_id,label,F1\n,0,0.1\n"), rb::IngestionError);
  EXPECT_THROW(parse("subject_id,label,F1\na,2,0.1\n"), rb::IngestionError);
  EXPECT_THROW(parse("subject_id,label,F1\na,0,0.1,0.2\n"), rb::IngestionError);
  EXPECT_THROW(parse("subject_id,label,F1\na,0,nan\n"), rb::IngestionError);
  EXPECT_THROW(parse("subject_id,label,F1\na,0,-0.01\n"), rb::IngestionError);
  const auto dup = message_of([] { parse("subject_id,label,F1\na,0,0.1\na,1,0.2\n"); });
  EXPECT_NE(dup.find("row 2"), std::string::npos) << dup;
  std::istringstream in("subject_id,label,F1\na,0,0.1\n");
  EXPECT_THROW(rb::parse_cohort(in, 150), rb::IngestionError);
  EXPECT_THROW(rb::load_cohort("/nonexistent/cohort.csv"), rb::IngestionError);
}

TEST(Cohort, RoundTripIsBitExact) {
  rb::SimConfig cfg;
  cfg.n_subjects = 300;
  cfg.n_features = 12;
  cfg.prevalence = 0.2;
  cfg.planted_risk = {1};
  cfg.planted_protective = {2};
  cfg.planted_duplicate_pairs = {{4, 5}};
  auto c = rb::simulate_cohort(cfg);
  // Add awkward doubles that need all 17 digits.
  std::vector<double> values = c.values();
  values[0] = 0.1 + 0.2;
  values[1] = std::nextafter(1.0, 0.0);
  values[2] = 5e-324;
  c = rb::Cohort(c.subject_ids(), values, c.labels(), c.feature_names());
  const auto path = std::filesystem::temp_directory_path() / "riskboost_roundtrip.csv";
  rb::write_cohort(c, path.string());
  const auto back = rb::load_cohort(path.string(), 12);
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), c.size());
  EXPECT_EQ(back.subject_ids(), c.subject_ids());
  EXPECT_EQ(back.labels(), c.labels());
  EXPECT_EQ(back.feature_names(), c.feature_names());
  EXPECT_EQ(std::memcmp(back.values().data(), c.values().data(), c.values().size() * sizeof(double)), 0);
}

TEST(Cohort, ConstructorValidates) {
  EXPECT_THROW(rb::Cohort({"a", "a"}, {0.1, 0.2}, {0, 1}, {"F1"}), rb::Error);
  EXPECT_THROW(rb::Cohort({"a"}, {0.1, 0.2}, {0}, {"F1"}), rb::Error);
  EXPECT_THROW(rb::Cohort({"a"}, {1.5}, {0}, {"F1"}), rb::Error);
  EXPECT_THROW(rb::Cohort({"a"}, {0.5}, {3}, {"F1"}), rb::Error);
}

TEST(Cohort, DefaultNamesAreOneBased) {
  const auto names = rb::default_feature_names(150);
  EXPECT_EQ(names.front(), "Feature1");
  EXPECT_EQ(names.back(), "Feature150");
}

TEST(Split, PublishedCohortCounts) {
  const auto y = labels_with(175, 6459);
  const auto idx = rb::stratified_split_indices(y, {0.2, 7});
  std::size_t test_pos = 0, train_pos = 0;
  for (auto i : idx.test) test_pos += static_cast<std::size_t>(y[i]);
  for (auto i : idx.train) train_pos += static_cast<std::size_t>(y[i]);
  EXPECT_EQ(test_pos, 35u);
  EXPECT_EQ(train_pos, 140u);
  EXPECT_EQ(idx.test.size() - test_pos, 1292u);
  EXPECT_EQ(idx.train.size() - train_pos, 5167u);
}

TEST(Split, SmallClassExactArithmetic) {
  const std::vector<int> y{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  const auto idx = rb::stratified_split_indices(y, {0.2, 3});
  EXPECT_EQ(idx.test.size(), 4u);
  EXPECT_EQ(idx.train.size(), 16u);
  std::set<std::size_t> all(idx.test.begin(), idx.test.end());
  all.insert(idx.train.begin(), idx.train.end());
  EXPECT_EQ(all.size(), y.size());
}

TEST(Split, PartitionAndCountsForManySeeds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    rb::Rng rng(seed);
    const std::size_t pos = 2 + rng.below(40), neg = 2 + rng.below(200);
    const double f = 0.05 + 0.9 * rng.uniform();
    const auto y = labels_with(pos, neg);
    const auto idx = rb::stratified_split_indices(y, {f, seed});
    std::vector<int> seen(y.size(), 0);
    for (auto i : idx.test) ++seen[i];
    for (auto i : idx.train) ++seen[i];
    for (int s : seen) ASSERT_EQ(s, 1);
    for (int cls : {0, 1}) {
      const std::size_t count = cls == 1 ? pos : neg;
      std::size_t expected = static_cast<std::size_t>(std::floor(static_cast<double>(count) * f + 0.5));
      expected = std::clamp<std::size_t>(expected, 1, count - 1);
      std::size_t got = 0;
      for (auto i : idx.test) got += y[i] == cls ? 1 : 0;
      EXPECT_EQ(got, expected) << "seed " << seed << " class " << cls;
    }
  }
}

TEST(Split, DeterministicAndSeedSensitive) {
  const auto y = labels_with(30, 300);
  const auto a = rb::stratified_split_indices(y, {0.2, 11});
  const auto b = rb::stratified_split_indices(y, {0.2, 11});
  const auto c = rb::stratified_split_indices(y, {0.2, 12});
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.test, c.test);
}

TEST(Split, Errors) {
  EXPECT_THROW(rb::stratified_split_indices(std::vector<int>{1, 0, 0, 0}, {0.2, 1}), rb::SplitError);
  EXPECT_THROW(rb::stratified_split_indices(std::vector<int>{1, 1, 0, 0}, {0.0, 1}), rb::SplitError);
  EXPECT_THROW(rb::stratified_split_indices(std::vector<int>{1, 1, 0, 0}, {1.0, 1}), rb::SplitError);
}

TEST(Simulate, DefaultCohortShapeAndPrevalence) {
  const auto c = rb::simulate_cohort({});
  EXPECT_EQ(c.size(), 6634u);
  EXPECT_EQ(c.n_features(), 150u);
  // Binomial 3-sigma interval around 6634 * 0.0264 = 175.1.
  const double mu = 6634 * 0.0264, sd = std::sqrt(6634 * 0.0264 * (1 - 0.0264));
  EXPECT_GE(static_cast<double>(c.count_label(1)), mu - 3 * sd);
  EXPECT_LE(static_cast<double>(c.count_label(1)), mu + 3 * sd);
  EXPECT_GE(c.count_label(1), 135u);
  EXPECT_LE(c.count_label(1), 215u);
}

TEST(Simulate, PureFunctionOfConfig) {
  rb::SimConfig cfg;
  cfg.n_subjects = 500;
  cfg.n_features = 20;
  cfg.prevalence = 0.1;
  cfg.planted_risk = {1, 2};
  cfg.planted_protective = {3};
  cfg.planted_duplicate_pairs = {{4, 5}};
  EXPECT_EQ(rb::format_cohort(rb::simulate_cohort(cfg)), rb::format_cohort(rb::simulate_cohort(cfg)));
  auto other = cfg;
  other.seed = 8;
  EXPECT_NE(rb::format_cohort(rb::simulate_cohort(cfg)), rb::format_cohort(rb::simulate_cohort(other)));
}

TEST(Simulate, PlantedStructure) {
  rb::SimConfig cfg;
  cfg.n_subjects = 4000;
  cfg.n_features = 10;
  cfg.prevalence = 0.3;
  cfg.planted_risk = {0};
  cfg.planted_protective = {1};
  cfg.planted_duplicate_pairs = {{4, 5}};
  cfg.near_constant = {7};
  const auto c = rb::simulate_cohort(cfg);
  auto class_mean = [&](std::size_t j, int cls) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c.label(i) == cls) {
        s += c.value(i, j);
        ++n;
      }
    return s / static_cast<double>(n);
  };
  EXPECT_GT(class_mean(0, 1), class_mean(0, 0) + 0.05);
  EXPECT_GT(class_mean(1, 0), class_mean(1, 1) + 0.05);
  const auto r = rb::select::pearson(c.column(4), c.column(5));
  ASSERT_TRUE(r.has_value());
  EXPECT_GT(*r, 0.9);
  EXPECT_GT(rb::select::dominant_fraction(c.column(7)), 0.9);
  for (double v : c.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Simulate, NullConstructionWithoutNoise) {
  rb::SimConfig cfg;
  cfg.n_subjects = 200;
  cfg.n_features = 6;
  cfg.prevalence = 0.4;
  cfg.planted_risk = {};
  cfg.planted_protective = {};
  cfg.planted_duplicate_pairs = {};
  cfg.noise_scale = 0.0;
  const auto c = rb::simulate_cohort(cfg);
  for (std::size_t j = 0; j < c.n_features(); ++j) {
    const auto col = c.column(j);
    for (double v : col) EXPECT_EQ(v, col[0]);
  }
}

TEST(Simulate, TinyBalancedCohort) {
  rb::SimConfig cfg;
  cfg.n_subjects = 20;
  cfg.n_features = 4;
  cfg.prevalence = 0.5;
  cfg.planted_risk = {0};
  cfg.planted_protective = {1};
  cfg.planted_duplicate_pairs = {};
  EXPECT_EQ(rb::simulate_cohort(cfg).size(), 20u);
}

TEST(Simulate, ConfigErrors) {
  rb::SimConfig cfg;
  cfg.n_subjects = 100;
  cfg.prevalence = 0.01;
  EXPECT_THROW(rb::simulate_cohort(cfg), rb::SimulationError);
  cfg = {};
  cfg.planted_protective = {8};
  EXPECT_THROW(rb::simulate_cohort(cfg), rb::SimulationError);
  cfg = {};
  cfg.planted_duplicate_pairs = {{5, 5}};
  EXPECT_THROW(rb::simulate_cohort(cfg), rb::SimulationError);
  cfg = {};
  cfg.planted_risk = {150};
  EXPECT_THROW(rb::simulate_cohort(cfg), rb::SimulationError);
  cfg = {};
  cfg.prevalence = 1.0;
  EXPECT_THROW(rb::simulate_cohort(cfg), rb::SimulationError);
}
