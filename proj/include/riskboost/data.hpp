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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "riskboost/error.hpp"
#include "riskboost/rng.hpp"

namespace riskboost {

// "Feature1".."FeatureN"; names are 1-based, indices everywhere else are
// 0-based.
inline std::vector<std::string> default_feature_names(std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t j = 0; j < n; ++j) names.push_back("Feature" + std::to_string(j + 1));
  return names;
}

// Labeled matrix of per-subject probability features. Immutable once built;
// the constructor enforces every invariant.
class Cohort {
 public:
  Cohort() = default;

  Cohort(std::vector<std::string> subject_ids, std::vector<double> values,
         std::vector<int> labels, std::vector<std::string> feature_names)
      : subject_ids_(std::move(subject_ids)),
        values_(std::move(values)),
        labels_(std::move(labels)),
        feature_names_(std::move(feature_names)) {
    validate();
  }

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t n_features() const { return feature_names_.size(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * n_features(), n_features()};
  }
  double value(std::size_t i, std::size_t j) const { return values_[i * n_features() + j]; }
  int label(std::size_t i) const { return labels_[i]; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = value(i, j);
    return out;
  }

  const std::vector<std::string>& subject_ids() const { return subject_ids_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<double>& values() const { return values_; }

  std::size_t count_label(int label) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
  }

  // Row index of a subject, or size() when absent.
  std::size_t find(std::string_view subject_id) const {
    const auto it = std::find(subject_ids_.begin(), subject_ids_.end(), subject_id);
    return static_cast<std::size_t>(it - subject_ids_.begin());
  }

  Cohort subset(std::span<const std::size_t> rows) const {
    std::vector<std::string> ids;
    std::vector<double> values;
    std::vector<int> labels;
    ids.reserve(rows.size());
    labels.reserve(rows.size());
    values.reserve(rows.size() * n_features());
    for (std::size_t r : rows) {
      ids.push_back(subject_ids_[r]);
      labels.push_back(labels_[r]);
      const auto src = row(r);
      values.insert(values.end(), src.begin(), src.end());
    }
    return Cohort(std::move(ids), std::move(values), std::move(labels), feature_names_);
  }

  Cohort with_labels(std::vector<int> labels) const {
    return Cohort(subject_ids_, values_, std::move(labels), feature_names_);
  }

 private:
  void validate() const {
    if (labels_.size() != subject_ids_.size()) {
      throw IngestionError("label count " + std::to_string(labels_.size()) +
                           " differs from subject count " + std::to_string(subject_ids_.size()));
    }
    if (values_.size() != labels_.size() * feature_names_.size()) {
      throw IngestionError("feature matrix is not n_subjects x n_features");
    }
    std::unordered_set<std::string_view> seen;
    for (std::size_t i = 0; i < subject_ids_.size(); ++i) {
      if (subject_ids_[i].empty()) throw IngestionError("row " + std::to_string(i + 1) + ": missing subject_id");
      if (!seen.insert(subject_ids_[i]).second) {
        throw IngestionError("row " + std::to_string(i + 1) + ": duplicate subject_id '" + subject_ids_[i] + "'");
      }
      if (labels_[i] != 0 && labels_[i] != 1) {
        throw IngestionError("row " + std::to_string(i + 1) + ": label must be 0 or 1");
      }
      for (std::size_t j = 0; j < feature_names_.size(); ++j) {
        const double v = values_[i * feature_names_.size() + j];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
          throw IngestionError("row " + std::to_string(i + 1) + ", column " + feature_names_[j] +
                               ": value outside [0,1]");
        }
      }
    }
  }

  std::vector<std::string> subject_ids_;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::vector<std::string> feature_names_;
};

// ---------------------------------------------------------------------------
// CSV wire format: subject_id,label,<feature columns...>

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, out);
  return result.ec == std::errc() && result.ptr == end;
}

// Shortest representation that parses back to the same double.
inline void append_double(std::string& out, double v) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  out.append(buffer, result.ptr);
}

}  // namespace detail

inline Cohort parse_cohort(std::istream& in, std::size_t expected_features = 0) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("empty file: missing header row");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || detail::trim(header[0]) != "subject_id" || detail::trim(header[1]) != "label") {
    throw IngestionError("header must start with subject_id,label followed by feature columns");
  }
  std::vector<std::string> names;
  for (std::size_t c = 2; c < header.size(); ++c) names.emplace_back(detail::trim(header[c]));
  if (expected_features != 0 && names.size() != expected_features) {
    throw IngestionError("expected " + std::to_string(expected_features) + " feature columns, found " +
                         std::to_string(names.size()));
  }

  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<int> labels;
  std::unordered_set<std::string> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const std::string where = "row " + std::to_string(row);
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw IngestionError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    std::string id(detail::trim(fields[0]));
    if (id.empty()) throw IngestionError(where + ": missing subject_id");
    if (!seen.insert(id).second) throw IngestionError(where + ": duplicate subject_id '" + id + "'");

    const auto label_text = detail::trim(fields[1]);
    if (label_text != "0" && label_text != "1") {
      throw IngestionError(where + ": label '" + std::string(label_text) + "' is not 0 or 1");
    }
    for (std::size_t c = 2; c < fields.size(); ++c) {
      double v = 0.0;
      if (!detail::parse_double(fields[c], v)) {
        throw IngestionError(where + ", column " + names[c - 2] + ": non-numeric value '" +
                             std::string(detail::trim(fields[c])) + "'");
      }
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw IngestionError(where + ", column " + names[c - 2] + ": value " +
                             std::string(detail::trim(fields[c])) + " outside [0,1]");
      }
      values.push_back(v);
    }
    ids.push_back(std::move(id));
    labels.push_back(label_text == "1" ? 1 : 0);
  }
  return Cohort(std::move(ids), std::move(values), std::move(labels), std::move(names));
}

inline Cohort load_cohort(const std::string& path, std::size_t expected_features = 0) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open cohort file '" + path + "'");
  return parse_cohort(in, expected_features);
}

inline std::string format_cohort(const Cohort& cohort) {
  std::string out = "subject_id,label";
  for (const auto& name : cohort.feature_names()) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    out += cohort.subject_ids()[i];
    out += cohort.label(i) == 1 ? ",1" : ",0";
    for (double v : cohort.row(i)) {
      out += ',';
      detail::append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

inline void write_cohort(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write cohort file '" + path + "'");
  out << format_cohort(cohort);
}

// ---------------------------------------------------------------------------
// Stratified train/test split

struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 7;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Test rows per class = round-half-up(class_count * test_fraction), kept in
// [1, class_count - 1]. Indices come back in ascending row order.
inline SplitIndices stratified_split_indices(std::span<const int> labels, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw SplitError("test_fraction must lie in (0,1)");
  }
  std::vector<char> is_test(labels.size(), 0);
  Rng rng(spec.seed);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    if (members.size() < 2) {
      throw SplitError("class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                       " member(s); at least 2 are required");
    }
    auto n_test = static_cast<std::size_t>(
        std::floor(static_cast<double>(members.size()) * spec.test_fraction + 0.5));
    n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t k = 0; k < n_test; ++k) is_test[members[k]] = 1;
  }
  SplitIndices out;
  for (std::size_t i = 0; i < labels.size(); ++i) (is_test[i] ? out.test : out.train).push_back(i);
  return out;
}

inline std::pair<Cohort, Cohort> stratified_split(const Cohort& cohort, const SplitSpec& spec) {
  const auto idx = stratified_split_indices(cohort.labels(), spec);
  return {cohort.subset(idx.train), cohort.subset(idx.test)};
}

// ---------------------------------------------------------------------------
// Synthetic cohort generator

// Each feature j has a baseline mean in [0.25, 0.55] and a spread factor;
// values are mean + shift + noise_scale * spread * N(0,1), clamped to [0,1]
// and rounded to 6 decimals. Planted features use spread 1 and every other
// feature a spread in [0.4, 0.9], so planted features carry more histogram
// entropy. Shifts: +effect_size on planted_risk for positives, +effect_size
// on planted_protective for negatives. The second member of a duplicate pair
// copies the first plus 0.1 * noise_scale noise. Near-constant features take
// their baseline mean in 96% of rows.
struct SimConfig {
  std::size_t n_subjects = 6634;
  std::size_t n_features = 150;
  double prevalence = 0.0264;
  std::vector<std::size_t> planted_risk{8, 10, 61};
  std::vector<std::size_t> planted_protective{0, 98};
  std::vector<std::pair<std::size_t, std::size_t>> planted_duplicate_pairs{{2, 3}, {40, 41}, {75, 76}};
  std::vector<std::size_t> near_constant;
  double noise_scale = 0.15;
  double effect_size = 0.12;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_subjects == 0 || n_features == 0) throw SimulationError("n_subjects and n_features must be positive");
    if (!(prevalence > 0.0 && prevalence < 1.0)) throw SimulationError("prevalence must lie in (0,1)");
    if (!(noise_scale >= 0.0) || !(effect_size >= 0.0)) {
      throw SimulationError("noise_scale and effect_size must be nonnegative");
    }
    if (prevalence * static_cast<double>(n_subjects) < 5.0) {
      throw SimulationError("prevalence x n_subjects < 5: too few positives to train");
    }
    std::set<std::size_t> used;
    auto claim = [&](std::size_t j, const char* what) {
      if (j >= n_features) throw SimulationError(std::string(what) + " index " + std::to_string(j) + " >= n_features");
      if (!used.insert(j).second) {
        throw SimulationError("feature index " + std::to_string(j) + " appears in more than one planted set");
      }
    };
    for (auto j : planted_risk) claim(j, "planted_risk");
    for (auto j : planted_protective) claim(j, "planted_protective");
    for (auto j : near_constant) claim(j, "near_constant");
    for (auto [a, b] : planted_duplicate_pairs) {
      if (a == b) throw SimulationError("duplicate pair references the same index twice");
      claim(a, "duplicate pair");
      claim(b, "duplicate pair");
    }
  }
};

inline Cohort simulate_cohort(const SimConfig& config) {
  config.validate();
  const std::size_t n = config.n_subjects;
  const std::size_t f = config.n_features;

  enum class Role : unsigned char { kNoise, kRisk, kProtective, kNearConstant, kCopy };
  std::vector<Role> role(f, Role::kNoise);
  std::vector<std::size_t> copy_of(f, 0);
  for (auto j : config.planted_risk) role[j] = Role::kRisk;
  for (auto j : config.planted_protective) role[j] = Role::kProtective;
  for (auto j : config.near_constant) role[j] = Role::kNearConstant;
  for (auto [a, b] : config.planted_duplicate_pairs) {
    role[b] = Role::kCopy;
    copy_of[b] = a;
  }

  Rng rng(config.seed);
  std::vector<double> mean(f), spread(f);
  for (std::size_t j = 0; j < f; ++j) {
    mean[j] = 0.25 + 0.30 * rng.uniform();
    const double s = 0.4 + 0.5 * rng.uniform();
    spread[j] = (role[j] == Role::kRisk || role[j] == Role::kProtective) ? 1.0 : s;
  }

  std::vector<int> labels(n);
  for (auto& y : labels) y = rng.bernoulli(config.prevalence) ? 1 : 0;

  auto finish = [](double v) { return std::round(std::clamp(v, 0.0, 1.0) * 1e6) / 1e6; };

  std::vector<double> values(n * f);
  for (std::size_t i = 0; i < n; ++i) {
    double* x = values.data() + i * f;
    for (std::size_t j = 0; j < f; ++j) {
      const double z = rng.normal();
      double shift = 0.0;
      switch (role[j]) {
        case Role::kCopy:
          continue;
        case Role::kNearConstant: {
          const double u = rng.uniform();
          x[j] = finish(u < 0.96 ? mean[j] : mean[j] + config.noise_scale * spread[j] * z);
          continue;
        }
        case Role::kRisk:
          shift = labels[i] == 1 ? config.effect_size : 0.0;
          break;
        case Role::kProtective:
          shift = labels[i] == 0 ? config.effect_size : 0.0;
          break;
        case Role::kNoise:
          break;
      }
      x[j] = finish(mean[j] + shift + config.noise_scale * spread[j] * z);
    }
    for (std::size_t j = 0; j < f; ++j) {
      if (role[j] != Role::kCopy) continue;
      x[j] = finish(x[copy_of[j]] + 0.1 * config.noise_scale * rng.normal());
    }
  }

  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string number = std::to_string(i + 1);
    ids[i] = "S" + std::string(number.size() < 6 ? 6 - number.size() : 0, '0') + number;
  }
  return Cohort(std::move(ids), std::move(values), std::move(labels), default_feature_names(f));
}

}  // namespace riskboost
