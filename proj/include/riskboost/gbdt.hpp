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
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskboost/data.hpp"
#include "riskboost/error.hpp"

namespace riskboost::gbdt {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr double kProbaFloor = 1e-7;

struct TrainConfig {
  int n_trees = 200;
  int max_depth = 4;
  double learning_rate = 0.1;
  double reg_lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  double scale_pos_weight = 1.0;
  // Unset means the (instance-weighted) prevalence of the training labels.
  std::optional<double> base_score;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trees < 0) throw ConfigError("n_trees must be >= 0");
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("learning_rate must lie in (0,1]");
    if (!(reg_lambda >= 0.0)) throw ConfigError("reg_lambda must be >= 0");
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
    if (!(min_child_weight >= 0.0)) throw ConfigError("min_child_weight must be >= 0");
    if (!(scale_pos_weight > 0.0)) throw ConfigError("scale_pos_weight must be > 0");
    if (base_score && !(*base_score > 0.0 && *base_score < 1.0)) {
      throw ConfigError("base_score must lie in (0,1)");
    }
  }

  bool operator==(const TrainConfig&) const = default;
};

// Internal nodes send x[feature] < threshold left and everything else right.
// Leaves have left == right == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf = 0.0;
  double cover = 0.0;

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int leaf_index(std::span<const double> x) const {
    int id = 0;
    while (!nodes[id].is_leaf()) {
      const auto& n = nodes[id];
      id = x[n.feature] < n.threshold ? n.left : n.right;
    }
    return id;
  }
  double predict(std::span<const double> x) const { return nodes[leaf_index(x)].leaf; }
};

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double sigmoid(double margin) { return 1.0 / (1.0 + std::exp(-margin)); }

struct BoostedModel {
  std::vector<Tree> trees;
  TrainConfig config;
  double base_score = 0.5;
  std::vector<std::string> feature_names;
  std::vector<std::size_t> feature_subset;
  std::vector<double> training_log;

  double base_margin() const { return logit(base_score); }
};

struct GradHess {
  double g = 0.0;
  double h = 0.0;
};

// First and second derivative of the weighted logistic loss w.r.t. the margin.
inline GradHess logistic_grad_hess(double p, int y, double w) {
  require(p > 0.0 && p < 1.0, "probability must lie strictly inside (0,1)");
  return {w * (p - static_cast<double>(y)), w * p * (1.0 - p)};
}

inline double split_gain(double grad_left, double hess_left, double grad_right, double hess_right,
                         double reg_lambda, double gamma) {
  const double grad = grad_left + grad_right;
  const double hess = hess_left + hess_right;
  return 0.5 * (grad_left * grad_left / (hess_left + reg_lambda) +
                grad_right * grad_right / (hess_right + reg_lambda) - grad * grad / (hess + reg_lambda)) -
         gamma;
}

inline double leaf_weight(double grad, double hess, const TrainConfig& config) {
  return -grad / (hess + config.reg_lambda) * config.learning_rate;
}

inline double clamp_proba(double p) { return std::clamp(p, kProbaFloor, 1.0 - kProbaFloor); }

inline double predict_margin(const BoostedModel& model, std::span<const double> x) {
  require(x.size() == model.feature_names.size(), "feature vector has " + std::to_string(x.size()) +
                                                      " entries, model expects " +
                                                      std::to_string(model.feature_names.size()));
  for (double v : x) require(std::isfinite(v), "non-finite feature value");
  double margin = model.base_margin();
  for (const auto& tree : model.trees) margin += tree.predict(x);
  return margin;
}

inline double predict_proba(const BoostedModel& model, std::span<const double> x) {
  return clamp_proba(sigmoid(predict_margin(model, x)));
}

inline std::vector<double> predict_proba(const BoostedModel& model, const Cohort& cohort) {
  std::vector<double> out(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) out[i] = predict_proba(model, cohort.row(i));
  return out;
}

inline std::vector<double> predict_margin(const BoostedModel& model, const Cohort& cohort) {
  std::vector<double> out(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) out[i] = predict_margin(model, cohort.row(i));
  return out;
}

namespace detail {

// Numerically stable weighted mean logistic loss on margins.
inline double mean_log_loss(std::span<const double> margins, std::span<const int> labels,
                            std::span<const double> weights) {
  double total = 0.0, weight = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const double z = labels[i] == 1 ? -margins[i] : margins[i];
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    total += weights[i] * softplus;
    weight += weights[i];
  }
  return total / weight;
}

inline double split_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) * 0.5;
  return mid > lo ? mid : hi;
}

// Feature columns sorted by (value, row), stored feature-major with stride n.
struct SortedColumns {
  std::size_t n_rows = 0;
  std::vector<double> values;
  std::vector<std::uint32_t> rows;
};

struct Candidate {
  double score_num = -1.0;
  double score_den = 1.0;
  std::size_t position = 0;
  double lo = 0.0;
  double hi = 0.0;
  double grad_left = 0.0;
  double hess_left = 0.0;
  bool found = false;
};

// Grows one depth-limited tree level by level. Every open node owns the
// same [begin, end) segment in each feature's sorted column; segments are
// stably partitioned into children after each level and rows that reached
// a leaf are dropped. Candidates lie between consecutive distinct values of
// a segment and are ranked by GL^2/(HL+l) + GR^2/(HR+l), which orders them
// as split_gain does. Ties keep the lowest feature index, then the lowest
// threshold. Children on the last level are finalized without partitioning.
class TreeGrower {
 public:
  TreeGrower(const SortedColumns& sorted, const std::vector<std::vector<double>>& columns,
             const std::vector<std::size_t>& features, const TrainConfig& config)
      : sorted_(sorted), columns_(columns), features_(features), config_(config) {
    const std::size_t total = sorted_.values.size();
    values_a_.resize(total);
    values_b_.resize(total);
    rows_a_.resize(total);
    rows_b_.resize(total);
    go_left_.resize(sorted_.n_rows);
  }

  // Returns the tree and writes the leaf weight reached by every row.
  Tree grow(std::span<const GradHess> gh, std::span<double> row_output) {
    const std::size_t n = sorted_.n_rows;
    const std::size_t n_features = features_.size();

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<Segment> open(1);
    open[0] = {0, n, 0, 0.0, 0.0};
    for (const auto& x : gh) {
      open[0].grad += x.g;
      open[0].hess += x.h;
    }
    tree.nodes[0].cover = open[0].hess;

    // The root level reads the shared sorted columns; deeper levels ping-pong
    // between the two work buffers.
    const double* values = sorted_.values.data();
    const std::uint32_t* rows = sorted_.rows.data();
    bool into_a = true;

    for (int depth = 0; !open.empty(); ++depth) {
      std::vector<Candidate> best(open.size());
      if (depth < config_.max_depth && n_features > 0) {
        for (std::size_t o = 0; o < open.size(); ++o) {
          for (std::size_t p = 0; p < n_features; ++p) scan(values + p * n, rows + p * n, gh, open[o], p, best[o]);
        }
      }

      std::vector<Segment> next;
      std::vector<int> first_child(open.size(), -1);
      std::size_t offset = 0;
      for (std::size_t o = 0; o < open.size(); ++o) {
        const Segment& seg = open[o];
        const Candidate& c = best[o];
        bool split = false;
        if (c.found) {
          split = split_gain(c.grad_left, c.hess_left, seg.grad - c.grad_left, seg.hess - c.hess_left,
                             config_.reg_lambda, config_.gamma) > 0.0;
        }
        if (!split) {
          const double weight = leaf_weight(seg.grad, seg.hess, config_);
          tree.nodes[seg.node].leaf = weight;
          for (std::size_t k = seg.begin; k < seg.end; ++k) row_output[rows[k]] = weight;
          continue;
        }
        const int left = static_cast<int>(tree.nodes.size());
        {
          auto& node = tree.nodes[seg.node];
          node.feature = static_cast<int>(features_[c.position]);
          node.threshold = split_threshold(c.lo, c.hi);
          node.left = left;
          node.right = left + 1;
        }
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();

        const auto& column = columns_[c.position];
        const double threshold = tree.nodes[seg.node].threshold;
        Segment l{0, 0, left, 0.0, 0.0};
        Segment r{0, 0, left + 1, 0.0, 0.0};
        std::size_t n_left = 0;
        for (std::size_t k = seg.begin; k < seg.end; ++k) {
          const std::uint32_t row = rows[k];
          const bool goes_left = column[row] < threshold;
          go_left_[row] = goes_left;
          Segment& child = goes_left ? l : r;
          child.grad += gh[row].g;
          child.hess += gh[row].h;
          n_left += goes_left;
        }
        l.begin = offset;
        l.end = offset + n_left;
        r.begin = l.end;
        r.end = offset + (seg.end - seg.begin);
        offset = r.end;
        tree.nodes[l.node].cover = l.hess;
        tree.nodes[r.node].cover = r.hess;
        if (depth + 1 == config_.max_depth) {
          const double weight_left = leaf_weight(l.grad, l.hess, config_);
          const double weight_right = leaf_weight(r.grad, r.hess, config_);
          tree.nodes[l.node].leaf = weight_left;
          tree.nodes[r.node].leaf = weight_right;
          for (std::size_t k = seg.begin; k < seg.end; ++k) {
            row_output[rows[k]] = go_left_[rows[k]] ? weight_left : weight_right;
          }
          continue;
        }
        first_child[o] = static_cast<int>(next.size());
        next.push_back(l);
        next.push_back(r);
      }
      if (next.empty()) break;

      double* out_values = into_a ? values_a_.data() : values_b_.data();
      std::uint32_t* out_rows = into_a ? rows_a_.data() : rows_b_.data();
      for (std::size_t p = 0; p < n_features; ++p) {
        const double* in_v = values + p * n;
        const std::uint32_t* in_r = rows + p * n;
        double* dst_v = out_values + p * n;
        std::uint32_t* dst_r = out_rows + p * n;
        for (std::size_t o = 0; o < open.size(); ++o) {
          if (first_child[o] < 0) continue;
          std::size_t li = next[first_child[o]].begin;
          std::size_t ri = next[first_child[o] + 1].begin;
          for (std::size_t k = open[o].begin; k < open[o].end; ++k) {
            const std::uint32_t row = in_r[k];
            const std::size_t left_flag = static_cast<std::size_t>(go_left_[row]);
            const std::size_t at = left_flag * li + (1 - left_flag) * ri;
            li += left_flag;
            ri += 1 - left_flag;
            dst_v[at] = in_v[k];
            dst_r[at] = row;
          }
        }
      }
      values = out_values;
      rows = out_rows;
      into_a = !into_a;
      open = std::move(next);
    }
    return tree;
  }

 private:
  struct Segment {
    std::size_t begin = 0;
    std::size_t end = 0;
    int node = 0;
    double grad = 0.0;
    double hess = 0.0;
  };

  void scan(const double* values, const std::uint32_t* rows, std::span<const GradHess> gh, const Segment& seg,
            std::size_t position, Candidate& best) const {
    const double lambda = config_.reg_lambda;
    const double min_child = config_.min_child_weight;
    double best_num = best.score_num;
    double best_den = best.score_den;
    double grad_left = 0.0, hess_left = 0.0;
    double previous = values[seg.begin];
    for (std::size_t k = seg.begin; k < seg.end; ++k) {
      const double v = values[k];
      if (v != previous) {
        const double hess_right = seg.hess - hess_left;
        if (hess_left >= min_child && hess_right >= min_child) {
          // GL^2/(HL+l) + GR^2/(HR+l) as num/den, compared against the best
          // so far by cross-multiplication (both denominators are positive).
          const double grad_right = seg.grad - grad_left;
          const double den_left = hess_left + lambda;
          const double den_right = hess_right + lambda;
          const double num = grad_left * grad_left * den_right + grad_right * grad_right * den_left;
          const double den = den_left * den_right;
          if (num * best_den > best_num * den) {
            best_num = num;
            best_den = den;
            best = {num, den, position, previous, v, grad_left, hess_left, true};
          }
        }
        previous = v;
      }
      const auto& x = gh[rows[k]];
      grad_left += x.g;
      hess_left += x.h;
    }
  }

  const SortedColumns& sorted_;
  const std::vector<std::vector<double>>& columns_;
  const std::vector<std::size_t>& features_;
  const TrainConfig& config_;
  std::vector<double> values_a_, values_b_;
  std::vector<std::uint32_t> rows_a_, rows_b_;
  std::vector<char> go_left_;
};

}  // namespace detail

// Second-order boosting with logistic loss and exact greedy split search.
inline BoostedModel fit(const Cohort& train, std::span<const std::size_t> feature_subset, const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw TrainingError("empty training cohort");
  const std::size_t positives = train.count_label(1);
  if (positives == 0 || positives == train.size()) throw TrainingError("training labels contain a single class");
  if (train.size() > std::numeric_limits<std::uint32_t>::max()) throw TrainingError("too many rows");

  std::vector<std::size_t> features(feature_subset.begin(), feature_subset.end());
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  for (auto f : features) {
    if (f >= train.n_features()) throw TrainingError("feature index " + std::to_string(f) + " out of range");
  }

  const std::size_t n = train.size();
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) weights[i] = train.label(i) == 1 ? config.scale_pos_weight : 1.0;

  BoostedModel model;
  model.config = config;
  model.feature_names = train.feature_names();
  model.feature_subset = features;
  if (config.base_score) {
    model.base_score = *config.base_score;
  } else {
    double positive_weight = 0.0, total_weight = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total_weight += weights[i];
      if (train.label(i) == 1) positive_weight += weights[i];
    }
    model.base_score = positive_weight / total_weight;
  }
  if (!(model.base_score > 0.0 && model.base_score < 1.0)) {
    throw TrainingError("non-finite base margin at iteration 0 (instance weights overflow)");
  }

  std::vector<std::vector<double>> columns(features.size());
  detail::SortedColumns sorted;
  sorted.n_rows = n;
  sorted.values.resize(features.size() * n);
  sorted.rows.resize(features.size() * n);
  std::vector<std::uint32_t> order(n);
  for (std::size_t p = 0; p < features.size(); ++p) {
    columns[p] = train.column(features[p]);
    const auto& col = columns[p];
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return col[a] < col[b] || (col[a] == col[b] && a < b);
    });
    for (std::size_t k = 0; k < n; ++k) {
      sorted.rows[p * n + k] = order[k];
      sorted.values[p * n + k] = col[order[k]];
    }
  }

  detail::TreeGrower grower(sorted, columns, features, config);

  std::vector<double> margins(n, model.base_margin());
  std::vector<GradHess> gh(n);
  std::vector<double> row_output(n);
  model.trees.reserve(static_cast<std::size_t>(config.n_trees));
  for (int t = 0; t < config.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      gh[i] = logistic_grad_hess(clamp_proba(sigmoid(margins[i])), train.label(i), weights[i]);
      if (!std::isfinite(gh[i].g) || !std::isfinite(gh[i].h)) {
        throw TrainingError("non-finite gradient at iteration " + std::to_string(t));
      }
    }
    model.trees.push_back(grower.grow(gh, row_output));
    for (std::size_t i = 0; i < n; ++i) {
      margins[i] += row_output[i];
      if (!std::isfinite(margins[i])) {
        throw TrainingError("non-finite margin at iteration " + std::to_string(t));
      }
    }
    model.training_log.push_back(detail::mean_log_loss(margins, train.labels(), weights));
  }
  return model;
}

// ---------------------------------------------------------------------------
// JSON model files

inline nlohmann::ordered_json config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j = {{"n_trees", c.n_trees},
                              {"max_depth", c.max_depth},
                              {"learning_rate", c.learning_rate},
                              {"reg_lambda", c.reg_lambda},
                              {"gamma", c.gamma},
                              {"min_child_weight", c.min_child_weight},
                              {"scale_pos_weight", c.scale_pos_weight}};
  j["base_score"] = c.base_score ? nlohmann::ordered_json(*c.base_score) : nlohmann::ordered_json(nullptr);
  j["seed"] = c.seed;
  return j;
}

// Reads the fields present in j on top of `base`.
inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  try {
    if (j.contains("n_trees")) base.n_trees = j.at("n_trees").get<int>();
    if (j.contains("max_depth")) base.max_depth = j.at("max_depth").get<int>();
    if (j.contains("learning_rate")) base.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("reg_lambda")) base.reg_lambda = j.at("reg_lambda").get<double>();
    if (j.contains("gamma")) base.gamma = j.at("gamma").get<double>();
    if (j.contains("min_child_weight")) base.min_child_weight = j.at("min_child_weight").get<double>();
    if (j.contains("scale_pos_weight")) base.scale_pos_weight = j.at("scale_pos_weight").get<double>();
    if (j.contains("base_score")) {
      base.base_score = j.at("base_score").is_null() ? std::nullopt
                                                     : std::optional<double>(j.at("base_score").get<double>());
    }
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  base.validate();
  return base;
}

inline nlohmann::ordered_json model_to_json(const BoostedModel& model) {
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const auto& tree : model.trees) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      const auto& n = tree.nodes[id];
      if (n.is_leaf()) {
        nodes.push_back({{"id", id}, {"leaf", n.leaf}, {"cover", n.cover}});
      } else {
        nodes.push_back({{"id", id},
                         {"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"cover", n.cover}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  nlohmann::ordered_json j;
  j["schema_version"] = kModelSchemaVersion;
  j["objective"] = "binary:logistic";
  j["config"] = config_to_json(model.config);
  j["base_score"] = model.base_score;
  j["feature_names"] = model.feature_names;
  j["feature_subset"] = model.feature_subset;
  j["trees"] = std::move(trees);
  j["training_log"] = model.training_log;
  return j;
}

inline BoostedModel model_from_json(const nlohmann::json& j) {
  BoostedModel model;
  try {
    if (!j.is_object() || !j.contains("schema_version")) throw ModelIoError("missing schema_version");
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw ModelIoError("schema_version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kModelSchemaVersion) + ")");
    }
    model.config = config_from_json(j.at("config"));
    model.base_score = j.at("base_score").get<double>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.feature_subset = j.at("feature_subset").get<std::vector<std::size_t>>();
    model.training_log = j.at("training_log").get<std::vector<double>>();
    for (const auto& jt : j.at("trees")) {
      Tree tree;
      const auto& nodes = jt.at("nodes");
      tree.nodes.resize(nodes.size());
      for (const auto& jn : nodes) {
        const auto id = jn.at("id").get<std::size_t>();
        if (id >= tree.nodes.size()) throw ModelIoError("node id out of range");
        auto& n = tree.nodes[id];
        n.cover = jn.at("cover").get<double>();
        if (jn.contains("leaf")) {
          n.leaf = jn.at("leaf").get<double>();
        } else {
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
        }
      }
      for (const auto& n : tree.nodes) {
        if (n.is_leaf()) continue;
        const auto size = static_cast<int>(tree.nodes.size());
        if (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size) {
          throw ModelIoError("child index out of range");
        }
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= model.feature_names.size()) {
          throw ModelIoError("node references unknown feature " + std::to_string(n.feature));
        }
      }
      if (tree.nodes.empty()) throw ModelIoError("tree without nodes");
      model.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ModelIoError(e.what());
  } catch (const ConfigError& e) {
    throw ModelIoError(e.what());
  }
  if (!(model.base_score > 0.0 && model.base_score < 1.0)) throw ModelIoError("base_score outside (0,1)");
  return model;
}

inline std::string dump_model(const BoostedModel& model) { return model_to_json(model).dump(1) + "\n"; }

inline void save_model(const BoostedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelIoError("cannot write '" + path + "'");
  out << dump_model(model);
}

inline BoostedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelIoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ModelIoError("'" + path + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace riskboost::gbdt
