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

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskboost/baselines.hpp"
#include "riskboost/data.hpp"
#include "riskboost/error.hpp"
#include "riskboost/erroranalysis.hpp"
#include "riskboost/explain.hpp"
#include "riskboost/gbdt.hpp"
#include "riskboost/metrics.hpp"
#include "riskboost/rng.hpp"
#include "riskboost/select.hpp"
#include "riskboost/svg.hpp"
#include "riskboost/tune.hpp"

// End-to-end stages, the top-level JSON config and run manifests.
namespace riskboost::pipeline {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* kVersion = "1.0.0";

// Streams for per-stage seeds derived from the global seed.
inline constexpr std::uint64_t kSelectionStream = 1;
inline constexpr std::uint64_t kTuningStream = 2;
inline constexpr std::uint64_t kBaselineStream = 3;

struct PipelineConfig {
  std::uint64_t seed = 7;
  std::size_t workers = 0;
  SimConfig simulate;
  double test_fraction = 0.2;
  select::SelectionOptions selection;
  tune::Grid grid;
  int tuning_folds = 5;
  gbdt::TrainConfig train_base;
  double threshold = 0.5;
  bool svg = true;
  std::size_t explain_top_k = 20;
  std::size_t dependence_features = 9;
  std::optional<double> errors_threshold;
  double alpha = 0.05;
  std::size_t waterfall_top_k = 10;
  std::size_t max_fp_cases = 5;
  baselines::KnnConfig knn;
  std::vector<int> knn_k_grid{3, 5, 7, 9, 15};
  int knn_folds = 5;

  SplitSpec split_spec() const { return {test_fraction, seed}; }
  double error_threshold() const { return errors_threshold.value_or(threshold); }
  std::uint64_t selection_seed() const { return derive_seed(seed, kSelectionStream); }
  std::uint64_t tuning_seed() const { return derive_seed(seed, kTuningStream); }
  std::uint64_t baseline_seed() const { return derive_seed(seed, kBaselineStream); }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& section, std::set<std::string> allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in config section '" + section + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

// Applies a parsed config document over the defaults. Unknown keys are
// rejected so that typos do not silently fall back to defaults.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  std::string where = "top level";
  try {
    detail::check_keys(j, where,
                       {"seed", "workers", "simulate", "split", "select", "train", "evaluate", "explain", "errors",
                        "baseline"});
    detail::read(j, "seed", c.seed);
    detail::read(j, "workers", c.workers);
    if (j.contains("simulate")) {
      const auto& s = j.at("simulate");
      where = "simulate";
      detail::check_keys(s, where,
                         {"n_subjects", "n_features", "prevalence", "planted_risk", "planted_protective",
                          "planted_duplicate_pairs", "near_constant", "noise_scale", "effect_size"});
      detail::read(s, "n_subjects", c.simulate.n_subjects);
      detail::read(s, "n_features", c.simulate.n_features);
      detail::read(s, "prevalence", c.simulate.prevalence);
      detail::read(s, "planted_risk", c.simulate.planted_risk);
      detail::read(s, "planted_protective", c.simulate.planted_protective);
      detail::read(s, "planted_duplicate_pairs", c.simulate.planted_duplicate_pairs);
      detail::read(s, "near_constant", c.simulate.near_constant);
      detail::read(s, "noise_scale", c.simulate.noise_scale);
      detail::read(s, "effect_size", c.simulate.effect_size);
    }
    if (j.contains("split")) {
      where = "split";
      detail::check_keys(j.at("split"), where, {"test_fraction"});
      detail::read(j.at("split"), "test_fraction", c.test_fraction);
    }
    if (j.contains("select")) {
      const auto& s = j.at("select");
      where = "select";
      detail::check_keys(s, where,
                         {"dominance_threshold", "correlation_threshold", "entropy_bins", "cv_folds", "evaluator"});
      detail::read(s, "dominance_threshold", c.selection.dominance_threshold);
      detail::read(s, "correlation_threshold", c.selection.correlation_threshold);
      detail::read(s, "entropy_bins", c.selection.entropy_bins);
      detail::read(s, "cv_folds", c.selection.cv_folds);
      if (s.contains("evaluator")) c.selection.evaluator_config = gbdt::config_from_json(s.at("evaluator"));
    }
    if (j.contains("train")) {
      const auto& s = j.at("train");
      where = "train";
      detail::check_keys(s, where, {"cv_folds", "grid", "base"});
      detail::read(s, "cv_folds", c.tuning_folds);
      if (s.contains("grid")) c.grid = tune::grid_from_json(s.at("grid"));
      if (s.contains("base")) c.train_base = gbdt::config_from_json(s.at("base"));
    }
    if (j.contains("evaluate")) {
      where = "evaluate";
      detail::check_keys(j.at("evaluate"), where, {"threshold", "svg"});
      detail::read(j.at("evaluate"), "threshold", c.threshold);
      detail::read(j.at("evaluate"), "svg", c.svg);
    }
    if (j.contains("explain")) {
      where = "explain";
      detail::check_keys(j.at("explain"), where, {"top_k", "dependence_features"});
      detail::read(j.at("explain"), "top_k", c.explain_top_k);
      detail::read(j.at("explain"), "dependence_features", c.dependence_features);
    }
    if (j.contains("errors")) {
      const auto& s = j.at("errors");
      where = "errors";
      detail::check_keys(s, where, {"threshold", "alpha", "waterfall_top_k", "max_fp_cases"});
      if (s.contains("threshold") && !s.at("threshold").is_null()) c.errors_threshold = s.at("threshold").get<double>();
      detail::read(s, "alpha", c.alpha);
      detail::read(s, "waterfall_top_k", c.waterfall_top_k);
      detail::read(s, "max_fp_cases", c.max_fp_cases);
    }
    if (j.contains("baseline")) {
      const auto& s = j.at("baseline");
      where = "baseline";
      detail::check_keys(s, where, {"k_grid", "metric", "weighting", "cv_folds"});
      detail::read(s, "k_grid", c.knn_k_grid);
      if (s.contains("metric")) c.knn.metric = baselines::metric_from_string(s.at("metric").get<std::string>());
      if (s.contains("weighting")) {
        c.knn.weighting = baselines::weighting_from_string(s.at("weighting").get<std::string>());
      }
      detail::read(s, "cv_folds", c.knn_folds);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config section '" + where + "': " + e.what());
  }
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ConfigError("split.test_fraction must lie in (0,1)");
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) throw ConfigError("evaluate.threshold must lie in [0,1]");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("errors.alpha must lie in (0,1)");
  if (c.tuning_folds < 2 || c.selection.cv_folds < 2 || c.knn_folds < 2) throw ConfigError("cv_folds must be >= 2");
  if (c.knn_k_grid.empty()) throw ConfigError("baseline.k_grid is empty");
  for (int k : c.knn_k_grid) {
    if (k < 1 || k % 2 == 0) throw ConfigError("baseline.k_grid entries must be positive odd integers");
  }
  c.simulate.seed = c.seed;
  c.selection.seed = c.selection_seed();
  return c;
}

// Reads a config file; RISKBOOST_SEED, when set, replaces the global seed.
inline PipelineConfig load_config(const std::optional<std::string>& path) {
  nlohmann::json j = nlohmann::json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config '" + *path + "'");
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config '" + *path + "' is not valid JSON: " + e.what());
    }
  }
  if (const char* env = std::getenv("RISKBOOST_SEED"); env && *env) {
    std::uint64_t seed = 0;
    const std::string_view text(env);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ConfigError("RISKBOOST_SEED must be an unsigned integer, got '" + std::string(text) + "'");
    }
    j["seed"] = seed;
  }
  return config_from_json(j);
}

inline ordered_json config_to_json(const PipelineConfig& c) {
  ordered_json duplicates = ordered_json::array();
  for (auto [a, b] : c.simulate.planted_duplicate_pairs) duplicates.push_back({a, b});
  return {{"seed", c.seed},
          {"simulate",
           {{"n_subjects", c.simulate.n_subjects},
            {"n_features", c.simulate.n_features},
            {"prevalence", c.simulate.prevalence},
            {"planted_risk", c.simulate.planted_risk},
            {"planted_protective", c.simulate.planted_protective},
            {"planted_duplicate_pairs", duplicates},
            {"near_constant", c.simulate.near_constant},
            {"noise_scale", c.simulate.noise_scale},
            {"effect_size", c.simulate.effect_size}}},
          {"split", {{"test_fraction", c.test_fraction}}},
          {"select",
           {{"dominance_threshold", c.selection.dominance_threshold},
            {"correlation_threshold", c.selection.correlation_threshold},
            {"entropy_bins", c.selection.entropy_bins},
            {"cv_folds", c.selection.cv_folds},
            {"evaluator", gbdt::config_to_json(c.selection.evaluator_config)}}},
          {"train",
           {{"cv_folds", c.tuning_folds}, {"grid", tune::grid_to_json(c.grid)}, {"base", gbdt::config_to_json(c.train_base)}}},
          {"evaluate", {{"threshold", c.threshold}, {"svg", c.svg}}},
          {"explain", {{"top_k", c.explain_top_k}, {"dependence_features", c.dependence_features}}},
          {"errors",
           {{"threshold", c.error_threshold()},
            {"alpha", c.alpha},
            {"waterfall_top_k", c.waterfall_top_k},
            {"max_fp_cases", c.max_fp_cases}}},
          {"baseline",
           {{"k_grid", c.knn_k_grid},
            {"metric", baselines::to_string(c.knn.metric)},
            {"weighting", baselines::to_string(c.knn.weighting)},
            {"cv_folds", c.knn_folds}}}};
}

inline ordered_json seeds_json(const PipelineConfig& c) {
  return {{"global", c.seed},
          {"simulate", c.simulate.seed},
          {"split", c.seed},
          {"selection_cv", c.selection_seed()},
          {"tuning_cv", c.tuning_seed()},
          {"baseline_cv", c.baseline_seed()}};
}

// ---------------------------------------------------------------------------
// Files and hashes

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects written artifacts and emits a manifest listing their SHA-256.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)), started_(utc_timestamp()) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw InputError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  const fs::path& dir() const { return dir_; }

  fs::path write(const std::string& stage, const std::string& name, std::string_view bytes) {
    const fs::path path = dir_ / name;
    {
      std::ofstream out(path, std::ios::binary);
      if (!out) throw InputError("cannot write '" + path.string() + "'");
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw InputError("write failed for '" + path.string() + "'");
    }
    artifacts_[name] = {stage, sha256_hex(bytes)};
    return path;
  }

  fs::path write_json(const std::string& stage, const std::string& name, const ordered_json& j) {
    return write(stage, name, j.dump(1) + "\n");
  }

  // Registers a file written elsewhere (e.g. a model saved by gbdt).
  void record(const std::string& stage, const fs::path& path) {
    artifacts_[fs::relative(path, dir_).generic_string()] = {stage, sha256_hex(read_file(path))};
  }

  ordered_json hashes() const {
    ordered_json out = ordered_json::object();
    for (const auto& [name, entry] : artifacts_) out[name] = entry.second;
    return out;
  }

  fs::path write_manifest(const std::string& command, const PipelineConfig& config, std::size_t workers,
                          const ordered_json& inputs = ordered_json::object(),
                          const std::string& name = "manifest.json") {
    ordered_json stages = ordered_json::object();
    ordered_json artifacts = ordered_json::object();
    for (const auto& [file, entry] : artifacts_) {
      if (!stages.contains(entry.first)) stages[entry.first] = ordered_json::array();
      stages[entry.first].push_back(file);
      artifacts[file] = {{"sha256", entry.second}};
    }
    ordered_json manifest = {{"tool", "riskboost"},
                             {"version", kVersion},
                             {"command", command},
                             {"inputs", inputs},
                             {"stages", stages},
                             {"artifacts", artifacts},
                             {"config", config_to_json(config)},
                             {"seeds", seeds_json(config)},
                             {"workers", workers},
                             {"started_utc", started_},
                             {"finished_utc", utc_timestamp()}};
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << manifest.dump(1) << "\n";
    return path;
  }

 private:
  fs::path dir_;
  std::string started_;
  std::map<std::string, std::pair<std::string, std::string>> artifacts_;
};

// Re-reads a manifest and checks every listed artifact against its hash.
// Returns the names of files that are missing or differ.
inline std::vector<std::string> verify_manifest(const fs::path& manifest_path) {
  const auto manifest = read_json(manifest_path);
  std::vector<std::string> bad;
  for (const auto& [name, entry] : manifest.at("artifacts").items()) {
    const fs::path file = manifest_path.parent_path() / name;
    if (!fs::exists(file) || sha256_hex(read_file(file)) != entry.at("sha256").get<std::string>()) bad.push_back(name);
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Stages

struct SplitCohorts {
  Cohort train;
  Cohort test;
};

inline SplitCohorts split(const Cohort& cohort, const PipelineConfig& config) {
  auto [train, test] = stratified_split(cohort, config.split_spec());
  return {std::move(train), std::move(test)};
}

struct TrainResult {
  tune::CvResult cv;
  gbdt::BoostedModel model;
};

inline select::SelectionReport run_select(const Cohort& train, const PipelineConfig& config, std::size_t workers) {
  return select::run_selection(train, config.selection, workers);
}

inline TrainResult run_train(const Cohort& train, std::span<const std::size_t> features, const PipelineConfig& config,
                             std::size_t workers) {
  TrainResult r;
  r.cv = tune::grid_search(train, features, config.grid, config.tuning_folds, config.tuning_seed(), workers,
                           config.train_base);
  r.model = gbdt::fit(train, features, r.cv.best_config);
  return r;
}

struct Evaluation {
  metrics::EvalReport report;
  std::vector<double> scores;
};

inline Evaluation run_evaluate(const gbdt::BoostedModel& model, const Cohort& test, double threshold) {
  Evaluation e;
  e.scores = gbdt::predict_proba(model, test);
  e.report = metrics::summarize(e.scores, test.labels(), threshold);
  return e;
}

// Reference figures: the published confusion matrix and the published
// precision/recall, which do not agree with each other.
inline metrics::RateConsistency reference_crosscheck() {
  metrics::ConfusionMatrix reported;
  reported.tn = 1290;
  reported.fp = 2;
  reported.tp = 10;
  reported.fn = 25;
  return metrics::check_rate_consistency(reported, 0.818, 0.257);
}

inline ordered_json evaluation_json(const Evaluation& e, const Cohort& test, const gbdt::BoostedModel& model) {
  ordered_json j = e.report;
  j["n_test"] = test.size();
  j["n_test_positive"] = test.count_label(1);
  j["prevalence"] = static_cast<double>(test.count_label(1)) / static_cast<double>(test.size());
  j["model_config"] = gbdt::config_to_json(model.config);
  j["n_features_used"] = model.feature_subset.size();
  j["reference_crosscheck"] = reference_crosscheck();
  return j;
}

inline void write_evaluation(ArtifactWriter& w, const Evaluation& e, const Cohort& test,
                             const gbdt::BoostedModel& model, bool svg_enabled) {
  w.write_json("evaluate", "evaluation.json", evaluation_json(e, test, model));
  w.write("evaluate", "roc_curve.csv", metrics::curve_csv(e.report.roc_points, "fpr", "tpr"));
  w.write("evaluate", "pr_curve.csv", metrics::curve_csv(e.report.pr_points, "recall", "precision"));
  std::string scores = "subject_id,label,probability\n";
  for (std::size_t i = 0; i < test.size(); ++i) {
    scores += test.subject_ids()[i] + "," + std::to_string(test.label(i)) + "," + nlohmann::json(e.scores[i]).dump() +
              "\n";
  }
  w.write("evaluate", "test_scores.csv", scores);
  if (svg_enabled) {
    w.write("evaluate", "roc_curve.svg",
            svg::curve_plot({{"boosted trees", e.report.roc_points}}, "ROC curve", "false positive rate",
                            "true positive rate", true));
    w.write("evaluate", "pr_curve.svg",
            svg::curve_plot({{"boosted trees", e.report.pr_points}}, "Precision-recall curve", "recall", "precision",
                            false));
  }
}

inline void write_explain(ArtifactWriter& w, const gbdt::BoostedModel& model, const Cohort& test,
                          const PipelineConfig& config, std::size_t workers) {
  const auto attr = explain::explain_cohort(model, test, workers);
  const auto ranking = explain::global_importance(attr);
  w.write("explain", "attributions.csv", explain::attributions_csv(attr));
  w.write("explain", "importance.csv", explain::importance_csv(ranking));

  std::string summary = "subject_id,feature,name,rank,attribution,normalized_value\n";
  for (const auto& r : explain::summary_data(attr, test, config.explain_top_k)) {
    summary += r.sample_id + "," + std::to_string(r.feature) + "," + test.feature_names()[r.feature] + "," +
               std::to_string(r.rank) + "," + nlohmann::json(r.attribution).dump() + "," +
               nlohmann::json(r.normalized_value).dump() + "\n";
  }
  w.write("explain", "summary.csv", summary);

  ordered_json top = ordered_json::array();
  const std::size_t n_top = std::min(config.explain_top_k, ranking.size());
  for (std::size_t r = 0; r < n_top; ++r) {
    const auto& e = ranking[r];
    top.push_back({{"rank", r + 1},
                   {"feature", e.feature},
                   {"name", e.name},
                   {"mean_abs_attribution", e.mean_abs},
                   {"mean_attribution", e.mean},
                   {"direction", explain::attribution_direction(attr, test, e.feature)}});
  }
  const std::size_t n_dep = std::min(config.dependence_features, ranking.size());
  ordered_json dependence = ordered_json::array();
  for (std::size_t r = 0; r < n_dep; ++r) {
    const auto& name = ranking[r].name;
    std::string csv = "value,attribution\n";
    for (const auto& p : explain::dependence_data(attr, test, ranking[r].feature)) {
      csv += nlohmann::json(p.value).dump() + "," + nlohmann::json(p.attribution).dump() + "\n";
    }
    w.write("explain", "dependence_" + name + ".csv", csv);
    dependence.push_back("dependence_" + name + ".csv");
  }
  w.write_json("explain", "explain.json",
               {{"scale", "log-odds margin"},
                {"base_value", attr.base_value},
                {"n_samples", attr.size()},
                {"max_local_accuracy_error", attr.max_local_accuracy_error()},
                {"top_features", top},
                {"dependence_files", dependence}});
  if (config.svg) {
    w.write("explain", "importance.svg",
            svg::importance_bars(ranking, config.explain_top_k, "Mean |attribution| (log-odds)"));
  }
}

// Features flagged in the published FN-vs-TP comparison and their published
// group means; context for readers, not targets.
inline ordered_json reference_observations() {
  return ordered_json::array({
      {{"feature", "Feature80"}, {"mean_fn", 0.1038}, {"mean_tp", 0.0205}},
      {{"feature", "Feature53"}, {"mean_fn", 0.0764}, {"mean_tp", 0.1194}},
      {{"feature", "Feature72"}, {"mean_fn", 0.0637}, {"mean_tp", 0.0118}},
      {{"feature", "Feature32"}, {"mean_fn", 0.2033}, {"mean_tp", 0.0645}},
  });
}

inline void write_errors(ArtifactWriter& w, const gbdt::BoostedModel& model, const Cohort& test,
                         const PipelineConfig& config, std::optional<std::span<const std::size_t>> selected) {
  const double threshold = config.error_threshold();
  const auto scores = gbdt::predict_proba(model, test);
  const auto partition = erroranalysis::partition_outcomes(scores, test.labels(), threshold);
  ordered_json notes = ordered_json::array();
  ordered_json report = {{"threshold", threshold},
                         {"counts",
                          {{"tp", partition.tp.size()},
                           {"fp", partition.fp.size()},
                           {"tn", partition.tn.size()},
                           {"fn", partition.fn.size()}}}};
  try {
    const auto tests = erroranalysis::fn_vs_tp_report(test, partition, config.alpha, selected);
    report["fn_vs_tp"] = erroranalysis::to_json(tests, test.feature_names());
    w.write("errors", "fn_vs_tp_ttests.csv", erroranalysis::to_csv(tests, test.feature_names()));
  } catch (const AnalysisError& e) {
    report["fn_vs_tp"] = nullptr;
    notes.push_back(e.what());
  }
  report["reference_observations"] = reference_observations();

  ordered_json cases = ordered_json::array();
  if (partition.fp.empty()) {
    notes.push_back("no FP cases at threshold " + nlohmann::json(threshold).dump());
  } else {
    std::vector<std::size_t> fp = partition.fp;
    std::stable_sort(fp.begin(), fp.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    fp.resize(std::min(fp.size(), config.max_fp_cases));
    for (std::size_t row : fp) {
      cases.push_back(erroranalysis::to_json(
          erroranalysis::fp_case_study(model, test, partition, test.subject_ids()[row], config.waterfall_top_k)));
    }
  }
  report["fp_cases"] = cases;
  report["notes"] = notes;
  w.write_json("errors", "errors.json", report);
}

struct BaselineResult {
  baselines::KnnCvResult cv;
  baselines::KnnConfig config;
  metrics::EvalReport report;
};

inline BaselineResult run_baseline(const Cohort& train, const Cohort& test, std::span<const std::size_t> features,
                                   const PipelineConfig& config, std::size_t workers) {
  BaselineResult r;
  r.cv = baselines::knn_tune(train, features, config.knn_k_grid, config.knn, config.knn_folds, config.baseline_seed(),
                             workers);
  r.config = config.knn;
  r.config.k = r.cv.best_k;
  r.report = baselines::knn_evaluate(train, test, r.config, features, config.threshold, workers);
  return r;
}

inline void write_baseline(ArtifactWriter& w, const BaselineResult& b, const std::optional<Evaluation>& boosted,
                           const PipelineConfig& config) {
  ordered_json j = {{"model", "knn"},
                    {"k", b.config.k},
                    {"metric", baselines::to_string(b.config.metric)},
                    {"weighting", baselines::to_string(b.config.weighting)},
                    {"k_selection", baselines::to_json(b.cv)},
                    {"report", b.report}};
  if (boosted) {
    j["comparison"] = {{"boosted_trees", boosted->report}, {"knn", b.report}};
  }
  w.write_json("baseline", "baseline.json", j);
  w.write("baseline", "knn_roc_curve.csv", metrics::curve_csv(b.report.roc_points, "fpr", "tpr"));
  if (config.svg && boosted) {
    w.write("baseline", "roc_comparison.svg",
            svg::curve_plot({{"boosted trees", boosted->report.roc_points}, {"KNN", b.report.roc_points}},
                            "ROC comparison", "false positive rate", "true positive rate", true));
  }
}

struct RunSummary {
  fs::path manifest;
  select::SelectionReport selection;
  TrainResult training;
  Evaluation evaluation;
  ordered_json hashes;
};

// simulate -> select -> train -> evaluate -> explain -> errors -> baseline.
// `cohort_override` replaces the simulated cohort when given.
inline RunSummary run_all(const PipelineConfig& config, const fs::path& out_dir, std::size_t workers,
                          const std::optional<Cohort>& cohort_override = std::nullopt) {
  ArtifactWriter w(out_dir);
  const Cohort cohort = cohort_override ? *cohort_override : simulate_cohort(config.simulate);
  w.write("simulate", "cohort.csv", format_cohort(cohort));
  const auto parts = split(cohort, config);

  RunSummary s;
  s.selection = run_select(parts.train, config, workers);
  w.write_json("select", "selection.json", select::to_json(s.selection, cohort.feature_names()));
  w.write("select", "prefix_auc.csv", select::prefix_auc_csv(s.selection));

  s.training = run_train(parts.train, s.selection.selected, config, workers);
  w.write_json("train", "cv_results.json", tune::to_json(s.training.cv));
  w.write("train", "cv_results.csv", tune::to_csv(s.training.cv));
  w.write("train", "model.json", gbdt::dump_model(s.training.model));

  s.evaluation = run_evaluate(s.training.model, parts.test, config.threshold);
  write_evaluation(w, s.evaluation, parts.test, s.training.model, config.svg);
  write_explain(w, s.training.model, parts.test, config, workers);
  write_errors(w, s.training.model, parts.test, config, std::span<const std::size_t>(s.selection.selected));

  const auto baseline = run_baseline(parts.train, parts.test, s.selection.selected, config, workers);
  write_baseline(w, baseline, s.evaluation, config);

  s.hashes = w.hashes();
  s.manifest = w.write_manifest("run-all", config, workers,
                                {{"cohort", cohort_override ? "provided" : "simulated"}});
  return s;
}

}  // namespace riskboost::pipeline
