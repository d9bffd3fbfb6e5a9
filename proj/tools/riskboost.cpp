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

// riskboost command-line driver.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "riskboost/pipeline.hpp"

namespace rb = riskboost;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Common {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;
  bool workers_set = false;
};

struct Args {
  std::string out;
  std::string cohort;
  std::string model;
  std::string selection;
  std::string grid;
  std::optional<double> threshold;
  std::optional<std::size_t> top_k;
  bool no_svg = false;
};

rb::pipeline::PipelineConfig resolve(const Common& common) {
  auto config = rb::pipeline::load_config(common.config);
  if (common.seed) {
    nlohmann::json j = common.config ? rb::pipeline::read_json(*common.config) : nlohmann::json::object();
    j["seed"] = *common.seed;
    config = rb::pipeline::config_from_json(j);
  }
  return config;
}

std::size_t workers_of(const Common& common, const rb::pipeline::PipelineConfig& config) {
  const std::size_t w = common.workers_set ? common.workers : config.workers;
  return w == 0 ? rb::default_workers() : w;
}

rb::gbdt::BoostedModel load_model_for(const std::string& path, const rb::Cohort& cohort) {
  auto model = rb::gbdt::load_model(path);
  if (model.feature_names != cohort.feature_names()) {
    throw rb::InputError("model '" + path + "' was trained on different feature columns than the cohort");
  }
  return model;
}

ordered_json file_input(const std::string& path) {
  return {{"path", path}, {"sha256", rb::pipeline::sha256_hex(rb::pipeline::read_file(path))}};
}

std::vector<std::size_t> load_selection(const std::string& path) {
  return rb::select::selection_from_json(rb::pipeline::read_json(path)).selected;
}

int cmd_simulate(const Common& common, const Args& a) {
  const auto config = resolve(common);
  const auto cohort = rb::simulate_cohort(config.simulate);
  const fs::path out(a.out);
  rb::pipeline::ArtifactWriter w(out.has_parent_path() ? out.parent_path() : fs::path("."));
  w.write("simulate", out.filename().string(), rb::format_cohort(cohort));
  w.write_manifest("simulate", config, 1, ordered_json::object(), out.stem().string() + ".manifest.json");
  std::cout << "wrote " << cohort.size() << " subjects x " << cohort.n_features() << " features ("
            << cohort.count_label(1) << " positive) to " << out.string() << "\n";
  return 0;
}

int cmd_select(const Common& common, const Args& a) {
  const auto config = resolve(common);
  const std::size_t workers = workers_of(common, config);
  const auto cohort = rb::load_cohort(a.cohort);
  const auto parts = rb::pipeline::split(cohort, config);
  const auto report = rb::pipeline::run_select(parts.train, config, workers);
  rb::pipeline::ArtifactWriter w(a.out);
  w.write_json("select", "selection.json", rb::select::to_json(report, cohort.feature_names()));
  w.write("select", "prefix_auc.csv", rb::select::prefix_auc_csv(report));
  w.write_manifest("select", config, workers, {{"cohort", file_input(a.cohort)}}, "manifest_select.json");
  std::cout << "selected " << report.selected.size() << " of " << cohort.n_features() << " features, CV AUC "
            << report.best_auc << "\n";
  return 0;
}

int cmd_train(const Common& common, const Args& a) {
  auto config = resolve(common);
  if (!a.grid.empty()) config.grid = rb::tune::grid_from_json(rb::pipeline::read_json(a.grid));
  const std::size_t workers = workers_of(common, config);
  const auto cohort = rb::load_cohort(a.cohort);
  const auto selected = load_selection(a.selection);
  const auto parts = rb::pipeline::split(cohort, config);
  const auto result = rb::pipeline::run_train(parts.train, selected, config, workers);
  rb::pipeline::ArtifactWriter w(a.out);
  w.write_json("train", "cv_results.json", rb::tune::to_json(result.cv));
  w.write("train", "cv_results.csv", rb::tune::to_csv(result.cv));
  w.write("train", "model.json", rb::gbdt::dump_model(result.model));
  w.write_manifest("train", config, workers,
                   {{"cohort", file_input(a.cohort)}, {"selection", file_input(a.selection)}}, "manifest_train.json");
  std::cout << "best config " << rb::tune::describe(result.cv.best_config) << " (CV AP "
            << result.cv.entries[result.cv.best_index].mean << ")\n";
  return 0;
}

int cmd_evaluate(const Common& common, const Args& a) {
  auto config = resolve(common);
  if (a.threshold) config.threshold = *a.threshold;
  if (a.no_svg) config.svg = false;
  const auto cohort = rb::load_cohort(a.cohort);
  const auto model = load_model_for(a.model, cohort);
  const auto parts = rb::pipeline::split(cohort, config);
  const auto e = rb::pipeline::run_evaluate(model, parts.test, config.threshold);
  rb::pipeline::ArtifactWriter w(a.out);
  rb::pipeline::write_evaluation(w, e, parts.test, model, config.svg);
  w.write_manifest("evaluate", config, 1, {{"cohort", file_input(a.cohort)}, {"model", file_input(a.model)}},
                   "manifest_evaluate.json");
  std::cout << "AUC " << e.report.auc_roc << ", AP " << e.report.auc_pr << ", F1 " << e.report.f1 << "\n";
  return 0;
}

int cmd_explain(const Common& common, const Args& a) {
  auto config = resolve(common);
  if (a.top_k) config.explain_top_k = *a.top_k;
  if (a.no_svg) config.svg = false;
  const std::size_t workers = workers_of(common, config);
  const auto cohort = rb::load_cohort(a.cohort);
  const auto model = load_model_for(a.model, cohort);
  const auto parts = rb::pipeline::split(cohort, config);
  rb::pipeline::ArtifactWriter w(a.out);
  rb::pipeline::write_explain(w, model, parts.test, config, workers);
  w.write_manifest("explain", config, workers, {{"cohort", file_input(a.cohort)}, {"model", file_input(a.model)}},
                   "manifest_explain.json");
  std::cout << "explained " << parts.test.size() << " test subjects\n";
  return 0;
}

int cmd_errors(const Common& common, const Args& a) {
  auto config = resolve(common);
  if (a.threshold) config.errors_threshold = *a.threshold;
  const auto cohort = rb::load_cohort(a.cohort);
  const auto model = load_model_for(a.model, cohort);
  const auto parts = rb::pipeline::split(cohort, config);
  std::optional<std::vector<std::size_t>> selected;
  ordered_json inputs = {{"cohort", file_input(a.cohort)}, {"model", file_input(a.model)}};
  if (!a.selection.empty()) {
    selected = load_selection(a.selection);
    inputs["selection"] = file_input(a.selection);
  }
  rb::pipeline::ArtifactWriter w(a.out);
  rb::pipeline::write_errors(w, model, parts.test, config,
                             selected ? std::optional<std::span<const std::size_t>>(*selected) : std::nullopt);
  w.write_manifest("errors", config, 1, inputs, "manifest_errors.json");
  std::cout << "wrote error analysis to " << a.out << "\n";
  return 0;
}

int cmd_baseline(const Common& common, const Args& a) {
  auto config = resolve(common);
  const std::size_t workers = workers_of(common, config);
  const auto cohort = rb::load_cohort(a.cohort);
  const auto selected = load_selection(a.selection);
  const auto parts = rb::pipeline::split(cohort, config);
  ordered_json inputs = {{"cohort", file_input(a.cohort)}, {"selection", file_input(a.selection)}};
  std::optional<rb::pipeline::Evaluation> boosted;
  if (!a.model.empty()) {
    boosted = rb::pipeline::run_evaluate(load_model_for(a.model, cohort), parts.test, config.threshold);
    inputs["model"] = file_input(a.model);
  }
  const auto result = rb::pipeline::run_baseline(parts.train, parts.test, selected, config, workers);
  rb::pipeline::ArtifactWriter w(a.out);
  rb::pipeline::write_baseline(w, result, boosted, config);
  w.write_manifest("baseline", config, workers, inputs, "manifest_baseline.json");
  std::cout << "KNN k=" << result.config.k << ": AUC " << result.report.auc_roc << ", AP " << result.report.auc_pr
            << "\n";
  return 0;
}

int cmd_run_all(const Common& common, const Args& a) {
  auto config = resolve(common);
  if (a.no_svg) config.svg = false;
  const std::size_t workers = workers_of(common, config);
  std::optional<rb::Cohort> cohort;
  if (!a.cohort.empty()) cohort = rb::load_cohort(a.cohort);
  const auto s = rb::pipeline::run_all(config, a.out, workers, cohort);
  std::cout << "selected " << s.selection.selected.size() << " features; test AUC " << s.evaluation.report.auc_roc
            << ", AP " << s.evaluation.report.auc_pr << "; manifest " << s.manifest.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"riskboost: boosted-tree risk modelling pipeline with attribution and error analysis"};
  app.require_subcommand(1);
  Common common;
  Args args;
  std::uint64_t seed = 0;
  std::string config_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "pipeline config JSON")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "global seed (overrides config and RISKBOOST_SEED)");
    sub->add_option("-j,--workers", common.workers, "worker threads (0 = available parallelism)");
  };
  auto need = [](CLI::App* sub, const char* name, std::string& target, const char* help) {
    sub->add_option(name, target, help)->required();
  };

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic cohort CSV");
  add_common(simulate);
  need(simulate, "-o,--out", args.out, "output CSV path");

  auto* select = app.add_subcommand("select", "variance filter, correlation pruning and forward selection");
  add_common(select);
  need(select, "--cohort", args.cohort, "cohort CSV");
  need(select, "-o,--out", args.out, "output directory");

  auto* train = app.add_subcommand("train", "grid search and final model fit");
  add_common(train);
  need(train, "--cohort", args.cohort, "cohort CSV");
  need(train, "--selection", args.selection, "selection.json");
  train->add_option("--grid", args.grid, "grid JSON overriding the config grid")->check(CLI::ExistingFile);
  need(train, "-o,--out", args.out, "output directory");

  auto* evaluate = app.add_subcommand("evaluate", "held-out metrics and curves");
  add_common(evaluate);
  need(evaluate, "--model", args.model, "model JSON");
  need(evaluate, "--cohort", args.cohort, "cohort CSV");
  evaluate->add_option("--threshold", args.threshold, "classification threshold");
  evaluate->add_flag("--no-svg", args.no_svg, "skip SVG figures");
  need(evaluate, "-o,--out", args.out, "output directory");

  auto* explain = app.add_subcommand("explain", "TreeSHAP attributions and figure data");
  add_common(explain);
  need(explain, "--model", args.model, "model JSON");
  need(explain, "--cohort", args.cohort, "cohort CSV");
  explain->add_option("--top-k", args.top_k, "features in summary and importance outputs");
  explain->add_flag("--no-svg", args.no_svg, "skip SVG figures");
  need(explain, "-o,--out", args.out, "output directory");

  auto* errors = app.add_subcommand("errors", "FN-vs-TP t-tests and FP waterfalls");
  add_common(errors);
  need(errors, "--model", args.model, "model JSON");
  need(errors, "--cohort", args.cohort, "cohort CSV");
  errors->add_option("--threshold", args.threshold, "classification threshold");
  errors->add_option("--selection", args.selection, "selection.json, to mark selected features");
  need(errors, "-o,--out", args.out, "output directory");

  auto* baseline = app.add_subcommand("baseline", "KNN comparator");
  add_common(baseline);
  need(baseline, "--cohort", args.cohort, "cohort CSV");
  need(baseline, "--selection", args.selection, "selection.json");
  baseline->add_option("--model", args.model, "boosted model JSON for a side-by-side comparison");
  need(baseline, "-o,--out", args.out, "output directory");

  auto* run_all = app.add_subcommand("run-all", "every stage from one config");
  add_common(run_all);
  run_all->add_option("--cohort", args.cohort, "use this cohort CSV instead of simulating");
  run_all->add_flag("--no-svg", args.no_svg, "skip SVG figures");
  need(run_all, "-o,--out", args.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto* sub = app.get_subcommands().front();
    if (!config_path.empty()) common.config = config_path;
    if (sub->count("--seed")) common.seed = seed;
    common.workers_set = sub->count("--workers") > 0;
    const std::string name = sub->get_name();
    if (name == "simulate") return cmd_simulate(common, args);
    if (name == "select") return cmd_select(common, args);
    if (name == "train") return cmd_train(common, args);
    if (name == "evaluate") return cmd_evaluate(common, args);
    if (name == "explain") return cmd_explain(common, args);
    if (name == "errors") return cmd_errors(common, args);
    if (name == "baseline") return cmd_baseline(common, args);
    return cmd_run_all(common, args);
  } catch (const rb::ContractError& e) {
    std::cerr << "riskboost: " << e.what() << "\n";
    return 3;
  } catch (const rb::Error& e) {
    std::cerr << "riskboost: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "riskboost: internal error: " << e.what() << "\n";
    return 3;
  }
}
