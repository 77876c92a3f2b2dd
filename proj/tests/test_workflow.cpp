#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dfx/errors.hpp"
#include "dfx/workflow.hpp"
#include "support/synthetic.hpp"

using namespace dfx;
namespace fs = std::filesystem;

namespace {

ExtractionConfig small_diode_config(std::uint64_t seed) {
  ExtractionConfig config;
  config.model.kind = ModelRef::Kind::Diode;
  config.space = dfx_test::diode_table_space();
  config.experiments = {dfx_test::diode_iv_experiment(3e-23, 1.1, 120.0)};
  config.scalarizer.weights = {1.0};
  config.n_trials = 40;
  config.retrain_trials = 10;
  config.seed = seed;
  return config;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Multiset comparison of rows so split exactness is order-independent.
std::multiset<std::pair<double, double>> row_set(const Experiment& e) {
  std::multiset<std::pair<double, double>> rows;
  for (std::size_t i = 0; i < e.size(); ++i) {
    rows.insert({e.stimulus[i][0], e.response[i]});
  }
  return rows;
}

}  // namespace

TEST_CASE("split: 39 points at 0.8 give 31 train / 8 test, an exact partition") {
  const Experiment e = dfx_test::diode_iv_experiment(3e-23, 1.1, 120.0);
  REQUIRE(e.size() == 39);
  const auto split = split_dataset(e, 0.8, 5);
  CHECK(split.train.size() == 31);
  CHECK(split.test.size() == 8);

  auto all = row_set(split.train);
  for (const auto& r : row_set(split.test)) all.insert(r);
  CHECK(all == row_set(e));

  // Disjoint: stimulus values are unique in this sweep.
  std::set<double> train_v, test_v;
  for (const auto& row : split.train.stimulus) train_v.insert(row[0]);
  for (const auto& row : split.test.stimulus) test_v.insert(row[0]);
  for (double v : test_v) CHECK_FALSE(train_v.count(v));
}

TEST_CASE("split: both sides stay non-empty and seeds reproduce") {
  Experiment tiny = dfx_test::diode_iv_experiment(3e-23, 1.1, 120.0);
  tiny.stimulus.resize(2);
  tiny.response.resize(2);
  const auto split = split_dataset(tiny, 0.8, 1);
  CHECK(split.train.size() == 1);
  CHECK(split.test.size() == 1);

  const Experiment e = dfx_test::diode_iv_experiment(3e-23, 1.1, 120.0);
  const auto a = split_dataset(e, 0.8, 99);
  const auto b = split_dataset(e, 0.8, 99);
  CHECK(a.train.response == b.train.response);
  CHECK(a.test.response == b.test.response);
  const auto c = split_dataset(e, 0.8, 100);
  CHECK(a.train.response != c.train.response);

  Experiment one = tiny;
  one.stimulus.resize(1);
  one.response.resize(1);
  CHECK_THROWS_AS(split_dataset(one, 0.8, 1), InvalidInputError);
}

TEST_CASE("corrupt: alters exactly floor(fraction k) responses and nothing else") {
  const Experiment e = dfx_test::diode_iv_experiment(3e-23, 1.1, 120.0);
  CorruptionSpec spec;
  spec.fraction = 0.5;
  spec.sigma = 10.0;
  spec.seed = 3;
  const auto result = corrupt_dataset(e, spec);
  CHECK(result.corrupted_indices.size() == 19);  // floor(19.5)
  CHECK_FALSE(result.nothing_selected);
  REQUIRE(result.experiment.clean_response.has_value());
  CHECK(*result.experiment.clean_response == e.response);
  CHECK(result.experiment.stimulus == e.stimulus);

  std::size_t changed = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (result.experiment.response[i] != e.response[i]) ++changed;
  }
  CHECK(changed == 19);
  for (std::size_t idx : result.corrupted_indices) {
    CHECK(result.experiment.response[idx] != e.response[idx]);
  }

  // Same seed reproduces; different seed differs.
  const auto again = corrupt_dataset(e, spec);
  CHECK(again.experiment.response == result.experiment.response);
  spec.seed = 4;
  CHECK(corrupt_dataset(e, spec).experiment.response != result.experiment.response);
}

TEST_CASE("corrupt: degenerate cases") {
  const Experiment e = dfx_test::diode_iv_experiment(3e-23, 1.1, 120.0);

  CorruptionSpec zero;
  zero.fraction = 0.0;
  const auto untouched = corrupt_dataset(e, zero);
  CHECK(untouched.nothing_selected);
  CHECK(untouched.experiment.response == e.response);
  CHECK_FALSE(untouched.experiment.clean_response.has_value());

  CorruptionSpec silent;
  silent.fraction = 0.5;
  silent.sigma = 0.0;
  silent.mu = 0.0;
  const auto still = corrupt_dataset(e, silent);
  CHECK(still.corrupted_indices.size() == 19);
  CHECK(still.experiment.response == e.response);

  // Nonpositive responses are never selected.
  Experiment mixed = e;
  for (std::size_t i = 0; i < 30; ++i) mixed.response[i] = 0.0;
  CorruptionSpec heavy;
  heavy.fraction = 0.9;  // needs 35 > 9 positives
  CHECK_THROWS_AS(corrupt_dataset(mixed, heavy), InvalidInputError);
  CorruptionSpec light;
  light.fraction = 0.2;  // 7 of the 9 positives
  light.seed = 8;
  const auto partial = corrupt_dataset(mixed, light);
  for (std::size_t idx : partial.corrupted_indices) CHECK(idx >= 30);
}

TEST_CASE("objective_of: identity scalarizer and perfect fits") {
  ExtractionConfig config = small_diode_config(1);
  const std::vector<double> truth{3e-23, 1.1, 120.0};
  // Perfect model reproduces the data exactly.
  CHECK(objective_of(config, truth, config.experiments) == 0.0);

  // Single experiment with unit weight equals the experiment objective.
  const std::vector<double> off{1e-23, 1.0, 110.0};
  const auto names = config.space.names();
  const auto yhat = evaluate_model(config.model, ParamView(names, off),
                                   config.experiments[0]);
  const double direct = experiment_objective(config.experiments[0].loss, yhat,
                                             config.experiments[0].response);
  CHECK(objective_of(config, off, config.experiments) ==
        doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("objective_of: two experiments with half weights average") {
  ExtractionConfig config;
  config.model.kind = ModelRef::Kind::Fet;
  config.space = dfx_test::fet_space();
  config.experiments = dfx_test::fet_experiments({.VTH = -2.0, .K = 0.1, .LAM = 0.01});
  config.scalarizer.weights = {0.5, 0.5};
  config.seed = 1;

  const std::vector<double> off{-1.8, 0.2, 0.02};
  const auto names = config.space.names();
  std::vector<double> parts;
  for (const auto& e : config.experiments) {
    const auto yhat = evaluate_model(config.model, ParamView(names, off), e);
    parts.push_back(experiment_objective(e.loss, yhat, e.response));
  }
  CHECK(objective_of(config, off, config.experiments) ==
        doctest::Approx(0.5 * (parts[0] + parts[1])).epsilon(1e-15));
}

TEST_CASE("extract: retrain warm-starts from the train best inside a tightened space") {
  const ExtractionConfig config = small_diode_config(7);
  const ExtractionResult result = extract(config);

  REQUIRE(result.has_best);
  REQUIRE(result.retrain_study.has_value());
  const Trial* train_best = result.train_study.best();
  REQUIRE(train_best != nullptr);
  CHECK(result.retrain_study->trials[0].params == train_best->params);
  CHECK(result.retrain_study->space.contains(train_best->params));
  for (std::size_t d = 0; d < config.space.size(); ++d) {
    CHECK(result.retrain_study->space.param(d).low >= config.space.param(d).low);
    CHECK(result.retrain_study->space.param(d).high <= config.space.param(d).high);
  }

  // Warm start means the retrain curve can only improve on the train best
  // evaluated over the full data.
  REQUIRE(!result.retrain_curve.empty());
  const double first = *result.retrain_curve.front();
  const double last = *result.retrain_curve.back();
  CHECK(last <= first);

  CHECK(result.train_curve.size() == config.n_trials);
  CHECK(result.test_curve.size() == config.n_trials);
  CHECK(result.retrain_curve.size() == config.retrain_trials);
  for (const auto* curve :
       {&result.train_curve, &result.test_curve, &result.retrain_curve}) {
    for (std::size_t i = 1; i < curve->size(); ++i) {
      if ((*curve)[i - 1]) {
        REQUIRE((*curve)[i].has_value());
        CHECK(*(*curve)[i] <= *(*curve)[i - 1]);
      }
    }
  }

  REQUIRE(result.report.size() == 1);
  CHECK(result.report[0].value.has_value());
}

TEST_CASE("extract: retrain_trials=0 keeps the train best") {
  ExtractionConfig config = small_diode_config(3);
  config.retrain_trials = 0;
  const ExtractionResult result = extract(config);
  REQUIRE(result.has_best);
  CHECK_FALSE(result.retrain_study.has_value());
  CHECK(result.retrain_curve.empty());
  CHECK(result.best_params == result.train_study.best()->params);
}

TEST_CASE("extract: identical config and seed reproduce bit-for-bit") {
  const ExtractionConfig config = small_diode_config(21);
  const ExtractionResult a = extract(config);
  const ExtractionResult b = extract(config);
  CHECK(a.best_params == b.best_params);
  CHECK(a.config_hash == b.config_hash);
  REQUIRE(a.train_study.trials.size() == b.train_study.trials.size());
  for (std::size_t i = 0; i < a.train_study.trials.size(); ++i) {
    CHECK(a.train_study.trials[i].params == b.train_study.trials[i].params);
    CHECK(a.train_study.trials[i].objective == b.train_study.trials[i].objective);
  }

  const fs::path dir_a = fs::temp_directory_path() / "dfx_wf_a";
  const fs::path dir_b = fs::temp_directory_path() / "dfx_wf_b";
  write_result_dir(dir_a, config, a);
  write_result_dir(dir_b, config, b);
  for (const auto& entry : fs::directory_iterator(dir_a)) {
    const auto name = entry.path().filename();
    CHECK(slurp(entry.path()) == slurp(dir_b / name));
  }
  // The layout is complete.
  for (const char* file : {"trials_train.csv", "trials_retrain.csv", "curves.csv",
                           "best_params.csv", "report.csv", "fit_iv.csv"}) {
    CHECK(fs::exists(dir_a / file));
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  ExtractionConfig other = config;
  other.seed = 22;
  const ExtractionResult c = extract(other);
  CHECK(a.config_hash != c.config_hash);
}

TEST_CASE("extract: a model that always fails yields a no-best result") {
  ExtractionConfig config = small_diode_config(2);
  config.model.kind = ModelRef::Kind::External;
  config.model.command = "/nonexistent/simulator";
  config.model.timeout_seconds = 5.0;
  config.n_trials = 4;
  config.retrain_trials = 2;
  const ExtractionResult result = extract(config);
  CHECK_FALSE(result.has_best);
  CHECK(result.best_params.empty());
  CHECK(result.report.empty());
  CHECK_FALSE(result.retrain_study.has_value());
  for (const auto& v : result.train_curve) CHECK_FALSE(v.has_value());

  const fs::path dir = fs::temp_directory_path() / "dfx_wf_nobest";
  write_result_dir(dir, config, result);
  CHECK(fs::exists(dir / "best_params.csv"));
  CHECK_FALSE(fs::exists(dir / "fit_iv.csv"));
  fs::remove_all(dir);
}

TEST_CASE("extract_seeds: one result per seed plus a median summary") {
  ExtractionConfig config = small_diode_config(0);
  config.n_trials = 25;
  config.retrain_trials = 5;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const SeedSweepResult sweep = extract_seeds(config, seeds);
  REQUIRE(sweep.results.size() == 3);
  CHECK(sweep.seeds == seeds);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sweep.results[i].seed == seeds[i]);
    CHECK(sweep.results[i].has_best);
  }
  REQUIRE(sweep.median_report.size() == 1);
  REQUIRE(sweep.median_report[0].value.has_value());
  std::vector<double> errors;
  for (const auto& r : sweep.results) errors.push_back(*r.report[0].value);
  std::sort(errors.begin(), errors.end());
  CHECK(*sweep.median_report[0].value == errors[1]);

  CHECK_THROWS_AS(extract_seeds(config, std::vector<std::uint64_t>{}),
                  InvalidInputError);
}

TEST_CASE("evaluate_fit: ground truth scores zero; clean reference is gated") {
  ExtractionConfig config = small_diode_config(1);
  const auto names = config.space.names();
  const std::vector<double> truth{3e-23, 1.1, 120.0};

  const auto stored = evaluate_fit(config.model, names, truth, config.experiments,
                                   FitReference::Stored);
  REQUIRE(stored.size() == 1);
  CHECK(*stored[0].value == 0.0);

  CHECK_THROWS_AS(evaluate_fit(config.model, names, truth, config.experiments,
                               FitReference::CleanOriginal),
                  ConfigError);

  CorruptionSpec spec;
  spec.fraction = 0.5;
  spec.seed = 11;
  std::vector<Experiment> corrupted{corrupt_dataset(config.experiments[0], spec).experiment};
  const auto clean = evaluate_fit(config.model, names, truth, corrupted,
                                  FitReference::CleanOriginal);
  CHECK(*clean[0].value == 0.0);  // truth still matches the clean responses
  const auto vs_corrupted = evaluate_fit(config.model, names, truth, corrupted,
                                         FitReference::Stored);
  CHECK(*vs_corrupted[0].value > 0.0);

  // A threshold above every response yields the explicit no-points outcome.
  std::vector<Experiment> high = config.experiments;
  high[0].report_threshold = 1.0;
  const auto none = evaluate_fit(config.model, names, truth, high, FitReference::Stored);
  CHECK_FALSE(none[0].value.has_value());
  CHECK(none[0].points_used == 0);
}
