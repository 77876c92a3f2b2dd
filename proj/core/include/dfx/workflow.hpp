#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dfx/loss.hpp"
#include "dfx/models.hpp"
#include "dfx/sampler.hpp"
#include "dfx/space.hpp"

namespace dfx {

/// Everything one extraction run needs: the model, the search space, the
/// datasets with their loss settings, and the optimization budget.
struct ExtractionConfig {
  ModelRef model;
  SearchSpace space;
  std::vector<Experiment> experiments;
  ScalarizerSpec scalarizer;
  SamplerConfig sampler;
  std::size_t n_trials = 250;
  std::size_t retrain_trials = 50;
  double tighten_factor = 0.4;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const;
  /// Stable 64-bit hash over the fully resolved configuration, recorded as
  /// provenance in results.
  std::uint64_t fingerprint() const;
};

/// Log-domain Gaussian outlier injection: a selected response y becomes
/// 10^(log10(y) + z) with z ~ Normal(mu, sigma).
struct CorruptionSpec {
  double fraction = 0.0;
  double mu = 0.0;
  double sigma = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitResult {
  Experiment train;
  Experiment test;
};

/// Seeded uniform row partition; floor(train_fraction * k) rows go to train,
/// clamped so both sides stay non-empty. Row order is preserved within each
/// side.
SplitResult split_dataset(const Experiment& experiment, double train_fraction,
                          std::uint64_t seed);

struct CorruptionResult {
  /// Corrupted copy; clean_response holds the original values.
  Experiment experiment;
  std::vector<std::size_t> corrupted_indices;
  /// Set when fraction * k floored to zero and nothing was altered.
  bool nothing_selected = false;
};

/// Corrupts floor(fraction * k) distinct responses chosen uniformly among
/// the positive ones. Stimulus rows are never touched.
CorruptionResult corrupt_dataset(const Experiment& experiment, const CorruptionSpec& spec);

/// Scalarized objective of one parameter vector over `experiments`:
/// per-experiment mean loss combined by the config's scalarizer weights.
/// Throws EvaluationFailed when any model evaluation fails.
double objective_of(const ExtractionConfig& config, std::span<const double> params,
                    std::span<const Experiment> experiments);

struct ExtractionResult {
  bool has_best = false;
  std::vector<double> best_params;  // search-space order
  std::vector<std::optional<double>> train_curve;
  std::vector<std::optional<double>> test_curve;
  std::vector<std::optional<double>> retrain_curve;
  std::vector<ReportError> report;  // per experiment, stored-data reference
  Study train_study;
  std::optional<Study> retrain_study;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

/// The full pipeline: split each experiment, optimize on the training rows
/// while recording each trial's held-out error, tighten the ranges around
/// the train-best vector, then retrain on all rows warm-started from it.
ExtractionResult extract(const ExtractionConfig& config);

/// Independent extractions over a list of seeds, plus the per-experiment
/// median of their report errors. One result per seed, in seed order.
struct SeedSweepResult {
  std::vector<std::uint64_t> seeds;
  std::vector<ExtractionResult> results;
  std::vector<ReportError> median_report;
};

SeedSweepResult extract_seeds(const ExtractionConfig& config,
                              std::span<const std::uint64_t> seeds);

enum class FitReference {
  Stored,         ///< responses as loaded (possibly corrupted)
  CleanOriginal,  ///< originals retained by the corruption harness
};

/// Per-experiment thresholded report errors of a parameter vector against
/// the chosen ground truth.
std::vector<ReportError> evaluate_fit(const ModelRef& model,
                                      std::span<const std::string> names,
                                      std::span<const double> values,
                                      std::span<const Experiment> experiments,
                                      FitReference against);

/// Writes the result directory (trials_train.csv, trials_retrain.csv,
/// curves.csv, best_params.csv, report.csv, fit_<experiment>.csv). Contents
/// land in a temp directory first and move into place on success, so no
/// partial directory is ever observable.
void write_result_dir(const std::filesystem::path& out, const ExtractionConfig& config,
                      const ExtractionResult& result);

}  // namespace dfx
