#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfx/rng.hpp"
#include "dfx/space.hpp"

namespace dfx {

enum class TrialStatus { Ok, Failed };

/// One evaluated parameter vector. Failed evaluations keep their suggested
/// parameters but carry no objective value.
struct Trial {
  std::size_t index = 0;
  std::vector<double> params;  // natural units, search-space order
  double objective = 0.0;      // meaningful only when status == Ok
  TrialStatus status = TrialStatus::Failed;

  bool ok() const { return status == TrialStatus::Ok; }
};

struct SamplerConfig {
  /// Random trials before the estimator kicks in.
  std::size_t n_startup = 10;
  /// Fraction of completed trials treated as "good".
  double gamma = 0.25;
  /// Candidates drawn from the good-density per suggestion.
  std::size_t n_candidates = 24;
  /// Minimal kernel width in unit coordinates.
  double bandwidth_floor = 1e-3;

  void validate() const;
};

/// An optimization run: the ordered trial history plus everything needed to
/// reproduce it.
struct Study {
  std::vector<Trial> trials;
  SearchSpace space;
  std::uint64_t seed = 0;
  SamplerConfig config;

  /// Index of the completed trial with the lowest objective; ties go to the
  /// earlier trial. Empty when every trial failed.
  std::optional<std::size_t> best_index() const;
  const Trial* best() const;
};

/// Uniform draw in unit coordinates mapped into natural units, so log-scaled
/// parameters come out log-uniform.
std::vector<double> random_suggest(const SearchSpace& space, Rng& rng);

struct TrialPartition {
  std::vector<const Trial*> good;
  std::vector<const Trial*> bad;
};

/// Splits completed trials into the ceil(gamma*n) lowest objectives ("good")
/// and the rest. Ties at the cut go to the earlier trial index.
TrialPartition partition_trials(std::span<const Trial> trials, double gamma);

/// Per-point kernel widths: each kernel is as wide as the larger gap to its
/// sorted neighbors, with the domain edges acting as outermost neighbors.
/// Widths are clipped below by max(floor, 1/min(100, N+1)) and above by the
/// full unit span. Isolated points keep wide kernels, so a pile of
/// near-duplicates cannot collapse the estimator.
std::vector<double> neighbor_bandwidths(std::span<const double> points, double floor);

/// Mixture of truncated-Gaussian kernels on [0, 1] plus one uniform prior
/// component, all weighted 1/(N+1). Each kernel is renormalized so it
/// integrates to 1 on [0, 1].
class ParzenEstimator {
 public:
  ParzenEstimator(std::vector<double> points, std::vector<double> bandwidths);

  double pdf(double x) const;
  double log_pdf(double x) const;
  /// Draws from the mixture via inverse-CDF sampling of a truncated kernel
  /// (or the uniform prior). Output always lies in [0, 1].
  double sample(Rng& rng) const;

  std::size_t kernel_count() const { return points_.size(); }

 private:
  std::vector<double> points_;
  std::vector<double> inv_two_sq_;  // 1 / (2 sigma^2) per kernel
  std::vector<double> norm_;        // 1 / (sqrt(2 pi) sigma Z) per kernel
  std::vector<double> cdf_lo_;      // Phi((0 - mu) / sigma) per kernel
  std::vector<double> cdf_span_;    // Phi((1 - mu) / sigma) - cdf_lo_
  std::vector<double> bandwidths_;
};

/// Density value of the Parzen mixture at x; the free-function form of
/// ParzenEstimator::pdf.
double parzen_density(std::span<const double> points,
                      std::span<const double> bandwidths, double x);

/// Tree-structured Parzen Estimator sampler. Per dimension, models the good
/// trials' density l(x) and the bad trials' density g(x), draws candidates
/// from l, and proposes the candidate maximizing the product of l/g over
/// dimensions. Before n_startup completed trials it falls back to uniform
/// random suggestions from the same stream.
class TpeSampler {
 public:
  TpeSampler(SearchSpace space, SamplerConfig config, std::uint64_t seed);

  std::vector<double> suggest(std::span<const Trial> history);

  const SearchSpace& space() const { return space_; }

 private:
  SearchSpace space_;
  SamplerConfig config_;
  Rng rng_;
};

/// Objective evaluated by the study loop. `trial_index` identifies the slot
/// the result lands in, which lets callers keep per-trial side records.
/// Failures are signalled by throwing EvaluationFailed; a non-finite return
/// value is also recorded as a failed trial.
using ObjectiveFn = std::function<double(std::size_t trial_index, std::span<const double> params)>;

struct StudyOptions {
  /// Trials evaluated concurrently per batch. 1 (default) is strictly
  /// sequential and exactly reproducible; with more jobs the suggestion
  /// stream sees results in batch order, so trial histories may differ
  /// from a sequential run.
  std::size_t jobs = 1;
};

/// Runs `n_trials` evaluations: first the warm-start vectors in order, then
/// sampler suggestions. Failed evaluations are recorded and skipped by the
/// estimator. Fully deterministic for a fixed (seed, config, space,
/// objective) with jobs == 1.
Study run_study(const ObjectiveFn& objective, const SearchSpace& space,
                std::size_t n_trials, std::uint64_t seed, const SamplerConfig& config,
                std::span<const std::vector<double>> warm_start = {},
                const StudyOptions& options = {});

/// Best-so-far (prefix minimum) curve. Entries before the first completed
/// trial are empty; failed trials inherit the previous value.
std::vector<std::optional<double>> best_so_far(const Study& study);

/// Writes the trial log: header `trial,status,objective,<param names...>`,
/// doubles in full round-trip precision.
void write_trials_csv(const Study& study, const std::filesystem::path& path);

}  // namespace dfx
