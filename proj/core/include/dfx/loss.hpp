#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dfx {

/// The loss family used for curve fitting. All log-domain variants work in
/// base 10, so residuals are measured in decades.
enum class LossKind {
  Abs,            ///< |yhat - y|
  LogAbs,         ///< |log10 yhat - log10 y|, both inputs > 0
  ClippedRobust,  ///< u^2 clipped at delta^2, u from threshold_residual
  SquaredLog,     ///< u^2, unclipped
};

struct LossSpec {
  LossKind kind = LossKind::ClippedRobust;
  /// Response-units level below which points stop contributing.
  /// Required for ClippedRobust and SquaredLog.
  std::optional<double> epsilon;
  /// Dimensionless clip on the transformed residual. Required for
  /// ClippedRobust; caps any single point's loss at delta^2.
  std::optional<double> delta;

  /// Throws ConfigError if a required hyperparameter is missing or
  /// nonpositive.
  void validate() const;
};

/// Weighted-sum scalarizer combining per-experiment objectives.
struct ScalarizerSpec {
  std::vector<double> weights;

  /// Throws ConfigError unless all weights are >= 0 and at least one is > 0.
  void validate() const;
};

/// Thresholded log-relative residual
///   u = |log10(1 + yhat/epsilon) - log10(1 + y/epsilon)|.
/// Negative inputs are floored to 0, which keeps both log arguments >= 1;
/// values far below epsilon therefore contribute next to nothing.
double threshold_residual(double yhat, double y, double epsilon);

/// Loss of a single (predicted, measured) pair under `spec`.
double point_loss(const LossSpec& spec, double yhat, double y);

/// Mean point loss over one experiment's k points.
double experiment_objective(const LossSpec& spec, std::span<const double> yhats,
                            std::span<const double> ys);

/// w^T v over per-experiment objectives.
double scalarize(const ScalarizerSpec& spec, std::span<const double> objectives);

/// Outcome of report_error. `value` is empty when no measured point exceeds
/// the threshold; that case must stay distinguishable from a zero error.
struct ReportError {
  std::size_t points_used = 0;
  std::optional<double> value;
};

/// Mean point loss restricted to points with y > threshold.
ReportError report_error(const LossSpec& spec, std::span<const double> yhats,
                         std::span<const double> ys, double threshold);

}  // namespace dfx
