#include "dfx/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dfx/errors.hpp"

namespace dfx {

namespace {

bool uses_epsilon(LossKind kind) {
  return kind == LossKind::ClippedRobust || kind == LossKind::SquaredLog;
}

bool uses_delta(LossKind kind) { return kind == LossKind::ClippedRobust; }

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw InvalidInputError(std::string(what) + " is not finite");
  }
}

}  // namespace

void LossSpec::validate() const {
  if (uses_epsilon(kind)) {
    if (!epsilon) throw ConfigError("loss: epsilon is required for this loss kind");
    if (!(*epsilon > 0.0)) throw ConfigError("loss: epsilon must be > 0");
  }
  if (uses_delta(kind)) {
    if (!delta) throw ConfigError("loss: delta is required for the clipped robust loss");
    if (!(*delta > 0.0)) throw ConfigError("loss: delta must be > 0");
  }
}

void ScalarizerSpec::validate() const {
  bool any_positive = false;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("scalarizer: weights must be nonnegative");
    any_positive = any_positive || w > 0.0;
  }
  if (weights.empty() || !any_positive) {
    throw ConfigError("scalarizer: at least one weight must be positive");
  }
}

double threshold_residual(double yhat, double y, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("threshold_residual: epsilon must be > 0");
  require_finite(yhat, "yhat");
  require_finite(y, "y");
  const double a = std::max(yhat, 0.0);
  const double b = std::max(y, 0.0);
  return std::abs(std::log10(1.0 + a / epsilon) - std::log10(1.0 + b / epsilon));
}

double point_loss(const LossSpec& spec, double yhat, double y) {
  spec.validate();
  require_finite(yhat, "yhat");
  require_finite(y, "y");
  switch (spec.kind) {
    case LossKind::Abs:
      return std::abs(yhat - y);
    case LossKind::LogAbs:
      if (!(yhat > 0.0) || !(y > 0.0)) {
        throw InvalidInputError("log loss requires positive responses");
      }
      return std::abs(std::log10(yhat) - std::log10(y));
    case LossKind::ClippedRobust: {
      const double u = threshold_residual(yhat, y, *spec.epsilon);
      const double d = *spec.delta;
      return u <= d ? u * u : d * d;
    }
    case LossKind::SquaredLog: {
      const double u = threshold_residual(yhat, y, *spec.epsilon);
      return u * u;
    }
  }
  throw InvalidInputError("unknown loss kind");
}

double experiment_objective(const LossSpec& spec, std::span<const double> yhats,
                            std::span<const double> ys) {
  if (yhats.size() != ys.size()) {
    throw InvalidInputError("experiment_objective: prediction/response length mismatch");
  }
  if (ys.empty()) {
    throw InvalidInputError("experiment_objective: empty experiment");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    sum += point_loss(spec, yhats[i], ys[i]);
  }
  return sum / static_cast<double>(ys.size());
}

double scalarize(const ScalarizerSpec& spec, std::span<const double> objectives) {
  spec.validate();
  if (spec.weights.size() != objectives.size()) {
    throw ConfigError("scalarize: weight/objective length mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    require_finite(objectives[i], "objective");
    sum += spec.weights[i] * objectives[i];
  }
  return sum;
}

ReportError report_error(const LossSpec& spec, std::span<const double> yhats,
                         std::span<const double> ys, double threshold) {
  if (!(threshold >= 0.0)) {
    throw InvalidInputError("report_error: threshold must be >= 0");
  }
  if (yhats.size() != ys.size()) {
    throw InvalidInputError("report_error: prediction/response length mismatch");
  }
  ReportError out;
  double sum = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (ys[i] > threshold) {
      sum += point_loss(spec, yhats[i], ys[i]);
      ++out.points_used;
    }
  }
  if (out.points_used > 0) {
    out.value = sum / static_cast<double>(out.points_used);
  }
  return out;
}

}  // namespace dfx
