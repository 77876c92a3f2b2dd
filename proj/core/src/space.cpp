#include "dfx/space.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dfx/errors.hpp"

namespace dfx {

std::vector<std::string> validate_space(std::span<const ParamSpec> params) {
  std::vector<std::string> violations;
  if (params.empty()) {
    violations.push_back("space has no parameters");
  }
  std::unordered_set<std::string> seen;
  for (const auto& p : params) {
    if (p.name.empty()) {
      violations.push_back("parameter with empty name");
    }
    if (!seen.insert(p.name).second) {
      violations.push_back("duplicate parameter name '" + p.name + "'");
    }
    if (!(p.low < p.high)) {
      violations.push_back("parameter '" + p.name + "': low must be < high");
    }
    if (p.scale == Scale::Log && !(p.low > 0.0)) {
      violations.push_back("parameter '" + p.name + "': log scale requires low > 0");
    }
    if (!std::isfinite(p.low) || !std::isfinite(p.high)) {
      violations.push_back("parameter '" + p.name + "': bounds must be finite");
    }
  }
  return violations;
}

SearchSpace::SearchSpace(std::vector<ParamSpec> params) : params_(std::move(params)) {
  const auto violations = validate_space(params_);
  if (!violations.empty()) {
    std::string msg = "invalid search space:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw ConfigError(msg);
  }
}

std::vector<std::string> SearchSpace::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

bool SearchSpace::contains(std::span<const double> point) const {
  if (point.size() != params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!(point[i] >= params_[i].low && point[i] <= params_[i].high)) return false;
  }
  return true;
}

double unit_transform(const ParamSpec& spec, double value, MapDirection direction) {
  const bool log_scale = spec.scale == Scale::Log;
  const double lo = log_scale ? std::log10(spec.low) : spec.low;
  const double hi = log_scale ? std::log10(spec.high) : spec.high;
  if (direction == MapDirection::ToUnit) {
    if (!(value >= spec.low && value <= spec.high)) {
      throw InvalidInputError("unit_transform: value outside bounds of '" +
                              spec.name + "'");
    }
    const double v = log_scale ? std::log10(value) : value;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  }
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InvalidInputError("unit_transform: unit coordinate outside [0, 1]");
  }
  const double v = lo + value * (hi - lo);
  const double natural = log_scale ? std::pow(10.0, v) : v;
  return std::clamp(natural, spec.low, spec.high);
}

SearchSpace tighten_space(const SearchSpace& space, std::span<const double> best,
                          double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) {
    throw InvalidInputError("tighten_space: factor must be in (0, 1]");
  }
  if (!space.contains(best)) {
    throw InvalidInputError("tighten_space: best point lies outside the space");
  }
  std::vector<ParamSpec> tightened;
  tightened.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const ParamSpec& p = space.param(i);
    const bool log_scale = p.scale == Scale::Log;
    const double lo = log_scale ? std::log10(p.low) : p.low;
    const double hi = log_scale ? std::log10(p.high) : p.high;
    const double center = log_scale ? std::log10(best[i]) : best[i];
    const double half = factor * (hi - lo) / 2.0;
    double new_lo = std::max(lo, center - half);
    double new_hi = std::min(hi, center + half);
    ParamSpec q = p;
    q.low = log_scale ? std::pow(10.0, new_lo) : new_lo;
    q.high = log_scale ? std::pow(10.0, new_hi) : new_hi;
    // Clamp against rounding so the tightened box stays inside the original
    // and keeps the best point.
    q.low = std::clamp(q.low, p.low, std::min(best[i], p.high));
    q.high = std::clamp(q.high, std::max(best[i], p.low), p.high);
    tightened.push_back(std::move(q));
  }
  return SearchSpace(std::move(tightened));
}

}  // namespace dfx
