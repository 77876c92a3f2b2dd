#pragma once

#include <span>
#include <string>
#include <vector>

namespace dfx {

enum class Scale { Linear, Log };

/// One named parameter with box bounds. Log-scaled parameters are handled in
/// log10 coordinates everywhere (unit mapping, tightening, sampling), so a
/// log parameter is sampled log-uniformly.
struct ParamSpec {
  std::string name;
  double low = 0.0;
  double high = 1.0;
  Scale scale = Scale::Linear;
};

/// Returns every invariant violation in `params` (duplicate names,
/// low >= high, log scale with low <= 0, empty list). Empty result means ok.
std::vector<std::string> validate_space(std::span<const ParamSpec> params);

/// Ordered, immutable set of parameter bounds. Construction validates all
/// invariants at once and throws ConfigError listing every violation.
class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<ParamSpec> params);

  const std::vector<ParamSpec>& params() const { return params_; }
  const ParamSpec& param(std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }

  std::vector<std::string> names() const;
  bool contains(std::span<const double> point) const;

 private:
  std::vector<ParamSpec> params_;
};

enum class MapDirection { ToUnit, FromUnit };

/// Affine map between a parameter's natural range and the unit interval,
/// computed in log10 coordinates for log-scaled parameters. Round trips are
/// identity to within 1e-12 relative; outputs are clamped onto the target
/// interval so mapped points never escape the bounds by rounding.
double unit_transform(const ParamSpec& spec, double value, MapDirection direction);

/// Shrinks every range symmetrically around `best` to `factor` times the
/// original span (measured in the parameter's scale domain), intersected
/// with the original range. The result always contains `best`.
SearchSpace tighten_space(const SearchSpace& space, std::span<const double> best,
                          double factor);

}  // namespace dfx
