#include "dfx/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numbers>

#include "dfx/csv.hpp"
#include "dfx/errors.hpp"

namespace dfx {

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

// Acklam's rational approximation of the standard normal quantile, refined
// with one Halley step. Accurate to ~1e-15 over (0, 1).
double norm_ppf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -INFINITY;
    if (p == 1.0) return INFINITY;
    throw InvalidInputError("norm_ppf: probability outside [0, 1]");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = norm_cdf(x) - p;
  const double u = e * std::numbers::sqrt2 * std::sqrt(std::numbers::pi) *
                   std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

void SamplerConfig::validate() const {
  if (n_startup < 1) throw ConfigError("sampler: n_startup must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("sampler: gamma must be in (0, 1)");
  if (n_candidates < 1) throw ConfigError("sampler: n_candidates must be >= 1");
  if (!(bandwidth_floor > 0.0)) throw ConfigError("sampler: bandwidth_floor must be > 0");
}

std::optional<std::size_t> Study::best_index() const {
  std::optional<std::size_t> best;
  for (const Trial& t : trials) {
    if (!t.ok()) continue;
    if (!best || t.objective < trials[*best].objective) best = t.index;
  }
  return best;
}

const Trial* Study::best() const {
  const auto idx = best_index();
  return idx ? &trials[*idx] : nullptr;
}

std::vector<double> random_suggest(const SearchSpace& space, Rng& rng) {
  std::vector<double> point(space.size());
  for (std::size_t d = 0; d < space.size(); ++d) {
    point[d] = unit_transform(space.param(d), rng.uniform(), MapDirection::FromUnit);
  }
  return point;
}

TrialPartition partition_trials(std::span<const Trial> trials, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInputError("partition_trials: gamma must be in (0, 1)");
  }
  std::vector<const Trial*> completed;
  for (const Trial& t : trials) {
    if (t.ok()) completed.push_back(&t);
  }
  if (completed.size() < 2) {
    throw InvalidInputError("partition_trials: need at least 2 completed trials");
  }
  std::sort(completed.begin(), completed.end(), [](const Trial* a, const Trial* b) {
    if (a->objective != b->objective) return a->objective < b->objective;
    return a->index < b->index;
  });
  const auto n = completed.size();
  auto n_good = static_cast<std::size_t>(
      std::ceil(gamma * static_cast<double>(n)));
  n_good = std::clamp<std::size_t>(n_good, 1, n);
  TrialPartition part;
  part.good.assign(completed.begin(), completed.begin() + static_cast<std::ptrdiff_t>(n_good));
  part.bad.assign(completed.begin() + static_cast<std::ptrdiff_t>(n_good), completed.end());
  return part;
}

std::vector<double> neighbor_bandwidths(std::span<const double> points, double floor) {
  const std::size_t n = points.size();
  std::vector<double> widths(n);
  if (n == 0) return widths;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });

  const double lo_clip =
      std::max(floor, 1.0 / static_cast<double>(std::min<std::size_t>(100, n + 1)));
  for (std::size_t r = 0; r < n; ++r) {
    const double x = points[order[r]];
    const double left = r == 0 ? 0.0 : points[order[r - 1]];
    const double right = r + 1 == n ? 1.0 : points[order[r + 1]];
    const double width = std::max(x - left, right - x);
    widths[order[r]] = std::clamp(width, lo_clip, 1.0);
  }
  return widths;
}

ParzenEstimator::ParzenEstimator(std::vector<double> points,
                                 std::vector<double> bandwidths)
    : points_(std::move(points)), bandwidths_(std::move(bandwidths)) {
  if (points_.size() != bandwidths_.size()) {
    throw InvalidInputError("parzen: point/bandwidth length mismatch");
  }
  const std::size_t n = points_.size();
  inv_two_sq_.resize(n);
  norm_.resize(n);
  cdf_lo_.resize(n);
  cdf_span_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = points_[i];
    const double s = bandwidths_[i];
    if (!(mu >= 0.0 && mu <= 1.0)) {
      throw InvalidInputError("parzen: kernel center outside [0, 1]");
    }
    if (!(s > 0.0)) {
      throw InvalidInputError("parzen: bandwidth must be > 0");
    }
    // Kernels further than 7 sigma from both edges carry < 1.3e-12 tail
    // mass outside [0, 1]; treat them as untruncated.
    const double reach = 7.0 * s;
    if (mu >= reach && mu + reach <= 1.0) {
      cdf_lo_[i] = 0.0;
      cdf_span_[i] = 1.0;
    } else {
      const double lo = norm_cdf((0.0 - mu) / s);
      const double hi = norm_cdf((1.0 - mu) / s);
      cdf_lo_[i] = lo;
      cdf_span_[i] = hi - lo;
    }
    inv_two_sq_[i] = 1.0 / (2.0 * s * s);
    norm_[i] = kInvSqrt2Pi / (s * cdf_span_[i]);
  }
}

double ParzenEstimator::pdf(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw InvalidInputError("parzen: query point outside [0, 1]");
  }
  // Uniform prior component contributes density 1.
  double sum = 1.0;
  const std::size_t n = points_.size();
  const double* mu = points_.data();
  const double* q = inv_two_sq_.data();
  const double* a = norm_.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x - mu[i];
    const double t = q[i] * d * d;
    if (t > 45.0) continue;  // exp(-45) is below any tolerance we track
    sum += a[i] * std::exp(-t);
  }
  return sum / static_cast<double>(n + 1);
}

double ParzenEstimator::log_pdf(double x) const { return std::log(pdf(x)); }

double ParzenEstimator::sample(Rng& rng) const {
  const std::size_t n = points_.size();
  const std::size_t component = rng.index(n + 1);
  if (component == n) {
    return rng.uniform();  // uniform prior
  }
  const double u = rng.uniform();
  const double p = cdf_lo_[component] + u * cdf_span_[component];
  const double z = norm_ppf(std::clamp(p, 1e-300, 1.0 - 1e-16));
  const double x = points_[component] + bandwidths_[component] * z;
  return std::clamp(x, 0.0, 1.0);
}

double parzen_density(std::span<const double> points,
                      std::span<const double> bandwidths, double x) {
  ParzenEstimator estimator(std::vector<double>(points.begin(), points.end()),
                            std::vector<double>(bandwidths.begin(), bandwidths.end()));
  return estimator.pdf(x);
}

TpeSampler::TpeSampler(SearchSpace space, SamplerConfig config, std::uint64_t seed)
    : space_(std::move(space)), config_(config), rng_(seed) {
  config_.validate();
}

std::vector<double> TpeSampler::suggest(std::span<const Trial> history) {
  std::size_t completed = 0;
  for (const Trial& t : history) {
    if (t.ok()) ++completed;
  }
  if (completed < std::max<std::size_t>(config_.n_startup, 2)) {
    return random_suggest(space_, rng_);
  }

  const TrialPartition part = partition_trials(history, config_.gamma);
  const std::size_t p = space_.size();

  std::vector<ParzenEstimator> good_density;
  std::vector<ParzenEstimator> bad_density;
  good_density.reserve(p);
  bad_density.reserve(p);
  std::vector<double> coords;
  for (std::size_t d = 0; d < p; ++d) {
    const ParamSpec& spec = space_.param(d);
    coords.clear();
    for (const Trial* t : part.good) {
      coords.push_back(unit_transform(spec, t->params[d], MapDirection::ToUnit));
    }
    // Kernel order is irrelevant to the mixture; sorted coords make the
    // neighbor-width pass cheap.
    std::sort(coords.begin(), coords.end());
    good_density.emplace_back(coords, neighbor_bandwidths(coords, config_.bandwidth_floor));
    coords.clear();
    for (const Trial* t : part.bad) {
      coords.push_back(unit_transform(spec, t->params[d], MapDirection::ToUnit));
    }
    std::sort(coords.begin(), coords.end());
    bad_density.emplace_back(coords, neighbor_bandwidths(coords, config_.bandwidth_floor));
  }

  // Draw all candidates first (candidate-major, matching the rng stream),
  // then score dimension-major so each estimator's tables stay hot.
  const std::size_t n_candidates = config_.n_candidates;
  std::vector<double> candidates(n_candidates * p);
  for (std::size_t c = 0; c < n_candidates; ++c) {
    for (std::size_t d = 0; d < p; ++d) {
      candidates[c * p + d] = good_density[d].sample(rng_);
    }
  }
  std::vector<double> score(n_candidates, 0.0);
  for (std::size_t d = 0; d < p; ++d) {
    for (std::size_t c = 0; c < n_candidates; ++c) {
      const double x = candidates[c * p + d];
      score[c] += std::log(good_density[d].pdf(x)) - std::log(bad_density[d].pdf(x));
    }
  }
  std::size_t best_c = 0;
  for (std::size_t c = 1; c < n_candidates; ++c) {
    if (score[c] > score[best_c]) best_c = c;
  }

  std::vector<double> point(p);
  for (std::size_t d = 0; d < p; ++d) {
    point[d] = unit_transform(space_.param(d), candidates[best_c * p + d],
                              MapDirection::FromUnit);
  }
  return point;
}

namespace {

struct EvalOutcome {
  std::optional<double> value;
  std::exception_ptr unexpected;
};

EvalOutcome evaluate_once(const ObjectiveFn& objective, std::size_t index,
                          std::span<const double> params) {
  EvalOutcome out;
  try {
    const double v = objective(index, params);
    if (std::isfinite(v)) out.value = v;
  } catch (const EvaluationFailed&) {
    // recorded as a failed trial
  } catch (...) {
    out.unexpected = std::current_exception();
  }
  return out;
}

}  // namespace

Study run_study(const ObjectiveFn& objective, const SearchSpace& space,
                std::size_t n_trials, std::uint64_t seed, const SamplerConfig& config,
                std::span<const std::vector<double>> warm_start,
                const StudyOptions& options) {
  config.validate();
  if (n_trials < 1) throw InvalidInputError("run_study: n_trials must be >= 1");
  if (options.jobs < 1) throw InvalidInputError("run_study: jobs must be >= 1");
  for (const auto& w : warm_start) {
    if (!space.contains(w)) {
      throw InvalidInputError("run_study: warm-start vector outside the search space");
    }
  }

  Study study;
  study.space = space;
  study.seed = seed;
  study.config = config;
  study.trials.reserve(n_trials);

  TpeSampler sampler(space, config, seed);

  std::size_t next = 0;
  while (next < n_trials) {
    const std::size_t batch = std::min(options.jobs, n_trials - next);
    std::vector<std::vector<double>> params(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t i = next + b;
      params[b] = i < warm_start.size() ? warm_start[i] : sampler.suggest(study.trials);
    }

    std::vector<EvalOutcome> outcomes(batch);
    if (batch == 1) {
      outcomes[0] = evaluate_once(objective, next, params[0]);
    } else {
      std::vector<std::future<EvalOutcome>> futures;
      futures.reserve(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        futures.push_back(std::async(std::launch::async, evaluate_once,
                                     std::cref(objective), next + b,
                                     std::span<const double>(params[b])));
      }
      for (std::size_t b = 0; b < batch; ++b) outcomes[b] = futures[b].get();
    }

    for (std::size_t b = 0; b < batch; ++b) {
      if (outcomes[b].unexpected) std::rethrow_exception(outcomes[b].unexpected);
      Trial t;
      t.index = next + b;
      t.params = std::move(params[b]);
      if (outcomes[b].value) {
        t.status = TrialStatus::Ok;
        t.objective = *outcomes[b].value;
      }
      study.trials.push_back(std::move(t));
    }
    next += batch;
  }
  return study;
}

std::vector<std::optional<double>> best_so_far(const Study& study) {
  std::vector<std::optional<double>> curve;
  curve.reserve(study.trials.size());
  std::optional<double> best;
  for (const Trial& t : study.trials) {
    if (t.ok() && (!best || t.objective < *best)) best = t.objective;
    curve.push_back(best);
  }
  return curve;
}

void write_trials_csv(const Study& study, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "trial,status,objective";
  for (const auto& name : study.space.names()) out << ',' << name;
  out << '\n';
  for (const Trial& t : study.trials) {
    out << t.index << ',' << (t.ok() ? "ok" : "failed") << ',';
    if (t.ok()) out << format_double(t.objective);
    for (double v : t.params) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace dfx
