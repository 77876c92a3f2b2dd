#include "dfx/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string_view>

#include <unistd.h>

#include "dfx/csv.hpp"
#include "dfx/errors.hpp"
#include "dfx/rng.hpp"

namespace dfx {

namespace {

namespace fs = std::filesystem;

// Stream tags for deriving stage seeds from the master seed.
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kRetrainStream = 2;
constexpr std::uint64_t kSplitStreamBase = 0x100;

struct Fnv1a {
  std::uint64_t hash = 1469598103934665603ULL;

  void add(std::string_view s) {
    for (unsigned char c : s) {
      hash ^= c;
      hash *= 1099511628211ULL;
    }
    add_byte(0);
  }
  void add(double v) { add(format_double(v)); }
  void add(std::uint64_t v) { add(std::to_string(v)); }

 private:
  void add_byte(unsigned char c) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
};

Experiment take_rows(const Experiment& experiment, std::span<const std::size_t> rows) {
  Experiment out;
  out.name = experiment.name;
  out.stimulus_names = experiment.stimulus_names;
  out.loss = experiment.loss;
  out.weight = experiment.weight;
  out.report_threshold = experiment.report_threshold;
  out.output = experiment.output;
  out.stimulus.reserve(rows.size());
  out.response.reserve(rows.size());
  for (std::size_t r : rows) {
    out.stimulus.push_back(experiment.stimulus[r]);
    out.response.push_back(experiment.response[r]);
  }
  if (experiment.clean_response) {
    std::vector<double> clean;
    clean.reserve(rows.size());
    for (std::size_t r : rows) clean.push_back((*experiment.clean_response)[r]);
    out.clean_response = std::move(clean);
  }
  return out;
}

std::string sanitize_filename(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? std::string("experiment") : out;
}

}  // namespace

void ExtractionConfig::validate() const {
  if (space.size() == 0) throw ConfigError("extraction: empty search space");
  if (experiments.empty()) throw ConfigError("extraction: no experiments");
  if (scalarizer.weights.size() != experiments.size()) {
    throw ConfigError("extraction: scalarizer weight count != experiment count");
  }
  scalarizer.validate();
  sampler.validate();
  for (const auto& e : experiments) {
    e.validate();
    if (e.size() < 2) {
      throw ConfigError("experiment '" + e.name + "': needs at least 2 points to split");
    }
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("extraction: train_fraction must be in (0, 1)");
  }
  if (!(tighten_factor > 0.0 && tighten_factor <= 1.0)) {
    throw ConfigError("extraction: tighten_factor must be in (0, 1]");
  }
  if (n_trials < 1) throw ConfigError("extraction: n_trials must be >= 1");
  if (jobs < 1) throw ConfigError("extraction: jobs must be >= 1");
}

std::uint64_t ExtractionConfig::fingerprint() const {
  Fnv1a h;
  h.add(std::uint64_t(static_cast<unsigned>(model.kind)));
  h.add(model.temperature);
  h.add(model.command);
  h.add(model.timeout_seconds);
  for (const auto& p : space.params()) {
    h.add(p.name);
    h.add(p.low);
    h.add(p.high);
    h.add(std::uint64_t(p.scale == Scale::Log));
  }
  for (const auto& e : experiments) {
    h.add(e.name);
    for (const auto& s : e.stimulus_names) h.add(s);
    for (const auto& row : e.stimulus) {
      for (double v : row) h.add(v);
    }
    for (double v : e.response) h.add(v);
    h.add(std::uint64_t(static_cast<unsigned>(e.loss.kind)));
    h.add(e.loss.epsilon.value_or(-1.0));
    h.add(e.loss.delta.value_or(-1.0));
    h.add(e.weight);
    h.add(e.report_threshold);
    h.add(e.output);
  }
  for (double w : scalarizer.weights) h.add(w);
  h.add(std::uint64_t(sampler.n_startup));
  h.add(sampler.gamma);
  h.add(std::uint64_t(sampler.n_candidates));
  h.add(sampler.bandwidth_floor);
  h.add(std::uint64_t(n_trials));
  h.add(std::uint64_t(retrain_trials));
  h.add(tighten_factor);
  h.add(train_fraction);
  h.add(seed);
  h.add(std::uint64_t(jobs));
  return h.hash;
}

void CorruptionSpec::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ConfigError("corruption: fraction must be in [0, 1]");
  }
  if (!(sigma >= 0.0)) throw ConfigError("corruption: sigma must be >= 0");
  if (!std::isfinite(mu)) throw ConfigError("corruption: mu must be finite");
}

SplitResult split_dataset(const Experiment& experiment, double train_fraction,
                          std::uint64_t seed) {
  experiment.validate();
  const std::size_t k = experiment.size();
  if (k < 2) throw InvalidInputError("split_dataset: need at least 2 points");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInputError("split_dataset: train_fraction must be in (0, 1)");
  }
  auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(k)));
  n_train = std::clamp<std::size_t>(n_train, 1, k - 1);

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = k - 1; i > 0; --i) {
    std::swap(order[i], order[rng.index(i + 1)]);
  }
  std::vector<std::size_t> train_rows(order.begin(),
                                      order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_rows(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                                     order.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {take_rows(experiment, train_rows), take_rows(experiment, test_rows)};
}

CorruptionResult corrupt_dataset(const Experiment& experiment, const CorruptionSpec& spec) {
  spec.validate();
  experiment.validate();
  const std::size_t k = experiment.size();
  const auto count =
      static_cast<std::size_t>(std::floor(spec.fraction * static_cast<double>(k)));

  CorruptionResult result;
  result.experiment = experiment;
  if (count == 0) {
    result.nothing_selected = true;
    return result;
  }

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < k; ++i) {
    if (experiment.response[i] > 0.0) eligible.push_back(i);
  }
  if (count > eligible.size()) {
    throw InvalidInputError("corrupt_dataset: only " + std::to_string(eligible.size()) +
                            " positive responses, cannot corrupt " + std::to_string(count));
  }

  Rng rng(spec.seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  result.corrupted_indices.assign(eligible.begin(),
                                  eligible.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(result.corrupted_indices.begin(), result.corrupted_indices.end());

  result.experiment.clean_response = experiment.response;
  for (std::size_t idx : result.corrupted_indices) {
    const double z = rng.normal(spec.mu, spec.sigma);
    if (z == 0.0) continue;  // degenerate noise leaves the value bit-exact
    result.experiment.response[idx] =
        std::pow(10.0, std::log10(experiment.response[idx]) + z);
  }
  return result;
}

double objective_of(const ExtractionConfig& config, std::span<const double> params,
                    std::span<const Experiment> experiments) {
  const auto names = config.space.names();
  const ParamView view(names, params);
  std::vector<double> objectives;
  objectives.reserve(experiments.size());
  for (const auto& e : experiments) {
    const auto yhat = evaluate_model(config.model, view, e);
    objectives.push_back(experiment_objective(e.loss, yhat, e.response));
  }
  return scalarize(config.scalarizer, objectives);
}

namespace {

/// Mean point loss over a row subset, computed from full-stimulus
/// predictions so one model evaluation serves both the train and the
/// held-out objective.
double masked_objective(const LossSpec& loss, std::span<const double> yhat,
                        std::span<const double> y, std::span<const std::size_t> rows) {
  double sum = 0.0;
  for (std::size_t r : rows) sum += point_loss(loss, yhat[r], y[r]);
  return sum / static_cast<double>(rows.size());
}

}  // namespace

ExtractionResult extract(const ExtractionConfig& config) {
  config.validate();

  ExtractionResult result;
  result.seed = config.seed;
  result.config_hash = config.fingerprint();

  const auto names = config.space.names();
  const std::size_t n_exp = config.experiments.size();

  // Per-experiment row partitions, seeded independently.
  std::vector<std::vector<std::size_t>> train_rows(n_exp), test_rows(n_exp);
  for (std::size_t i = 0; i < n_exp; ++i) {
    const std::size_t k = config.experiments[i].size();
    auto n_train = static_cast<std::size_t>(
        std::floor(config.train_fraction * static_cast<double>(k)));
    n_train = std::clamp<std::size_t>(n_train, 1, k - 1);
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, kSplitStreamBase + i));
    for (std::size_t j = k - 1; j > 0; --j) {
      std::swap(order[j], order[rng.index(j + 1)]);
    }
    train_rows[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_rows[i].assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train_rows[i].begin(), train_rows[i].end());
    std::sort(test_rows[i].begin(), test_rows[i].end());
  }

  // Train phase: each trial evaluates the model on the full stimulus once;
  // the train rows feed the sampler and the test rows feed the held-out
  // curve recorded on the side.
  std::vector<std::optional<double>> test_objectives(config.n_trials);
  const ObjectiveFn train_objective = [&](std::size_t trial,
                                          std::span<const double> params) {
    const ParamView view(names, params);
    std::vector<double> train_parts(n_exp), test_parts(n_exp);
    for (std::size_t i = 0; i < n_exp; ++i) {
      const Experiment& e = config.experiments[i];
      const auto yhat = evaluate_model(config.model, view, e);
      train_parts[i] = masked_objective(e.loss, yhat, e.response, train_rows[i]);
      test_parts[i] = masked_objective(e.loss, yhat, e.response, test_rows[i]);
    }
    test_objectives[trial] = scalarize(config.scalarizer, test_parts);
    return scalarize(config.scalarizer, train_parts);
  };

  result.train_study =
      run_study(train_objective, config.space, config.n_trials,
                derive_seed(config.seed, kTrainStream), config.sampler, {},
                StudyOptions{.jobs = config.jobs});
  result.train_curve = best_so_far(result.train_study);

  // Held-out curve: prefix minimum, failed trials inherit.
  {
    std::optional<double> best;
    for (std::size_t t = 0; t < config.n_trials; ++t) {
      if (!result.train_study.trials[t].ok()) {
        result.test_curve.push_back(best);
        continue;
      }
      const auto& v = test_objectives[t];
      if (v && (!best || *v < *best)) best = v;
      result.test_curve.push_back(best);
    }
  }

  const Trial* train_best = result.train_study.best();
  if (!train_best) {
    return result;  // every trial failed; no-best result
  }

  std::vector<double> best_params = train_best->params;

  if (config.retrain_trials >= 1) {
    const SearchSpace tightened =
        tighten_space(config.space, train_best->params, config.tighten_factor);
    const ObjectiveFn full_objective = [&](std::size_t, std::span<const double> params) {
      return objective_of(config, params, config.experiments);
    };
    const std::vector<std::vector<double>> warm = {train_best->params};
    result.retrain_study =
        run_study(full_objective, tightened, config.retrain_trials,
                  derive_seed(config.seed, kRetrainStream), config.sampler, warm,
                  StudyOptions{.jobs = config.jobs});
    result.retrain_curve = best_so_far(*result.retrain_study);
    if (const Trial* retrain_best = result.retrain_study->best()) {
      best_params = retrain_best->params;
    }
  }

  result.has_best = true;
  result.best_params = std::move(best_params);
  result.report = evaluate_fit(config.model, names, result.best_params,
                               config.experiments, FitReference::Stored);
  return result;
}

SeedSweepResult extract_seeds(const ExtractionConfig& config,
                              std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw InvalidInputError("extract_seeds: empty seed list");
  SeedSweepResult sweep;
  sweep.seeds.assign(seeds.begin(), seeds.end());
  for (std::uint64_t seed : seeds) {
    ExtractionConfig run = config;
    run.seed = seed;
    sweep.results.push_back(extract(run));
  }

  for (std::size_t e = 0; e < config.experiments.size(); ++e) {
    std::vector<double> values;
    std::size_t points_used = 0;
    for (const auto& result : sweep.results) {
      if (e < result.report.size() && result.report[e].value) {
        values.push_back(*result.report[e].value);
        points_used = result.report[e].points_used;
      }
    }
    ReportError med;
    if (!values.empty()) {
      std::sort(values.begin(), values.end());
      const std::size_t n = values.size();
      med.value = n % 2 == 1 ? values[n / 2]
                             : 0.5 * (values[n / 2 - 1] + values[n / 2]);
      med.points_used = points_used;
    }
    sweep.median_report.push_back(med);
  }
  return sweep;
}

std::vector<ReportError> evaluate_fit(const ModelRef& model,
                                      std::span<const std::string> names,
                                      std::span<const double> values,
                                      std::span<const Experiment> experiments,
                                      FitReference against) {
  const ParamView view(names, values);
  std::vector<ReportError> out;
  out.reserve(experiments.size());
  for (const auto& e : experiments) {
    const std::vector<double>* truth = &e.response;
    if (against == FitReference::CleanOriginal) {
      if (!e.clean_response) {
        throw ConfigError("experiment '" + e.name +
                          "': clean reference requested but the dataset was never corrupted");
      }
      truth = &*e.clean_response;
    }
    const auto yhat = evaluate_model(model, view, e);
    out.push_back(report_error(e.loss, yhat, *truth, e.report_threshold));
  }
  return out;
}

namespace {

void write_curves_csv(const fs::path& path, const ExtractionResult& result) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "trial,train_error,test_error,retrain_error\n";
  const std::size_t rows =
      std::max(result.train_curve.size(), result.retrain_curve.size());
  for (std::size_t t = 0; t < rows; ++t) {
    out << t << ',';
    if (t < result.train_curve.size() && result.train_curve[t]) {
      out << format_double(*result.train_curve[t]);
    }
    out << ',';
    if (t < result.test_curve.size() && result.test_curve[t]) {
      out << format_double(*result.test_curve[t]);
    }
    out << ',';
    if (t < result.retrain_curve.size() && result.retrain_curve[t]) {
      out << format_double(*result.retrain_curve[t]);
    }
    out << '\n';
  }
}

void write_report_csv(const fs::path& path, const ExtractionConfig& config,
                      const ExtractionResult& result) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "experiment,report_threshold,points_used,report_error\n";
  for (std::size_t i = 0; i < result.report.size(); ++i) {
    const auto& r = result.report[i];
    out << config.experiments[i].name << ','
        << format_double(config.experiments[i].report_threshold) << ',' << r.points_used
        << ',';
    if (r.value) out << format_double(*r.value);
    out << '\n';
  }
}

void write_best_params_csv(const fs::path& path, const ExtractionConfig& config,
                           const ExtractionResult& result) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "name,value\n";
  if (result.has_best) {
    const auto names = config.space.names();
    for (std::size_t i = 0; i < names.size(); ++i) {
      out << names[i] << ',' << format_double(result.best_params[i]) << '\n';
    }
  }
}

void write_provenance_csv(const fs::path& path, const ExtractionResult& result) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "key,value\n";
  out << "seed," << result.seed << '\n';
  out << "config_hash," << result.config_hash << '\n';
}

void write_fit_csv(const fs::path& path, const ExtractionConfig& config,
                   const Experiment& experiment, std::span<const double> predicted) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& s : experiment.stimulus_names) out << s << ',';
  out << "measured,predicted\n";
  for (std::size_t r = 0; r < experiment.size(); ++r) {
    for (double v : experiment.stimulus[r]) out << format_double(v) << ',';
    out << format_double(experiment.response[r]) << ','
        << format_double(predicted[r]) << '\n';
  }
}

}  // namespace

void write_result_dir(const fs::path& out, const ExtractionConfig& config,
                      const ExtractionResult& result) {
  const fs::path parent = out.parent_path().empty() ? "." : out.parent_path();
  fs::create_directories(parent);
  const fs::path tmp =
      parent / (out.filename().string() + ".tmp-" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  try {
    write_trials_csv(result.train_study, tmp / "trials_train.csv");
    if (result.retrain_study) {
      write_trials_csv(*result.retrain_study, tmp / "trials_retrain.csv");
    } else {
      std::ofstream retrain(tmp / "trials_retrain.csv");
      retrain << "trial,status,objective";
      for (const auto& name : config.space.names()) retrain << ',' << name;
      retrain << '\n';
    }
    write_curves_csv(tmp / "curves.csv", result);
    write_best_params_csv(tmp / "best_params.csv", config, result);
    write_report_csv(tmp / "report.csv", config, result);
    write_provenance_csv(tmp / "provenance.csv", result);
    if (result.has_best) {
      const auto names = config.space.names();
      const ParamView view(names, result.best_params);
      for (const auto& e : config.experiments) {
        const auto predicted = evaluate_model(config.model, view, e);
        write_fit_csv(tmp / ("fit_" + sanitize_filename(e.name) + ".csv"), config, e,
                      predicted);
      }
    }
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }

  fs::remove_all(out);
  fs::rename(tmp, out);
}

}  // namespace dfx
