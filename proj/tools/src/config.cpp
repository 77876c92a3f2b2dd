#include "dfxcli/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dfx/csv.hpp"
#include "dfx/errors.hpp"

namespace dfxcli {

namespace {

namespace fs = std::filesystem;
using dfx::ConfigError;
using nlohmann::json;

struct Problems {
  std::vector<std::string> list;

  void add(std::string msg) { list.push_back(std::move(msg)); }

  void raise_if_any(const fs::path& source) const {
    if (list.empty()) return;
    std::ostringstream msg;
    msg << "invalid config " << source.string() << ":";
    for (const auto& p : list) msg << "\n  - " << p;
    throw ConfigError(msg.str());
  }
};

double num_field(const json& obj, const std::string& ctx, const char* key,
                 std::optional<double> fallback, Problems& problems) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    problems.add(ctx + ": missing '" + key + "'");
    return 0.0;
  }
  if (!obj.at(key).is_number()) {
    problems.add(ctx + ": '" + key + "' must be a number");
    return fallback.value_or(0.0);
  }
  return obj.at(key).get<double>();
}

std::uint64_t uint_field(const json& obj, const std::string& ctx, const char* key,
                         std::uint64_t fallback, Problems& problems) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_unsigned()) {
    problems.add(ctx + ": '" + key + "' must be a nonnegative integer");
    return fallback;
  }
  return obj.at(key).get<std::uint64_t>();
}

std::string str_field(const json& obj, const std::string& ctx, const char* key,
                      std::optional<std::string> fallback, Problems& problems) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    problems.add(ctx + ": missing '" + key + "'");
    return {};
  }
  if (!obj.at(key).is_string()) {
    problems.add(ctx + ": '" + key + "' must be a string");
    return fallback.value_or("");
  }
  return obj.at(key).get<std::string>();
}

dfx::LossKind parse_loss_kind(const std::string& name, const std::string& ctx,
                              Problems& problems) {
  if (name == "abs") return dfx::LossKind::Abs;
  if (name == "log_abs") return dfx::LossKind::LogAbs;
  if (name == "clipped_robust") return dfx::LossKind::ClippedRobust;
  if (name == "squared_log") return dfx::LossKind::SquaredLog;
  problems.add(ctx + ": unknown loss '" + name +
               "' (expected abs, log_abs, clipped_robust or squared_log)");
  return dfx::LossKind::ClippedRobust;
}

void load_experiment_data(dfx::Experiment& experiment, const fs::path& data_path,
                          Problems& problems) {
  if (!fs::exists(data_path)) {
    problems.add("experiment '" + experiment.name + "': data file not found: " +
                 data_path.string());
    return;
  }
  dfx::CsvTable table;
  try {
    table = dfx::read_csv(data_path);
  } catch (const dfx::Error& e) {
    problems.add("experiment '" + experiment.name + "': " + e.what());
    return;
  }
  if (table.header.size() < 2 || table.header.back() != "y") {
    problems.add("experiment '" + experiment.name + "': " + data_path.string() +
                 " must have stimulus columns followed by a final 'y' column");
    return;
  }
  experiment.stimulus_names.assign(table.header.begin(), table.header.end() - 1);
  for (auto& row : table.rows) {
    experiment.response.push_back(row.back());
    row.pop_back();
    experiment.stimulus.push_back(std::move(row));
  }
}

}  // namespace

LoadedConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) {
    throw ConfigError("config file not found: " + path.string());
  }
  std::ifstream in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }

  Problems problems;
  LoadedConfig loaded;
  loaded.source = path;
  dfx::ExtractionConfig& config = loaded.extraction;
  const fs::path base = path.parent_path();

  // model section
  if (!doc.contains("model") || !doc.at("model").is_object()) {
    problems.add("missing 'model' section");
  } else {
    const json& model = doc.at("model");
    const std::string kind = str_field(model, "model", "kind", std::nullopt, problems);
    if (!kind.empty()) {
      try {
        config.model.kind = dfx::parse_model_kind(kind);
      } catch (const ConfigError& e) {
        problems.add(std::string("model: ") + e.what());
      }
    }
    config.model.temperature = num_field(model, "model", "temperature", 300.0, problems);
    if (config.model.kind == dfx::ModelRef::Kind::External) {
      config.model.command = str_field(model, "model", "command", std::nullopt, problems);
      config.model.timeout_seconds = num_field(model, "model", "timeout", 60.0, problems);
    }
  }

  // parameters section
  std::vector<dfx::ParamSpec> params;
  if (!doc.contains("parameters") || !doc.at("parameters").is_array() ||
      doc.at("parameters").empty()) {
    problems.add("missing or empty 'parameters' array");
  } else {
    for (const auto& p : doc.at("parameters")) {
      dfx::ParamSpec spec;
      spec.name = str_field(p, "parameter", "name", std::nullopt, problems);
      const std::string ctx = "parameter '" + spec.name + "'";
      spec.low = num_field(p, ctx, "low", std::nullopt, problems);
      spec.high = num_field(p, ctx, "high", std::nullopt, problems);
      const std::string scale = str_field(p, ctx, "scale", "linear", problems);
      if (scale == "log") {
        spec.scale = dfx::Scale::Log;
      } else if (scale != "linear") {
        problems.add(ctx + ": unknown scale '" + scale + "' (expected linear or log)");
      }
      params.push_back(std::move(spec));
    }
  }
  for (const auto& violation : dfx::validate_space(params)) {
    problems.add(violation);
  }

  // experiments section
  if (!doc.contains("experiments") || !doc.at("experiments").is_array() ||
      doc.at("experiments").empty()) {
    problems.add("missing or empty 'experiments' array");
  } else {
    for (const auto& e : doc.at("experiments")) {
      dfx::Experiment experiment;
      experiment.name = str_field(e, "experiment", "name", std::nullopt, problems);
      const std::string ctx = "experiment '" + experiment.name + "'";
      experiment.loss.kind =
          parse_loss_kind(str_field(e, ctx, "loss", "clipped_robust", problems), ctx,
                          problems);
      if (e.contains("epsilon")) {
        experiment.loss.epsilon = num_field(e, ctx, "epsilon", std::nullopt, problems);
      }
      if (e.contains("delta")) {
        experiment.loss.delta = num_field(e, ctx, "delta", std::nullopt, problems);
      }
      experiment.weight = num_field(e, ctx, "weight", 1.0, problems);
      experiment.report_threshold =
          num_field(e, ctx, "report_threshold", 0.0, problems);
      experiment.output = str_field(e, ctx, "output", "", problems);
      const std::string data = str_field(e, ctx, "data", std::nullopt, problems);
      if (!data.empty()) {
        fs::path data_path = data;
        if (data_path.is_relative()) data_path = base / data_path;
        load_experiment_data(experiment, data_path, problems);
      }
      try {
        experiment.loss.validate();
      } catch (const ConfigError& err) {
        problems.add(ctx + ": " + err.what());
      }
      config.scalarizer.weights.push_back(experiment.weight);
      config.experiments.push_back(std::move(experiment));
    }
  }

  // optimizer section
  {
    const json optimizer =
        doc.contains("optimizer") && doc.at("optimizer").is_object() ? doc.at("optimizer")
                                                                     : json::object();
    config.n_trials = uint_field(optimizer, "optimizer", "n_trials", 250, problems);
    config.seed = uint_field(optimizer, "optimizer", "seed", 0, problems);
    config.sampler.gamma = num_field(optimizer, "optimizer", "gamma", 0.25, problems);
    config.sampler.n_startup =
        uint_field(optimizer, "optimizer", "n_startup", 10, problems);
    config.sampler.n_candidates =
        uint_field(optimizer, "optimizer", "n_candidates", 24, problems);
    config.sampler.bandwidth_floor =
        num_field(optimizer, "optimizer", "bandwidth_floor", 1e-3, problems);
  }

  // workflow section
  {
    const json workflow =
        doc.contains("workflow") && doc.at("workflow").is_object() ? doc.at("workflow")
                                                                   : json::object();
    config.train_fraction =
        num_field(workflow, "workflow", "train_fraction", 0.8, problems);
    config.retrain_trials =
        uint_field(workflow, "workflow", "retrain_trials", 50, problems);
    config.tighten_factor =
        num_field(workflow, "workflow", "tighten_factor", 0.4, problems);
  }

  // optional corruption section
  if (doc.contains("corruption")) {
    if (!doc.at("corruption").is_object()) {
      problems.add("'corruption' must be an object");
    } else {
      const json& corruption = doc.at("corruption");
      dfx::CorruptionSpec spec;
      spec.fraction = num_field(corruption, "corruption", "fraction", std::nullopt, problems);
      spec.mu = num_field(corruption, "corruption", "mu", 0.0, problems);
      spec.sigma = num_field(corruption, "corruption", "sigma", 10.0, problems);
      spec.seed = uint_field(corruption, "corruption", "seed", 0, problems);
      loaded.corruption = spec;
    }
  }

  if (const char* env_seed = std::getenv("DFX_SEED")) {
    std::uint64_t value = 0;
    const char* end = env_seed + std::string_view(env_seed).size();
    auto [ptr, ec] = std::from_chars(env_seed, end, value);
    if (ec != std::errc{} || ptr != end) {
      problems.add("DFX_SEED: cannot parse '" + std::string(env_seed) + "'");
    } else {
      config.seed = value;
    }
  }

  problems.raise_if_any(path);

  config.space = dfx::SearchSpace(std::move(params));
  try {
    config.validate();
    if (loaded.corruption) loaded.corruption->validate();
  } catch (const dfx::Error& e) {
    problems.add(e.what());
  }
  problems.raise_if_any(path);
  return loaded;
}

std::vector<std::pair<std::string, double>> load_params_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open parameter file: " + path.string());
  std::vector<std::pair<std::string, double>> params;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == "name,value") continue;
    const auto fields = dfx::split_fields(line);
    if (fields.size() != 2 || fields[0].empty()) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'name,value'");
    }
    params.emplace_back(fields[0],
                        dfx::parse_double(fields[1], path.string() + ":" +
                                                         std::to_string(line_no)));
  }
  if (params.empty()) {
    throw ConfigError(path.string() + ": no parameters");
  }
  return params;
}

}  // namespace dfxcli
