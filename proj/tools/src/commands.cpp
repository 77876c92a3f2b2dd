#include "dfxcli/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>

#include "dfx/csv.hpp"
#include "dfx/errors.hpp"
#include "dfx/workflow.hpp"
#include "dfxcli/config.hpp"

namespace dfxcli {

namespace {

namespace fs = std::filesystem;

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return buf;
}

/// Applies the config's corruption section to every experiment. Originals
/// are retained on the experiments for clean-data reporting.
void apply_corruption(LoadedConfig& loaded) {
  if (!loaded.corruption || loaded.corruption->fraction <= 0.0) return;
  for (std::size_t i = 0; i < loaded.extraction.experiments.size(); ++i) {
    dfx::CorruptionSpec spec = *loaded.corruption;
    spec.seed = dfx::derive_seed(spec.seed, 0x200 + i);
    auto corrupted = dfx::corrupt_dataset(loaded.extraction.experiments[i], spec);
    if (corrupted.nothing_selected) {
      std::cerr << "warning: corruption selected no points in experiment '"
                << loaded.extraction.experiments[i].name << "'\n";
    }
    loaded.extraction.experiments[i] = std::move(corrupted.experiment);
  }
}

void print_report_line(const std::string& name, const dfx::ReportError& r,
                       double threshold) {
  std::cout << name << ": ";
  if (r.value) {
    std::cout << sci(*r.value);
  } else {
    std::cout << "no-points";
  }
  std::cout << " (" << r.points_used << " points above " << sci(threshold) << ")\n";
}

void write_report_csv_lines(std::ostream& out, const dfx::ExtractionConfig& config,
                            const std::vector<dfx::ReportError>& report) {
  out << "experiment,report_threshold,points_used,report_error\n";
  for (std::size_t i = 0; i < report.size(); ++i) {
    out << config.experiments[i].name << ','
        << dfx::format_double(config.experiments[i].report_threshold) << ','
        << report[i].points_used << ',';
    if (report[i].value) out << dfx::format_double(*report[i].value);
    out << '\n';
  }
}

void write_clean_report(const fs::path& dir, const dfx::ExtractionConfig& config,
                        const dfx::ExtractionResult& result) {
  if (!result.has_best) return;
  const auto names = config.space.names();
  const auto clean = dfx::evaluate_fit(config.model, names, result.best_params,
                                       config.experiments,
                                       dfx::FitReference::CleanOriginal);
  const fs::path tmp = dir / ".report_clean.tmp";
  {
    std::ofstream out(tmp);
    write_report_csv_lines(out, config, clean);
  }
  fs::rename(tmp, dir / "report_clean.csv");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    try {
      std::size_t pos = 0;
      seeds.push_back(std::stoull(field, &pos));
      if (pos != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw dfx::ConfigError("--seeds: cannot parse '" + field + "'");
    }
  }
  if (seeds.empty()) throw dfx::ConfigError("--seeds: empty list");
  return seeds;
}

int cmd_fit(const std::string& config_path, const std::string& out_dir,
            std::size_t jobs, const std::string& seeds_arg) {
  LoadedConfig loaded = load_config(config_path);
  loaded.extraction.jobs = jobs;
  const bool corrupted = loaded.corruption && loaded.corruption->fraction > 0.0;
  apply_corruption(loaded);

  if (!seeds_arg.empty()) {
    // Independent runs over a seed list; one result directory per seed plus
    // the per-experiment median of the report errors.
    const auto seeds = parse_seed_list(seeds_arg);
    const dfx::SeedSweepResult sweep = dfx::extract_seeds(loaded.extraction, seeds);

    const fs::path out = out_dir;
    const fs::path tmp = out.string() + ".tmp-" + std::to_string(::getpid());
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    try {
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        dfx::ExtractionConfig run = loaded.extraction;
        run.seed = seeds[i];
        const fs::path seed_dir = tmp / ("seed_" + std::to_string(seeds[i]));
        dfx::write_result_dir(seed_dir, run, sweep.results[i]);
        if (corrupted) write_clean_report(seed_dir, run, sweep.results[i]);
      }
      std::ofstream median(tmp / "median_report.csv");
      write_report_csv_lines(median, loaded.extraction, sweep.median_report);
    } catch (...) {
      std::error_code ec;
      fs::remove_all(tmp, ec);
      throw;
    }
    fs::remove_all(out);
    fs::rename(tmp, out);

    for (std::size_t i = 0; i < sweep.median_report.size(); ++i) {
      print_report_line(loaded.extraction.experiments[i].name + " (median)",
                        sweep.median_report[i],
                        loaded.extraction.experiments[i].report_threshold);
    }
    std::cout << "results written to " << out_dir << "\n";
    return 0;
  }

  const dfx::ExtractionResult result = dfx::extract(loaded.extraction);
  dfx::write_result_dir(out_dir, loaded.extraction, result);
  if (corrupted) write_clean_report(out_dir, loaded.extraction, result);

  if (!result.has_best) {
    std::cerr << "warning: every trial failed; result has no best parameters\n";
  } else {
    for (std::size_t i = 0; i < result.report.size(); ++i) {
      print_report_line(loaded.extraction.experiments[i].name, result.report[i],
                        loaded.extraction.experiments[i].report_threshold);
    }
  }
  std::cout << "results written to " << out_dir << "\n";
  return 0;
}

/// Orders a name,value parameter file to match the search space.
std::vector<double> ordered_values(const dfx::ExtractionConfig& config,
                                   const std::vector<std::pair<std::string, double>>& params) {
  std::vector<double> values;
  for (const auto& name : config.space.names()) {
    bool found = false;
    for (const auto& [n, v] : params) {
      if (n == name) {
        values.push_back(v);
        found = true;
        break;
      }
    }
    if (!found) throw dfx::ConfigError("parameter file is missing '" + name + "'");
  }
  return values;
}

int cmd_eval(const std::string& config_path, const std::string& params_path) {
  const LoadedConfig loaded = load_config(config_path);
  const auto params = load_params_file(params_path);
  const auto values = ordered_values(loaded.extraction, params);
  const auto names = loaded.extraction.space.names();
  const auto report =
      dfx::evaluate_fit(loaded.extraction.model, names, values,
                        loaded.extraction.experiments, dfx::FitReference::Stored);
  for (std::size_t i = 0; i < report.size(); ++i) {
    print_report_line(loaded.extraction.experiments[i].name, report[i],
                      loaded.extraction.experiments[i].report_threshold);
  }
  return 0;
}

int cmd_corrupt(const std::string& config_path, const std::string& out_dir) {
  LoadedConfig loaded = load_config(config_path);
  if (!loaded.corruption) {
    throw dfx::ConfigError("corrupt: config has no corruption section");
  }

  const fs::path out = out_dir;
  const fs::path tmp = out.string() + ".tmp-" + std::to_string(::getpid());
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  try {
    std::ofstream manifest(tmp / "corrupted_rows.csv");
    manifest << "experiment,row\n";
    for (std::size_t i = 0; i < loaded.extraction.experiments.size(); ++i) {
      const dfx::Experiment& experiment = loaded.extraction.experiments[i];
      dfx::CorruptionSpec spec = *loaded.corruption;
      spec.seed = dfx::derive_seed(spec.seed, 0x200 + i);
      const auto corrupted = dfx::corrupt_dataset(experiment, spec);
      if (corrupted.nothing_selected) {
        std::cerr << "warning: corruption selected no points in experiment '"
                  << experiment.name << "'\n";
      }
      dfx::CsvTable table;
      table.header = experiment.stimulus_names;
      table.header.push_back("y");
      for (std::size_t r = 0; r < experiment.size(); ++r) {
        auto row = corrupted.experiment.stimulus[r];
        row.push_back(corrupted.experiment.response[r]);
        table.rows.push_back(std::move(row));
      }
      dfx::write_csv(tmp / (experiment.name + "_corrupted.csv"), table);
      for (std::size_t r : corrupted.corrupted_indices) {
        manifest << experiment.name << ',' << r << '\n';
      }
    }
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
  fs::remove_all(out);
  fs::rename(tmp, out);
  std::cout << "corrupted datasets written to " << out_dir << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& params_path,
                 const std::string& out_file) {
  const LoadedConfig loaded = load_config(config_path);
  const auto params = load_params_file(params_path);
  const auto values = ordered_values(loaded.extraction, params);
  const auto names = loaded.extraction.space.names();
  const dfx::ParamView view(names, values);

  // Union of stimulus columns across experiments, in first-seen order.
  std::vector<std::string> columns;
  for (const auto& e : loaded.extraction.experiments) {
    for (const auto& s : e.stimulus_names) {
      if (std::find(columns.begin(), columns.end(), s) == columns.end()) {
        columns.push_back(s);
      }
    }
  }

  std::ofstream out(out_file);
  if (!out) throw dfx::Error("cannot write '" + out_file + "'");
  out << "experiment";
  for (const auto& c : columns) out << ',' << c;
  out << ",predicted\n";
  for (const auto& e : loaded.extraction.experiments) {
    const auto predicted = dfx::evaluate_model(loaded.extraction.model, view, e);
    for (std::size_t r = 0; r < e.size(); ++r) {
      out << e.name;
      for (const auto& c : columns) {
        out << ',';
        for (std::size_t s = 0; s < e.stimulus_names.size(); ++s) {
          if (e.stimulus_names[s] == c) {
            out << dfx::format_double(e.stimulus[r][s]);
            break;
          }
        }
      }
      out << ',' << dfx::format_double(predicted[r]) << '\n';
    }
  }
  std::cout << "predictions written to " << out_file << "\n";
  return 0;
}

std::vector<std::vector<std::string>> read_text_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw dfx::InvalidInputError("cannot open '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(dfx::split_fields(line));
  }
  return rows;
}

int cmd_report(const std::string& dir) {
  const fs::path base = dir;
  if (!fs::is_directory(base)) {
    throw dfx::InvalidInputError("not a result directory: " + dir);
  }

  std::cout << "extraction summary: " << dir << "\n";

  const auto provenance = read_text_csv(base / "provenance.csv");
  for (std::size_t i = 1; i < provenance.size(); ++i) {
    if (provenance[i].size() == 2) {
      std::cout << "  " << provenance[i][0] << " = " << provenance[i][1] << "\n";
    }
  }

  const auto best = read_text_csv(base / "best_params.csv");
  std::cout << "best parameters:\n";
  if (best.size() <= 1) {
    std::cout << "  (none; every trial failed)\n";
  }
  for (std::size_t i = 1; i < best.size(); ++i) {
    if (best[i].size() == 2) {
      std::cout << "  " << best[i][0] << " = " << best[i][1] << "\n";
    }
  }

  const auto curves = read_text_csv(base / "curves.csv");
  std::string train, test, retrain;
  for (std::size_t i = 1; i < curves.size(); ++i) {
    if (curves[i].size() != 4) continue;
    if (!curves[i][1].empty()) train = curves[i][1];
    if (!curves[i][2].empty()) test = curves[i][2];
    if (!curves[i][3].empty()) retrain = curves[i][3];
  }
  std::cout << "final Error*:\n";
  std::cout << "  train   = " << (train.empty() ? "n/a" : train) << "\n";
  std::cout << "  test    = " << (test.empty() ? "n/a" : test) << "\n";
  std::cout << "  retrain = " << (retrain.empty() ? "n/a" : retrain) << "\n";

  const auto report = read_text_csv(base / "report.csv");
  std::cout << "report errors:\n";
  if (report.size() <= 1) {
    std::cout << "  (none)\n";
  }
  for (std::size_t i = 1; i < report.size(); ++i) {
    if (report[i].size() != 4) continue;
    std::cout << "  " << report[i][0] << " = "
              << (report[i][3].empty() ? "no-points" : report[i][3]) << " ("
              << report[i][2] << " points above " << report[i][1] << ")\n";
  }
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"derivative-free compact-model parameter extraction", "dfx"};
  app.require_subcommand(1);

  std::string config_path, out_path, params_path, seeds_arg;
  std::size_t jobs = 1;

  auto* fit = app.add_subcommand("fit", "run the full extraction pipeline");
  fit->add_option("config", config_path, "config file")->required();
  fit->add_option("--out", out_path, "result directory")->required();
  fit->add_option("--jobs", jobs, "parallel evaluations per batch (default 1)")
      ->check(CLI::PositiveNumber);
  fit->add_option("--seeds", seeds_arg,
                  "comma-separated seed list for independent runs");

  auto* eval = app.add_subcommand("eval", "report errors of a parameter set");
  eval->add_option("config", config_path, "config file")->required();
  eval->add_option("--params", params_path, "name,value parameter file")->required();

  auto* corrupt = app.add_subcommand("corrupt", "write corrupted dataset copies");
  corrupt->add_option("config", config_path, "config file")->required();
  corrupt->add_option("--out", out_path, "output directory")->required();

  auto* simulate = app.add_subcommand("simulate", "dump model predictions");
  simulate->add_option("config", config_path, "config file")->required();
  simulate->add_option("--params", params_path, "name,value parameter file")->required();
  simulate->add_option("--out", out_path, "output CSV file")->required();

  auto* report = app.add_subcommand("report", "summarize a result directory");
  report->add_option("dir", out_path, "result directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(fit)) return cmd_fit(config_path, out_path, jobs, seeds_arg);
    if (app.got_subcommand(eval)) return cmd_eval(config_path, params_path);
    if (app.got_subcommand(corrupt)) return cmd_corrupt(config_path, out_path);
    if (app.got_subcommand(simulate)) {
      return cmd_simulate(config_path, params_path, out_path);
    }
    if (app.got_subcommand(report)) return cmd_report(out_path);
  } catch (const dfx::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dfx::InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dfx::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace dfxcli
