// Stand-in external simulator speaking the file-exchange protocol:
//   fixture_sim --mode <mode> <work-dir>
// reads <work-dir>/params.csv and <work-dir>/stimulus.csv and writes
// <work-dir>/prediction.csv. Modes beyond the well-behaved ones exercise the
// harness error paths.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

std::map<std::string, double> read_params(const std::string& dir) {
  std::ifstream in(dir + "/params.csv");
  std::map<std::string, double> params;
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    params[line.substr(0, comma)] = std::strtod(line.c_str() + comma + 1, nullptr);
  }
  return params;
}

struct Stimulus {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
};

Stimulus read_stimulus(const std::string& dir) {
  std::ifstream in(dir + "/stimulus.csv");
  Stimulus s;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string field;
    if (header) {
      while (std::getline(fields, field, ',')) s.names.push_back(field);
      header = false;
      continue;
    }
    std::vector<double> row;
    while (std::getline(fields, field, ',')) row.push_back(std::strtod(field.c_str(), nullptr));
    s.rows.push_back(std::move(row));
  }
  return s;
}

std::size_t column(const Stimulus& s, const std::string& name) {
  for (std::size_t i = 0; i < s.names.size(); ++i) {
    if (s.names[i] == name) return i;
  }
  std::fprintf(stderr, "fixture_sim: no stimulus column '%s'\n", name.c_str());
  std::exit(4);
}

void write_prediction(const std::string& dir, const std::vector<double>& values) {
  std::ofstream out(dir + "/prediction.csv");
  for (double v : values) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::string mode = "diode_rs0";
  std::string dir;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--mode") == 0 && i + 1 < argc) {
      mode = argv[++i];
    } else {
      dir = argv[i];
    }
  }
  if (dir.empty()) {
    std::fprintf(stderr, "fixture_sim: missing work directory\n");
    return 4;
  }

  if (mode == "hang") {
    std::this_thread::sleep_for(std::chrono::seconds(600));
    return 0;
  }
  if (mode == "exit3") {
    std::fprintf(stderr, "fixture_sim: refusing to simulate\n");
    return 3;
  }

  const Stimulus stimulus = read_stimulus(dir);

  if (mode == "echo") {
    std::vector<double> out;
    for (const auto& row : stimulus.rows) out.push_back(row.empty() ? 0.0 : row[0]);
    write_prediction(dir, out);
    return 0;
  }
  if (mode == "short") {
    std::vector<double> out(stimulus.rows.empty() ? 0 : stimulus.rows.size() - 1, 1.0);
    write_prediction(dir, out);
    return 0;
  }
  if (mode == "garbage") {
    std::ofstream out(dir + "/prediction.csv");
    out << "not-a-number\n";
    return 0;
  }
  if (mode == "diode_rs0") {
    const auto params = read_params(dir);
    if (!params.count("IS") || !params.count("n")) {
      std::fprintf(stderr, "fixture_sim: need IS and n\n");
      return 4;
    }
    const double IS = params.at("IS");
    const double n = params.at("n");
    const double vt = 1.380649e-23 * 300.0 / 1.602176634e-19;
    const std::size_t v_col = column(stimulus, "V");
    std::vector<double> out;
    out.reserve(stimulus.rows.size());
    for (const auto& row : stimulus.rows) {
      out.push_back(IS * std::expm1(row[v_col] / (n * vt)));
    }
    write_prediction(dir, out);
    return 0;
  }

  std::fprintf(stderr, "fixture_sim: unknown mode '%s'\n", mode.c_str());
  return 4;
}
