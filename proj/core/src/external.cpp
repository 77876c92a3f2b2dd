#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "dfx/csv.hpp"
#include "dfx/errors.hpp"
#include "dfx/models.hpp"

namespace dfx {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> tokenize_command(const std::string& command) {
  std::vector<std::string> tokens;
  std::istringstream in(command);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  if (tokens.empty()) {
    throw ConfigError("external model: empty command");
  }
  return tokens;
}

/// Scratch directory for one evaluation; removed on scope exit so failed
/// trials do not accumulate garbage.
struct TempDir {
  fs::path path;

  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "dfx-eval-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) {
      throw Error("cannot create temp directory: " + std::string(std::strerror(errno)));
    }
    path = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

std::string read_stderr_tail(const fs::path& file, std::size_t cap = 2000) {
  std::ifstream in(file);
  if (!in) return {};
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (content.size() > cap) {
    content = "..." + content.substr(content.size() - cap);
  }
  while (!content.empty() && (content.back() == '\n' || content.back() == '\r')) {
    content.pop_back();
  }
  return content;
}

[[noreturn]] void fail(const std::string& what, const fs::path& stderr_file) {
  std::string msg = "external model: " + what;
  const std::string err = read_stderr_tail(stderr_file);
  if (!err.empty()) msg += "\nstderr: " + err;
  throw EvaluationFailed(msg);
}

struct ChildResult {
  bool timed_out = false;
  int exit_code = 0;
  bool signalled = false;
};

ChildResult run_child(const std::vector<std::string>& argv_strings,
                      const fs::path& stderr_file, double timeout_seconds) {
  std::vector<char*> argv;
  argv.reserve(argv_strings.size() + 1);
  for (const auto& s : argv_strings) argv.push_back(const_cast<char*>(s.c_str()));
  argv.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) {
    throw Error("fork failed: " + std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    // Child: only async-signal-safe calls until exec.
    const int err_fd = open(stderr_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (err_fd >= 0) {
      dup2(err_fd, STDERR_FILENO);
      dup2(err_fd, STDOUT_FILENO);
      close(err_fd);
    }
    execvp(argv[0], argv.data());
    _exit(127);
  }

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(timeout_seconds);
  int status = 0;
  for (;;) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) {
      throw Error("waitpid failed: " + std::string(std::strerror(errno)));
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      return {.timed_out = true};
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  ChildResult result;
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.signalled = true;
    result.exit_code = WIFSIGNALED(status) ? WTERMSIG(status) : -1;
  }
  return result;
}

std::vector<double> read_prediction(const fs::path& file, std::size_t expected,
                                    const fs::path& stderr_file) {
  std::ifstream in(file);
  if (!in) fail("prediction.csv missing", stderr_file);
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    try {
      values.push_back(parse_double(line, "prediction.csv:" + std::to_string(line_no)));
    } catch (const InvalidInputError& e) {
      fail(std::string("malformed prediction.csv: ") + e.what(), stderr_file);
    }
  }
  if (values.size() < expected) {
    fail("short output: prediction.csv has " + std::to_string(values.size()) +
             " rows, expected " + std::to_string(expected),
         stderr_file);
  }
  if (values.size() > expected) {
    fail("prediction.csv has " + std::to_string(values.size()) + " rows, expected " +
             std::to_string(expected),
         stderr_file);
  }
  return values;
}

}  // namespace

std::vector<double> external_simulate(const ModelRef& model, const ParamView& params,
                                      const Experiment& experiment) {
  auto argv = tokenize_command(model.command);

  TempDir dir;
  const fs::path stderr_file = dir.path / "stderr.txt";

  {
    std::ofstream out(dir.path / "params.csv");
    for (std::size_t i = 0; i < params.names().size(); ++i) {
      out << params.names()[i] << ',' << format_double(params.values()[i]) << '\n';
    }
  }
  {
    std::ofstream out(dir.path / "stimulus.csv");
    for (std::size_t i = 0; i < experiment.stimulus_names.size(); ++i) {
      if (i) out << ',';
      out << experiment.stimulus_names[i];
    }
    out << '\n';
    for (const auto& row : experiment.stimulus) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << format_double(row[i]);
      }
      out << '\n';
    }
  }

  argv.push_back(dir.path.string());
  const ChildResult child = run_child(argv, stderr_file, model.timeout_seconds);
  if (child.timed_out) {
    std::ostringstream msg;
    msg << "timeout after " << model.timeout_seconds << " s";
    fail(msg.str(), stderr_file);
  }
  if (child.signalled) {
    fail("killed by signal " + std::to_string(child.exit_code), stderr_file);
  }
  if (child.exit_code != 0) {
    fail("exit code " + std::to_string(child.exit_code), stderr_file);
  }
  return read_prediction(dir.path / "prediction.csv", experiment.size(), stderr_file);
}

}  // namespace dfx
