#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dfx/loss.hpp"

namespace dfx {

/// Boltzmann constant over elementary charge times T gives the thermal
/// voltage; the 2019 SI exact values are used.
inline constexpr double kBoltzmann = 1.380649e-23;   // J/K
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C

inline double thermal_voltage(double temperature_kelvin) {
  return kBoltzmann * temperature_kelvin / kElementaryCharge;
}

struct DiodeParams {
  double IS = 1e-14;  // saturation current, A
  double n = 1.0;     // ideality factor
  double RS = 0.0;    // series resistance, Ohm
  double T = 300.0;   // temperature, K

  void validate() const;
};

/// Terminal current of the series-resistance diode
///   I = IS*(exp((V - I*RS)/(n*VT)) - 1),
/// solved in the junction voltage Vj via a bisection-safeguarded Newton
/// iteration on the strictly increasing
///   f(Vj) = Vj + RS*IS*expm1(Vj/(n*VT)) - V.
/// Working in Vj keeps the exponent bounded near the solution, so high
/// forward bias does not overflow.
double diode_current(const DiodeParams& params, double V);

struct FetParams {
  double VTH = 0.0;  // threshold voltage, V
  double K = 1e-3;   // transconductance factor, A/V^2
  double LAM = 0.0;  // channel-length modulation, 1/V

  void validate() const;
};

struct FetOutput {
  double ID = 0.0;  // drain current, A
  double gm = 0.0;  // transconductance, S
};

/// Square-law FET with channel-length modulation. gm is the central finite
/// difference of ID in VG with step 1e-3 V.
FetOutput fet_outputs(const FetParams& params, double VG, double VD);

/// One measurement campaign: a stimulus table, the measured responses, and
/// the loss/scalarizer settings that apply to it.
struct Experiment {
  std::string name;
  std::vector<std::string> stimulus_names;
  std::vector<std::vector<double>> stimulus;  // rows, aligned with response
  std::vector<double> response;
  LossSpec loss;
  double weight = 1.0;
  double report_threshold = 0.0;
  std::string output;  // model output selector; empty = model default
  /// Uncorrupted responses, present only on datasets produced by the
  /// corruption harness.
  std::optional<std::vector<double>> clean_response;

  std::size_t size() const { return response.size(); }
  std::size_t column(std::string_view name) const;  // throws ConfigError
  void validate() const;
};

/// Which evaluator serves a model reference.
struct ModelRef {
  enum class Kind { Diode, Fet, External };
  Kind kind = Kind::Diode;
  double temperature = 300.0;      // built-in diode
  std::string command;             // external: program + fixed args
  double timeout_seconds = 60.0;   // external: per-evaluation limit
};

ModelRef::Kind parse_model_kind(std::string_view name);  // throws ConfigError

/// Named parameter vector in search-space order.
class ParamView {
 public:
  ParamView(std::span<const std::string> names, std::span<const double> values);

  std::span<const std::string> names() const { return names_; }
  std::span<const double> values() const { return values_; }
  std::optional<double> find(std::string_view name) const;
  double require(std::string_view name) const;  // throws ConfigError

 private:
  std::span<const std::string> names_;
  std::span<const double> values_;
};

/// Predicted responses for `experiment`, row-aligned with its stimulus.
/// Built-in models reject unknown or missing parameter names; external
/// failures surface as EvaluationFailed.
std::vector<double> evaluate_model(const ModelRef& model, const ParamView& params,
                                   const Experiment& experiment);

/// One subprocess evaluation through the file-exchange protocol: a fresh
/// temp directory receives params.csv and stimulus.csv, the command runs
/// with that directory as its sole extra argument, and prediction.csv (one
/// value per stimulus row) is read back on exit code 0. Nonzero exit,
/// timeout, or malformed output throws EvaluationFailed with captured
/// stderr attached.
std::vector<double> external_simulate(const ModelRef& model, const ParamView& params,
                                      const Experiment& experiment);

}  // namespace dfx
