#include "dfx/models.hpp"

#include <algorithm>
#include <cmath>

#include "dfx/errors.hpp"

namespace dfx {

void DiodeParams::validate() const {
  if (!(IS > 0.0)) throw ConfigError("diode: IS must be > 0");
  if (!(n > 0.0)) throw ConfigError("diode: n must be > 0");
  if (!(RS >= 0.0)) throw ConfigError("diode: RS must be >= 0");
  if (!(T > 0.0)) throw ConfigError("diode: T must be > 0");
}

double diode_current(const DiodeParams& params, double V) {
  params.validate();
  if (!std::isfinite(V)) throw InvalidInputError("diode_current: V is not finite");
  const double nvt = params.n * thermal_voltage(params.T);
  if (params.RS == 0.0) {
    return params.IS * std::expm1(V / nvt);
  }
  if (V == 0.0) return 0.0;

  const double rs_is = params.RS * params.IS;
  const auto f = [&](double vj) { return vj + rs_is * std::expm1(vj / nvt) - V; };
  const auto fprime = [&](double vj) { return 1.0 + rs_is / nvt * std::exp(vj / nvt); };

  // The junction voltage is bracketed by 0 and the applied voltage: the
  // resistive drop has the sign of the current.
  double lo = std::min(0.0, V);
  double hi = std::max(0.0, V);
  // Start from an upper bound on the root: dropping the Vj term from f gives
  // Vj <= nvt*log1p(V/(RS*IS)) in forward bias, and Vj <= V always. Newton
  // on the convex increasing f then descends monotonically, and the exponent
  // stays bounded along the way.
  double x;
  if (V > 0.0) {
    x = std::min(V, nvt * std::log1p(V / rs_is));
  } else {
    x = std::clamp(V - rs_is * std::expm1(V / nvt), lo, hi);
  }
  const double f_tol = 1e-15 * std::max(1.0, std::abs(V));

  for (int iter = 0; iter < 200; ++iter) {
    const double fx = f(x);
    if (std::isfinite(fx) && std::abs(fx) <= f_tol) return params.IS * std::expm1(x / nvt);
    if (!std::isfinite(fx) || fx > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    double next;
    if (std::isfinite(fx)) {
      next = x - fx / fprime(x);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // safeguard
    } else {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - x) <= 1e-12 * std::max(1.0, std::abs(x))) {
      return params.IS * std::expm1(next / nvt);
    }
    x = next;
  }
  throw NumericError("diode_current: Newton iteration did not converge");
}

void FetParams::validate() const {
  if (!(K > 0.0)) throw ConfigError("fet: K must be > 0");
  if (!(LAM >= 0.0)) throw ConfigError("fet: LAM must be >= 0");
}

namespace {

double fet_id(const FetParams& p, double VG, double VD) {
  const double vov = VG - p.VTH;
  if (vov <= 0.0) return 0.0;
  const double clm = 1.0 + p.LAM * VD;
  if (VD < vov) {
    return p.K * (2.0 * vov * VD - VD * VD) * clm;  // triode
  }
  return p.K * vov * vov * clm;  // saturation
}

}  // namespace

FetOutput fet_outputs(const FetParams& params, double VG, double VD) {
  params.validate();
  if (!(VD >= 0.0)) throw InvalidInputError("fet_outputs: VD must be >= 0");
  constexpr double h = 1e-3;
  FetOutput out;
  out.ID = fet_id(params, VG, VD);
  out.gm = (fet_id(params, VG + h, VD) - fet_id(params, VG - h, VD)) / (2.0 * h);
  return out;
}

std::size_t Experiment::column(std::string_view name) const {
  for (std::size_t i = 0; i < stimulus_names.size(); ++i) {
    if (stimulus_names[i] == name) return i;
  }
  throw ConfigError("experiment '" + this->name + "': missing stimulus column '" +
                    std::string(name) + "'");
}

void Experiment::validate() const {
  if (stimulus.size() != response.size()) {
    throw ConfigError("experiment '" + name + "': stimulus row count (" +
                      std::to_string(stimulus.size()) + ") != response length (" +
                      std::to_string(response.size()) + ")");
  }
  for (const auto& row : stimulus) {
    if (row.size() != stimulus_names.size()) {
      throw ConfigError("experiment '" + name + "': ragged stimulus table");
    }
  }
  try {
    loss.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("experiment '" + name + "': " + e.what());
  }
  if (!(weight >= 0.0)) throw ConfigError("experiment '" + name + "': negative weight");
  if (!(report_threshold >= 0.0)) {
    throw ConfigError("experiment '" + name + "': negative report threshold");
  }
  if (clean_response && clean_response->size() != response.size()) {
    throw ConfigError("experiment '" + name + "': clean response length mismatch");
  }
}

ModelRef::Kind parse_model_kind(std::string_view name) {
  if (name == "diode") return ModelRef::Kind::Diode;
  if (name == "fet") return ModelRef::Kind::Fet;
  if (name == "external") return ModelRef::Kind::External;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

ParamView::ParamView(std::span<const std::string> names, std::span<const double> values)
    : names_(names), values_(values) {
  if (names_.size() != values_.size()) {
    throw InvalidInputError("parameter name/value length mismatch");
  }
}

std::optional<double> ParamView::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return values_[i];
  }
  return std::nullopt;
}

double ParamView::require(std::string_view name) const {
  if (auto v = find(name)) return *v;
  throw ConfigError("missing required parameter '" + std::string(name) + "'");
}

namespace {

void reject_unknown(const ParamView& params, std::initializer_list<std::string_view> known) {
  for (const auto& name : params.names()) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw ConfigError("unknown parameter '" + name + "' for this model");
    }
  }
}

std::vector<double> evaluate_diode(const ModelRef& model, const ParamView& params,
                                   const Experiment& experiment) {
  reject_unknown(params, {"IS", "n", "RS"});
  DiodeParams dp;
  dp.IS = params.require("IS");
  dp.n = params.require("n");
  dp.RS = params.find("RS").value_or(0.0);
  dp.T = model.temperature;
  const std::size_t v_col = experiment.column("V");
  std::vector<double> out;
  out.reserve(experiment.size());
  for (const auto& row : experiment.stimulus) {
    out.push_back(diode_current(dp, row[v_col]));
  }
  return out;
}

std::vector<double> evaluate_fet(const ParamView& params, const Experiment& experiment) {
  reject_unknown(params, {"VTH", "K", "LAM"});
  FetParams fp;
  fp.VTH = params.require("VTH");
  fp.K = params.require("K");
  fp.LAM = params.require("LAM");
  const std::size_t vg_col = experiment.column("VG");
  const std::size_t vd_col = experiment.column("VD");
  const std::string& selector = experiment.output;
  const bool want_gm = selector == "gm";
  if (!want_gm && !selector.empty() && selector != "ID") {
    throw ConfigError("experiment '" + experiment.name + "': unknown output selector '" +
                      selector + "' (expected ID or gm)");
  }
  std::vector<double> out;
  out.reserve(experiment.size());
  for (const auto& row : experiment.stimulus) {
    const FetOutput o = fet_outputs(fp, row[vg_col], row[vd_col]);
    out.push_back(want_gm ? o.gm : o.ID);
  }
  return out;
}

}  // namespace

std::vector<double> evaluate_model(const ModelRef& model, const ParamView& params,
                                   const Experiment& experiment) {
  experiment.validate();
  switch (model.kind) {
    case ModelRef::Kind::Diode:
      return evaluate_diode(model, params, experiment);
    case ModelRef::Kind::Fet:
      return evaluate_fet(params, experiment);
    case ModelRef::Kind::External:
      return external_simulate(model, params, experiment);
  }
  throw ConfigError("unknown model kind");
}

}  // namespace dfx
