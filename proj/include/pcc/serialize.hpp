#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcc/csv.hpp"
#include "pcc/errors.hpp"
#include "pcc/fitting.hpp"
#include "pcc/models.hpp"
#include "pcc/simulator.hpp"

// JSON schemas for models, simulation configs and fit reports, plus a small
// TOML reader for configs. Model schema:
//
//   {"kind": "independent"|"dependent"|"empirical", "eta": f,
//    "rho": f (empirical), "rhos": [f, ...] (dependent)}

namespace pcc {

using json = nlohmann::json;

inline json model_to_json(const PdeModel& model) {
  json j;
  j["kind"] = kind_name(kind_of(model));
  j["eta"] = eta_of(model);
  if (const auto* dep = std::get_if<DependentModel>(&model)) j["rhos"] = dep->rhos;
  if (const auto* emp = std::get_if<EmpiricalModel>(&model)) j["rho"] = emp->rho;
  return j;
}

inline PdeModel model_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const double eta = j.at("eta").get<double>();
  PdeModel model;
  if (kind == "independent") {
    model = IndependentModel{eta};
  } else if (kind == "dependent") {
    DependentModel dep{eta, {}};
    if (j.contains("rhos")) dep.rhos = j.at("rhos").get<std::vector<double>>();
    model = dep;
  } else if (kind == "empirical") {
    model = EmpiricalModel{eta, j.value("rho", 1.0)};
  } else {
    throw Error("unknown model kind '" + kind + "'");
  }
  validate_model(model);
  return model;
}

inline ModelKind model_kind_from_name(const std::string& name) {
  if (name == "independent") return ModelKind::Independent;
  if (name == "dependent") return ModelKind::Dependent;
  if (name == "empirical") return ModelKind::Empirical;
  throw Error("unknown model kind '" + name + "'");
}

namespace detail {

/// Minimal TOML reader covering flat configs: [section] and dotted keys,
/// strings, booleans, numbers and one-line arrays. Enough for SeriesSpec
/// files; JSON remains the primary format.
inline json toml_subset_to_json(std::istream& in, const std::string& name) {
  json root = json::object();
  std::string line;
  int line_no = 0;
  std::vector<std::string> section;

  auto strip_comment = [](std::string_view s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') in_string = !in_string;
      if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
  };

  std::function<json(std::string_view)> parse_value = [&](std::string_view v) -> json {
    v = trim(v);
    if (v.empty()) throw ParseError(name, line_no, "missing value");
    if (v.front() == '"') {
      if (v.size() < 2 || v.back() != '"') throw ParseError(name, line_no, "unterminated string");
      return std::string(v.substr(1, v.size() - 2));
    }
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '[') {
      if (v.back() != ']') throw ParseError(name, line_no, "unterminated array");
      json arr = json::array();
      const std::string_view body = trim(v.substr(1, v.size() - 2));
      if (body.empty()) return arr;
      for (const auto item : split(body, ',')) arr.push_back(parse_value(item));
      return arr;
    }
    // integer when it looks integral (seeds need all 64 bits), double otherwise
    if (v.find_first_of(".eE") == std::string_view::npos) {
      std::uint64_t u = 0;
      const bool negative = v.front() == '-';
      const std::string_view digits = negative ? v.substr(1) : v;
      const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), u);
      if (res.ec == std::errc{} && res.ptr == digits.data() + digits.size())
        return negative ? json(-static_cast<std::int64_t>(u)) : json(u);
    }
    return parse_double(v, name, line_no);
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(strip_comment(line));
    if (row.empty()) continue;
    if (row.front() == '[') {
      if (row.back() != ']') throw ParseError(name, line_no, "unterminated section header");
      section.clear();
      for (const auto part : split(row.substr(1, row.size() - 2), '.'))
        section.push_back(std::string(trim(part)));
      continue;
    }
    const std::size_t eq = row.find('=');
    if (eq == std::string_view::npos) throw ParseError(name, line_no, "expected key = value");
    json* node = &root;
    for (const auto& s : section) node = &(*node)[s];
    for (const auto part : split(trim(row.substr(0, eq)), '.')) {
      const std::string key(trim(part));
      if (key.empty()) throw ParseError(name, line_no, "empty key");
      node = &(*node)[key];
    }
    *node = parse_value(row.substr(eq + 1));
  }
  return root;
}

}  // namespace detail

/// Loads a config file as JSON; files ending in .toml go through the TOML
/// subset reader.
inline json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".toml")
    return detail::toml_subset_to_json(in, path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path + ": " + e.what());
  }
}

inline DetectorParams detector_from_json(const json& j) {
  DetectorParams det;
  det.tau_s = j.at("tau_s").get<double>();
  det.p_ap = j.at("p_ap").get<double>();
  det.nu_l_hz = j.at("nu_l_hz").get<double>();
  det.validate();
  return det;
}

inline OpticsConfig optics_from_json(const json& j) {
  OpticsConfig optics;
  optics.attenuation_db = j.at("attenuation_db").get<double>();
  if (j.contains("wavelength_nm")) optics.wavelength_m = j.at("wavelength_nm").get<double>() * 1e-9;
  if (j.contains("wavelength_m")) optics.wavelength_m = j.at("wavelength_m").get<double>();
  optics.delta_w_w = j.value("delta_w_w", optics.delta_w_w);
  optics.delta_alpha_db = j.value("delta_alpha_db", optics.delta_alpha_db);
  optics.validate();
  return optics;
}

inline ApOrder order_from_int(int order) {
  if (order == 1) return ApOrder::First;
  if (order == 2) return ApOrder::Second;
  throw Error("order must be 1 or 2");
}

/// Simulation config: model, detector, energy grid (mus | mu_grid | powers_w),
/// sampling layout and seed.
inline SeriesSpec series_spec_from_json(const json& j) {
  SeriesSpec spec;
  spec.model = model_from_json(j.at("model"));
  spec.detector = detector_from_json(j.at("detector"));
  spec.dcr_hz = j.value("dcr_hz", 0.0);
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.samples_per_point = j.value("samples_per_point", 300);
  spec.sample_duration_s = j.value("sample_seconds", 1.0);
  spec.expectation_mode = j.value("expectation_mode", false);
  spec.order = order_from_int(j.value("order", 2));
  spec.sigma_mu_rel = j.value("sigma_mu_rel", 0.02);
  if (j.contains("optics")) spec.optics = optics_from_json(j.at("optics"));
  if (j.contains("mus")) spec.mus = j.at("mus").get<std::vector<double>>();
  if (j.contains("powers_w")) spec.powers_w = j.at("powers_w").get<std::vector<double>>();
  if (j.contains("mu_grid")) {
    const json& g = j.at("mu_grid");
    const double lo = g.at("lo").get<double>();
    const double hi = g.at("hi").get<double>();
    const double step = g.at("step").get<double>();
    if (!(step > 0.0) || hi < lo) throw Error("bad mu_grid");
    const int n = static_cast<int>((hi - lo) / step + 0.5) + 1;
    for (int i = 0; i < n; ++i) spec.mus.push_back(lo + i * step);
  }
  return spec;
}

/// Fit report. Carries everything needed to re-evaluate or plot the fit.
inline json fit_report_json(const FitResult& result, const DetectorParams& detector,
                            ApOrder order, double mu_min, double mu_max, int eta_k_count) {
  json j;
  j["model"] = model_to_json(result.model);
  j["chi2"] = result.chi2;
  j["chi2_reduced"] = result.chi2_reduced;
  j["dof"] = result.dof;
  j["adequacy"] = adequacy_name(result.adequacy);
  j["order"] = order == ApOrder::First ? 1 : 2;
  j["starts_converged"] = result.starts_converged;
  j["detector"] = {{"tau_s", detector.tau_s}, {"p_ap", detector.p_ap}, {"nu_l_hz", detector.nu_l_hz}};
  j["range"] = {{"mu_min", mu_min}, {"mu_max", mu_max}};
  json params = json::array();
  for (const auto& p : result.params)
    params.push_back({{"name", p.name},
                      {"value", p.value},
                      {"at_lower_bound", p.at_lower},
                      {"at_upper_bound", p.at_upper}});
  j["params"] = params;
  json etas = json::array();
  for (int k = 1; k <= eta_k_count; ++k) etas.push_back(eta_k(result.model, k));
  j["eta_k"] = etas;
  json residuals = json::array();
  for (const auto& r : result.residuals)
    residuals.push_back({{"mu", r.mu},
                         {"observed_hz", r.observed_hz},
                         {"predicted_hz", r.predicted_hz},
                         {"sigma_hz", r.sigma_hz}});
  j["residuals"] = residuals;
  j["notes"] = result.notes;
  return j;
}

}  // namespace pcc
