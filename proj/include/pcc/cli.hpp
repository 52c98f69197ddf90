#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pcc/csv.hpp"
#include "pcc/errors.hpp"
#include "pcc/fitting.hpp"
#include "pcc/measurement.hpp"
#include "pcc/models.hpp"
#include "pcc/serialize.hpp"
#include "pcc/simulator.hpp"

// Command implementations behind the pcc binary. Kept header-side so the
// test suite can drive them directly; the binary is a thin argument parser.

namespace pcc::cli {

/// Parsed --range value. mu1 and mu2 select by maximum energy; points below
/// the nominal grid start are kept (real powers land slightly off-grid).
struct MuRange {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

inline MuRange parse_range(const std::string& text) {
  if (text == "mu1") return {0.0, 1.0};
  if (text == "mu2") return {0.0, 2.0};
  if (text.rfind("custom:", 0) == 0) {
    const std::string body = text.substr(7);
    const std::size_t sep = body.find(':');
    if (sep == std::string::npos) throw Error("--range custom needs custom:<lo>:<hi>");
    try {
      return {std::stod(body.substr(0, sep)), std::stod(body.substr(sep + 1))};
    } catch (const std::exception&) {
      throw Error("bad --range bounds in '" + text + "'");
    }
  }
  throw Error("unknown --range '" + text + "' (use mu1, mu2 or custom:<lo>:<hi>)");
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

/// Builds a measurement series from a raw CSV plus a dark CSV.
inline MeasurementSeries load_raw_series(const std::string& input_path,
                                         const std::string& dark_path,
                                         const DetectorParams& detector,
                                         const std::optional<OpticsConfig>& optics,
                                         double sigma_mu_rel) {
  auto in = open_input(input_path);
  RawSeriesFile raw = read_raw_series(in, input_path);
  if (raw.power_based && !optics)
    throw Error(input_path + ": power-based data needs --atten-db");
  if (dark_path.empty()) throw Error("raw input needs --dark <file>");
  auto dark_in = open_input(dark_path);

  MeasurementSeries series;
  series.points = std::move(raw.points);
  series.dark = read_dark_point(dark_in, dark_path);
  series.detector = detector;
  series.optics = optics;
  series.sigma_mu_rel = sigma_mu_rel;
  series.sort_points();
  return series;
}

struct CorrectOptions {
  std::string input_path;
  std::string dark_path;
  std::string out_path;  ///< empty: stdout
  DetectorParams detector;
  std::optional<OpticsConfig> optics;
  ApOrder order = ApOrder::Second;
  double sigma_mu_rel = 0.02;
  bool verbose = false;
};

/// correct: raw series -> corrected series. A point whose correction fails is
/// flagged on stderr and skipped; the run continues.
inline int run_correct(const CorrectOptions& opt, std::ostream& console, std::ostream& errs) {
  MeasurementSeries series = load_raw_series(opt.input_path, opt.dark_path, opt.detector,
                                             opt.optics, opt.sigma_mu_rel);
  series.validate();
  const double r_dark = series.dark.mean_hz();
  std::vector<CorrectedPoint> corrected;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < series.points.size(); ++i) {
    try {
      for (const auto& warning :
           validate_rates({series.points[i].mean_hz(), r_dark}, series.detector))
        errs << opt.input_path << ": point " << i + 1 << ": warning: " << warning << '\n';
      corrected.push_back(correct_point(series, i, opt.order));
    } catch (const Error& e) {
      ++failed;
      errs << opt.input_path << ": point " << i + 1 << " skipped: " << e.what() << '\n';
    }
  }
  if (corrected.empty()) throw Error("all points failed the correction");

  if (opt.verbose) {
    for (const auto& c : corrected) {
      const CorrectionBreakdown& b = c.breakdown;
      console << "mu=" << format_sig(c.mu, 6) << "  P=" << format_sig(b.p_measured, 6)
              << "  P'=" << format_sig(b.p_measured_dark, 6) << "  P0=" << format_sig(b.p0, 6)
              << "  P0'=" << format_sig(b.p0_dark, 6) << "  P_dc=" << format_sig(b.p_dc, 6)
              << "  P_sig=" << format_sig(b.p_sig, 6) << "  P0_sig=" << format_sig(b.p0_sig, 6)
              << '\n';
    }
  }
  if (opt.out_path.empty()) {
    write_corrected(console, corrected, opt.detector.nu_l_hz);
  } else {
    auto out = open_output(opt.out_path);
    write_corrected(out, corrected, opt.detector.nu_l_hz);
  }
  return failed == 0 ? 0 : 1;
}

struct FitCliOptions {
  std::string input_path;  ///< raw or corrected CSV
  std::string dark_path;
  std::string out_path;    ///< report JSON; empty: no file
  DetectorParams detector;
  std::optional<OpticsConfig> optics;
  ModelKind kind = ModelKind::Independent;
  ApOrder order = ApOrder::Second;
  MuRange range;
  std::uint64_t seed = 0;
  double sigma_mu_rel = 0.02;
  std::string params_path;  ///< model JSON for --no-fit
  bool no_fit = false;
};

inline void print_eta_table(std::ostream& console, const PdeModel& model, int k_max) {
  console << "model=" << kind_name(kind_of(model));
  for (int k = 1; k <= k_max; ++k)
    console << "  eta_" << k << "=" << format_sig(eta_k(model, k), 6);
  console << '\n';
}

/// fit: corrected (or raw) series -> fitted model, adequacy and eta_k table.
/// Exit code 0 for good/marginal fits, 2 for an unusable model.
inline int run_fit(const FitCliOptions& opt, std::ostream& console, std::ostream& errs) {
  FitInput input;
  {
    auto probe = open_input(opt.input_path);
    const CsvKind kind = peek_csv_kind(probe, opt.input_path);
    if (kind == CsvKind::Raw) {
      MeasurementSeries series = load_raw_series(opt.input_path, opt.dark_path, opt.detector,
                                                 opt.optics, opt.sigma_mu_rel);
      input = FitInput{correct_series(series, opt.order), series.detector, series.optics,
                       series.sigma_mu_rel};
    } else {
      input.points = read_corrected(probe, opt.input_path);
      input.detector = opt.detector;
      input.optics = opt.optics;
      input.sigma_mu_rel = opt.sigma_mu_rel;
    }
  }

  const double hi = opt.range.hi * (1.0 + 1e-9);
  std::vector<CorrectedPoint> kept;
  for (auto& p : input.points)
    if (p.mu >= opt.range.lo && p.mu <= hi) kept.push_back(std::move(p));
  input.points = std::move(kept);
  if (input.points.empty()) throw EmptyInput("no points inside the requested mu range");

  double mu_max_eff = opt.range.hi;
  if (!std::isfinite(mu_max_eff)) {
    mu_max_eff = 0.0;
    for (const auto& p : input.points) mu_max_eff = std::max(mu_max_eff, p.mu);
  }
  const int k_max = recommended_order(mu_max_eff);

  FitResult result;
  if (opt.no_fit) {
    if (opt.params_path.empty()) throw Error("--no-fit needs --params <model.json>");
    result.model = model_from_json(load_config(opt.params_path));
    if (kind_of(result.model) != opt.kind)
      errs << "note: --model disagrees with the injected parameters; using the file\n";
    const ChiSquare c = chi2(input, result.model);
    result.chi2 = c.chi2;
    result.chi2_reduced = c.chi2_reduced;
    result.dof = c.dof;
    result.adequacy = classify_adequacy(c.chi2_reduced);
    for (const auto& pt : input.points) {
      FitResidual r;
      r.mu = pt.mu;
      r.observed_hz = pt.r0_sig_hz;
      r.predicted_hz = input.detector.nu_l_hz * detection_probability(result.model, pt.mu);
      r.sigma_hz = std::hypot(pt.sigma_r0_sig_hz, sigma_model_hz(result.model, pt, input));
      result.residuals.push_back(r);
    }
  } else {
    FitOptions options;
    options.order = opt.order;
    options.mu_min = opt.range.lo;
    options.mu_max = opt.range.hi;
    options.seed = opt.seed;
    result = fit(input, opt.kind, options);
  }

  print_eta_table(console, result.model, k_max);
  console << "chi2=" << format_sig(result.chi2, 6) << "  chi2_r=" << format_sig(result.chi2_reduced, 6)
          << "  dof=" << result.dof << "  adequacy=" << adequacy_name(result.adequacy) << '\n';
  for (const auto& note : result.notes) errs << "note: " << note << '\n';

  if (!opt.out_path.empty()) {
    auto out = open_output(opt.out_path);
    out << fit_report_json(result, input.detector, opt.order, opt.range.lo, mu_max_eff, k_max)
               .dump(2)
        << '\n';
  }
  return result.adequacy == Adequacy::Unusable ? 2 : 0;
}

struct SimulateOptions {
  std::string config_path;
  std::string out_path;       ///< series CSV
  std::string dark_out_path;  ///< defaults to out_path with a .dark.csv suffix
  std::optional<std::uint64_t> seed_override;
};

/// simulate: config file -> raw series CSV plus dark CSV, both ingestible by
/// correct/fit.
inline int run_simulate(const SimulateOptions& opt, std::ostream& console, std::ostream&) {
  SeriesSpec spec = series_spec_from_json(load_config(opt.config_path));
  if (opt.seed_override) spec.seed = *opt.seed_override;
  const MeasurementSeries series = generate_series(spec);

  if (opt.out_path.empty()) throw Error("simulate needs --out <series.csv>");
  std::string dark_path = opt.dark_out_path;
  if (dark_path.empty()) {
    dark_path = opt.out_path;
    const std::size_t dot = dark_path.rfind(".csv");
    if (dot != std::string::npos && dot == dark_path.size() - 4) dark_path.resize(dot);
    dark_path += ".dark.csv";
  }
  const bool power_based = series.points.front().power_w.has_value();
  {
    auto out = open_output(opt.out_path);
    write_raw_series(out, series.points, power_based);
  }
  {
    auto out = open_output(dark_path);
    MeasurementPoint dark = series.dark;
    dark.mu = 0.0;
    dark.power_w = power_based ? std::optional<double>(0.0) : std::nullopt;
    // the dark row reuses the series schema; its energy column is ignored
    std::vector<MeasurementPoint> rows{dark};
    write_raw_series(out, rows, power_based);
  }
  console << "wrote " << series.points.size() << " points to " << opt.out_path << " and dark run to "
          << dark_path << '\n';
  return 0;
}

struct TablesOptions {
  std::vector<std::string> inputs;  ///< model JSONs or fit reports
  std::string out_path;             ///< optional CSV
  int k_max = 6;
};

/// tables: per-photon-number efficiency table for saved models or fit
/// reports, one row per input.
inline int run_tables(const TablesOptions& opt, std::ostream& console, std::ostream&) {
  if (opt.inputs.empty()) throw Error("tables needs at least one model or report JSON");
  struct Row {
    std::string label;
    PdeModel model;
    std::optional<double> chi2_reduced;
  };
  std::vector<Row> rows;
  for (const auto& path : opt.inputs) {
    const json j = load_config(path);
    Row row;
    row.label = std::filesystem::path(path).stem().string();
    if (j.contains("model")) {
      row.model = model_from_json(j.at("model"));
      if (j.contains("chi2_reduced")) row.chi2_reduced = j.at("chi2_reduced").get<double>();
    } else {
      row.model = model_from_json(j);
    }
    rows.push_back(std::move(row));
  }

  std::ostringstream table;
  table << "label,kind";
  for (int k = 1; k <= opt.k_max; ++k) table << ",eta_" << k;
  table << ",chi2_r\n";
  for (const auto& row : rows) {
    table << row.label << ',' << kind_name(kind_of(row.model));
    for (int k = 1; k <= opt.k_max; ++k) table << ',' << format_sig(eta_k(row.model, k), 6);
    table << ',';
    if (row.chi2_reduced) table << format_sig(*row.chi2_reduced, 6);
    table << '\n';
  }
  console << table.str();
  if (!opt.out_path.empty()) {
    auto out = open_output(opt.out_path);
    out << table.str();
  }
  return 0;
}

struct PlotDataOptions {
  std::vector<std::string> report_paths;
  std::string out_prefix = "plot";
  std::optional<double> mu_max_override;
  int curve_samples = 200;
};

/// plotdata: fit reports -> per-model CSV with 200 curve samples plus the
/// measured points, ready for external plotting.
inline int run_plotdata(const PlotDataOptions& opt, std::ostream& console, std::ostream&) {
  if (opt.report_paths.empty()) throw Error("plotdata needs at least one fit report");
  for (const auto& path : opt.report_paths) {
    const json j = load_config(path);
    const PdeModel model = model_from_json(j.at("model"));
    const double nu_l = j.at("detector").at("nu_l_hz").get<double>();
    double mu_max = opt.mu_max_override.value_or(j.at("range").at("mu_max").get<double>());
    if (!(mu_max > 0.0)) throw Error(path + ": non-positive mu_max");

    struct PlotRow {
      double mu;
      double model_p;
      std::optional<double> data_p;
      std::optional<double> sigma_p;
    };
    std::vector<PlotRow> rows;
    const int n = std::max(opt.curve_samples, 2);
    for (int i = 0; i < n; ++i) {
      const double mu = mu_max * i / (n - 1);
      rows.push_back({mu, detection_probability(model, mu), std::nullopt, std::nullopt});
    }
    for (const auto& r : j.at("residuals")) {
      const double mu = r.at("mu").get<double>();
      rows.push_back({mu, detection_probability(model, mu),
                      r.at("observed_hz").get<double>() / nu_l,
                      r.at("sigma_hz").get<double>() / nu_l});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const PlotRow& a, const PlotRow& b) { return a.mu < b.mu; });

    const std::string out_path =
        opt.out_prefix + "_" + kind_name(kind_of(model)) + ".csv";
    auto out = open_output(out_path);
    out << "mu,p_det_model,p_det_data,sigma_total\n";
    for (const auto& row : rows) {
      out << format_double(row.mu) << ',' << format_double(row.model_p) << ',';
      if (row.data_p) out << format_double(*row.data_p);
      out << ',';
      if (row.sigma_p) out << format_double(*row.sigma_p);
      out << '\n';
    }
    console << "wrote " << out_path << '\n';
  }
  return 0;
}

}  // namespace pcc::cli
