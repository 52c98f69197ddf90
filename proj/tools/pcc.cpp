// pcc - photon counting calibration tool.
//
// Subcommands: correct, fit, simulate, tables, plotdata. See README.md for
// file formats and examples.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pcc/cli.hpp"

namespace {

struct DetectorFlags {
  double tau_s = 0.0;
  double p_ap = 0.0;
  double nu_l_hz = 0.0;

  void attach(CLI::App* cmd, bool require_dead_time) {
    auto* tau = cmd->add_option("--tau", tau_s, "Dead time, seconds");
    auto* pap = cmd->add_option("--pap", p_ap, "Afterpulse probability per click");
    cmd->add_option("--nul", nu_l_hz, "Laser repetition rate, Hz")->required();
    if (require_dead_time) {
      tau->required();
      pap->required();
    }
  }

  pcc::DetectorParams params() const { return {tau_s, p_ap, nu_l_hz}; }
};

struct OpticsFlags {
  double attenuation_db = 0.0;
  double wavelength_nm = 1550.0;
  double delta_w_w = 200e-12;
  double delta_alpha_db = 0.1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--atten-db", attenuation_db, "Attenuation between power meter and detector, dB");
    cmd->add_option("--wavelength-nm", wavelength_nm, "Laser wavelength, nm");
    cmd->add_option("--delta-w", delta_w_w, "Power meter standard deviation, W");
    cmd->add_option("--delta-alpha", delta_alpha_db, "Attenuation standard deviation, dB");
  }

  std::optional<pcc::OpticsConfig> config() const {
    if (attenuation_db <= 0.0) return std::nullopt;
    return pcc::OpticsConfig{attenuation_db, wavelength_nm * 1e-9, delta_w_w, delta_alpha_db};
  }
};

pcc::ApOrder order_flag(int order) { return pcc::order_from_int(order); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"photon counting calibration: detector rate correction, model fitting and simulation"};
  app.require_subcommand(1);

  // correct
  auto* correct = app.add_subcommand("correct", "Correct a raw count-rate series for dead time and afterpulsing");
  pcc::cli::CorrectOptions correct_opt;
  DetectorFlags correct_det;
  OpticsFlags correct_optics;
  int correct_order = 2;
  correct->add_option("input", correct_opt.input_path, "Raw series CSV")->required();
  correct->add_option("--dark", correct_opt.dark_path, "Dark run CSV (one row)")->required();
  correct->add_option("--out", correct_opt.out_path, "Corrected CSV path (default: stdout)");
  correct->add_option("--order", correct_order, "Afterpulse model order (1 or 2)")
      ->check(CLI::IsMember({1, 2}));
  correct->add_flag("--verbose", correct_opt.verbose, "Print the full correction breakdown per point");
  correct->add_option("--sigma-mu", correct_opt.sigma_mu_rel, "Relative sigma of mu for mu-based input");
  correct_det.attach(correct, true);
  correct_optics.attach(correct);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a detection-probability model to a series");
  pcc::cli::FitCliOptions fit_opt;
  DetectorFlags fit_det;
  OpticsFlags fit_optics;
  int fit_order = 2;
  std::string fit_model = "independent";
  std::string fit_range = "mu2";
  fit->add_option("input", fit_opt.input_path, "Raw or corrected series CSV")->required();
  fit->add_option("--dark", fit_opt.dark_path, "Dark run CSV (raw input only)");
  fit->add_option("--out", fit_opt.out_path, "Fit report JSON path");
  fit->add_option("--model", fit_model, "Model family: independent, dependent or empirical")
      ->check(CLI::IsMember({"independent", "dependent", "empirical"}));
  fit->add_option("--range", fit_range, "mu range: mu1, mu2 or custom:<lo>:<hi>");
  fit->add_option("--order", fit_order, "Afterpulse model order (1 or 2)")->check(CLI::IsMember({1, 2}));
  fit->add_option("--seed", fit_opt.seed, "Seed for the optimizer starts");
  fit->add_option("--params", fit_opt.params_path, "Model JSON to evaluate instead of fitting");
  fit->add_flag("--no-fit", fit_opt.no_fit, "Evaluate --params without optimizing");
  fit->add_option("--sigma-mu", fit_opt.sigma_mu_rel, "Relative sigma of mu for mu-based input");
  fit_det.attach(fit, false);
  fit_optics.attach(fit);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic series from a detector config");
  pcc::cli::SimulateOptions sim_opt;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  simulate->add_option("config", sim_opt.config_path, "Simulation config (JSON or TOML)")->required();
  simulate->add_option("--out", sim_opt.out_path, "Series CSV path")->required();
  simulate->add_option("--dark", sim_opt.dark_out_path, "Dark run CSV path (default: <out>.dark.csv)");
  simulate->add_option("--seed", sim_seed, "Override the config seed")
      ->each([&](const std::string&) { sim_seed_set = true; });

  // tables
  auto* tables = app.add_subcommand("tables", "Per-photon-number efficiency table for saved models");
  pcc::cli::TablesOptions tables_opt;
  tables->add_option("inputs", tables_opt.inputs, "Model or fit-report JSONs")->required();
  tables->add_option("--out", tables_opt.out_path, "Write the table as CSV");
  tables->add_option("--kmax", tables_opt.k_max, "Largest photon number")->check(CLI::PositiveNumber);

  // plotdata
  auto* plotdata = app.add_subcommand("plotdata", "Model curves plus data points for external plotting");
  pcc::cli::PlotDataOptions plot_opt;
  double plot_mu_max = 0.0;
  plotdata->add_option("reports", plot_opt.report_paths, "Fit report JSONs")->required();
  plotdata->add_option("--out", plot_opt.out_prefix, "Output file prefix");
  plotdata->add_option("--mu-max", plot_mu_max, "Extend the curves to this mu");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*correct) {
      correct_opt.detector = correct_det.params();
      correct_opt.optics = correct_optics.config();
      correct_opt.order = order_flag(correct_order);
      return pcc::cli::run_correct(correct_opt, std::cout, std::cerr);
    }
    if (*fit) {
      fit_opt.detector = fit_det.params();
      fit_opt.optics = fit_optics.config();
      fit_opt.order = order_flag(fit_order);
      fit_opt.kind = pcc::model_kind_from_name(fit_model);
      fit_opt.range = pcc::cli::parse_range(fit_range);
      return pcc::cli::run_fit(fit_opt, std::cout, std::cerr);
    }
    if (*simulate) {
      if (sim_seed_set) sim_opt.seed_override = sim_seed;
      return pcc::cli::run_simulate(sim_opt, std::cout, std::cerr);
    }
    if (*tables) return pcc::cli::run_tables(tables_opt, std::cout, std::cerr);
    if (*plotdata) {
      if (plot_mu_max > 0.0) plot_opt.mu_max_override = plot_mu_max;
      return pcc::cli::run_plotdata(plot_opt, std::cout, std::cerr);
    }
  } catch (const pcc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
