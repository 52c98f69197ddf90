#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pcc/correction.hpp"
#include "pcc/measurement.hpp"
#include "pcc/models.hpp"
#include "pcc/random.hpp"
#include "pcc/simplex.hpp"
#include "pcc/threading.hpp"

// Weighted chi-squared fitting of detection-probability models against
// corrected count-rate series, with uncertainty propagation on both sides:
// measurement noise through the rate correction, power-meter and attenuation
// noise through the model curve.

namespace pcc {

enum class Adequacy { Good, Marginal, Unusable };

inline const char* adequacy_name(Adequacy a) {
  switch (a) {
    case Adequacy::Good: return "good";
    case Adequacy::Marginal: return "marginal";
    default: return "unusable";
  }
}

/// Good when chi2_r <= 1, Marginal between 1 and 3, Unusable from 3 up.
inline Adequacy classify_adequacy(double chi2_reduced) {
  if (chi2_reduced <= 1.0) return Adequacy::Good;
  if (chi2_reduced < 3.0) return Adequacy::Marginal;
  return Adequacy::Unusable;
}

/// One measurement point after dead-time/afterpulse correction.
struct CorrectedPoint {
  double mu = 0.0;
  std::optional<double> power_w;
  double r_hz = 0.0;
  double sigma_r_hz = 0.0;
  double r0_sig_hz = 0.0;        ///< corrected signal rate nu_l * p0_sig
  double sigma_r0_sig_hz = 0.0;  ///< measurement noise propagated through the correction
  CorrectionBreakdown breakdown;
};

/// Everything a chi-squared evaluation needs.
struct FitInput {
  std::vector<CorrectedPoint> points;
  DetectorParams detector;
  std::optional<OpticsConfig> optics;
  double sigma_mu_rel = 0.02;
};

/// Corrects series point i and propagates sigma_R and sigma_R' through the
/// correction by central finite differences (relative step 1e-6).
inline CorrectedPoint correct_point(const MeasurementSeries& series, std::size_t i,
                                    ApOrder order) {
  const DetectorParams& det = series.detector;
  const double r_dark = series.dark.mean_hz();
  const double sigma_dark = series.dark.sigma_mean_hz();

  CorrectedPoint c;
  c.mu = series.mu_at(i);
  c.power_w = series.points[i].power_w;
  c.r_hz = series.points[i].mean_hz();
  c.sigma_r_hz = series.points[i].sigma_mean_hz();
  c.breakdown = pulse_detection_probability({c.r_hz, r_dark}, det, order);
  c.r0_sig_hz = det.nu_l_hz * c.breakdown.p0_sig;

  auto p0sig = [&](double r, double rd) {
    return pulse_detection_probability({r, rd}, det, order).p0_sig;
  };
  const double ceiling = det.nu_tau_hz() * (1.0 - 1e-9);
  const double hr = 1e-6 * std::max(std::abs(c.r_hz), 1.0);
  const double hd = 1e-6 * std::max(std::abs(r_dark), 1.0);
  const double r_hi = std::min(c.r_hz + hr, ceiling), r_lo = std::max(c.r_hz - hr, 0.0);
  const double d_hi = std::min(r_dark + hd, ceiling), d_lo = std::max(r_dark - hd, 0.0);
  const double dp_dr = (p0sig(r_hi, r_dark) - p0sig(r_lo, r_dark)) / (r_hi - r_lo);
  const double dp_dd = (p0sig(c.r_hz, d_hi) - p0sig(c.r_hz, d_lo)) / (d_hi - d_lo);
  c.sigma_r0_sig_hz =
      det.nu_l_hz * std::hypot(dp_dr * c.sigma_r_hz, dp_dd * sigma_dark);
  return c;
}

inline std::vector<CorrectedPoint> correct_series(const MeasurementSeries& series,
                                                  ApOrder order) {
  series.validate();
  std::vector<CorrectedPoint> out;
  out.reserve(series.points.size());
  for (std::size_t i = 0; i < series.points.size(); ++i)
    out.push_back(correct_point(series, i, order));
  return out;
}

/// Standard deviation of the model rate at one point from instrument
/// uncertainties. Power-based points combine the power-meter and attenuation
/// contributions in quadrature (central differences, relative step 1e-6 on W,
/// absolute step 1e-4 dB on alpha); mu-based points use the configured
/// relative sigma on mu.
inline double sigma_model_hz(const PdeModel& model, const CorrectedPoint& pt,
                             const FitInput& input) {
  const double nu_l = input.detector.nu_l_hz;
  if (pt.power_w && input.optics) {
    const OpticsConfig& optics = *input.optics;
    auto rate = [&](double w, double alpha_db) {
      OpticsConfig o = optics;
      o.attenuation_db = alpha_db;
      return nu_l * detection_probability(model, power_to_mu(w, o, nu_l));
    };
    const double w = *pt.power_w;
    const double hw = 1e-6 * w;
    const double ha = 1e-4;
    const double dw =
        (rate(w + hw, optics.attenuation_db) - rate(w - hw, optics.attenuation_db)) / (2.0 * hw);
    const double da =
        (rate(w, optics.attenuation_db + ha) - rate(w, optics.attenuation_db - ha)) / (2.0 * ha);
    return std::hypot(optics.delta_w_w * dw, optics.delta_alpha_db * da);
  }
  if (pt.mu <= 0.0) return 0.0;
  const double h = 1e-6 * pt.mu;
  const double dmu = (nu_l * detection_probability(model, pt.mu + h) -
                      nu_l * detection_probability(model, pt.mu - h)) /
                     (2.0 * h);
  return std::abs(input.sigma_mu_rel * pt.mu * dmu);
}

struct ChiSquare {
  double chi2 = 0.0;
  double chi2_reduced = 0.0;
  int dof = 0;
};

namespace detail {

/// Sum of weighted squared residuals, accumulated in a canonical point order
/// so the result does not depend on how the caller arranged the series.
inline double chi2_sum(const FitInput& input, const PdeModel& model) {
  std::vector<std::size_t> order(input.points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const CorrectedPoint &pa = input.points[a], &pb = input.points[b];
    if (pa.mu != pb.mu) return pa.mu < pb.mu;
    return pa.r0_sig_hz < pb.r0_sig_hz;
  });
  double sum = 0.0;
  for (std::size_t i : order) {
    const CorrectedPoint& pt = input.points[i];
    const double r_model = input.detector.nu_l_hz * detection_probability(model, pt.mu);
    const double sigma_p = sigma_model_hz(model, pt, input);
    const double variance = pt.sigma_r0_sig_hz * pt.sigma_r0_sig_hz + sigma_p * sigma_p;
    if (!(variance > 0.0))
      throw Error("total uncertainty is zero at mu = " + std::to_string(pt.mu));
    const double d = pt.r0_sig_hz - r_model;
    sum += d * d / variance;
  }
  return sum;
}

}  // namespace detail

inline ChiSquare chi2(const FitInput& input, const PdeModel& model) {
  ChiSquare out;
  out.dof = static_cast<int>(input.points.size()) - free_parameter_count(model);
  if (out.dof <= 0)
    throw DegenerateDof("need more points than fitted parameters, have " +
                        std::to_string(input.points.size()));
  out.chi2 = detail::chi2_sum(input, model);
  out.chi2_reduced = out.chi2 / out.dof;
  return out;
}

inline ChiSquare chi2(const MeasurementSeries& series, const PdeModel& model,
                      ApOrder order = ApOrder::Second) {
  return chi2(FitInput{correct_series(series, order), series.detector, series.optics,
                       series.sigma_mu_rel},
              model);
}

struct FitParam {
  std::string name;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool at_lower = false;
  bool at_upper = false;
};

struct FitResidual {
  double mu = 0.0;
  double observed_hz = 0.0;   ///< corrected signal rate
  double predicted_hz = 0.0;  ///< model rate
  double sigma_hz = 0.0;      ///< total sigma entering the chi-squared weight
};

struct FitResult {
  PdeModel model;
  double chi2 = 0.0;
  double chi2_reduced = 0.0;
  int dof = 0;
  Adequacy adequacy = Adequacy::Unusable;
  std::vector<FitParam> params;
  std::vector<FitResidual> residuals;
  std::vector<std::string> notes;
  int starts_converged = 0;
};

struct FitOptions {
  ApOrder order = ApOrder::Second;
  double mu_min = 0.0;
  double mu_max = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  int starts = 16;
  std::optional<double> fixed_rho;         ///< Empirical only: freeze rho
  std::optional<int> dependent_rho_count;  ///< override recommended_order(mu_max) - 1
};

namespace detail {

/// Radical-inverse (Halton) low-discrepancy sequence member in (0, 1).
inline double halton(std::uint64_t index, unsigned base) {
  double inv = 1.0 / base, fraction = inv, value = 0.0;
  while (index > 0) {
    value += fraction * static_cast<double>(index % base);
    index /= base;
    fraction *= inv;
  }
  return value == 0.0 ? 0.5 * inv : value;
}

struct ParamBox {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  double scale = 1.0;
};

inline constexpr double kEtaMargin = 1e-6;
inline constexpr double kRhoLower = 0.5;  // Dependent rho_i box
inline constexpr double kRhoUpper = 5.0;

struct FitProblem {
  ModelKind kind;
  std::vector<ParamBox> boxes;  // boxes[0] is always eta
  std::optional<double> fixed_rho;

  /// Clips theta into the feasible box; the Empirical rho ceiling tracks eta.
  std::vector<double> clip(const std::vector<double>& raw) const {
    std::vector<double> th = raw;
    for (std::size_t i = 0; i < th.size(); ++i)
      th[i] = std::clamp(th[i], boxes[i].lo, boxes[i].hi);
    if (kind == ModelKind::Empirical && !fixed_rho && th.size() > 1)
      th[1] = std::min(th[1], (1.0 - 1e-9) / th[0]);
    return th;
  }

  PdeModel build(const std::vector<double>& th) const {
    switch (kind) {
      case ModelKind::Independent:
        return IndependentModel{th[0]};
      case ModelKind::Empirical:
        return EmpiricalModel{th[0], fixed_rho ? *fixed_rho : th[1]};
      default:
        return DependentModel{th[0], std::vector<double>(th.begin() + 1, th.end())};
    }
  }
};

}  // namespace detail

/// Minimizes the weighted chi-squared over the model family's parameters.
///
/// Multi-start Nelder-Mead: one heuristic start plus quasi-random starts
/// spread over the parameter box, every start run to a scaled simplex
/// diameter below 1e-10. The best start wins; exact ties go to the
/// lexicographically smallest parameter vector, so a fixed seed gives a
/// bit-reproducible result regardless of thread count.
inline FitResult fit(const FitInput& input, ModelKind kind, const FitOptions& options = {}) {
  if (input.points.empty()) throw EmptyInput("no points to fit");
  double mu_max_eff = options.mu_max;
  if (!std::isfinite(mu_max_eff)) {
    mu_max_eff = 0.0;
    for (const auto& p : input.points) mu_max_eff = std::max(mu_max_eff, p.mu);
  }

  detail::FitProblem problem;
  problem.kind = kind;
  problem.fixed_rho = kind == ModelKind::Empirical ? options.fixed_rho : std::nullopt;
  problem.boxes.push_back({"eta", detail::kEtaMargin, 1.0 - detail::kEtaMargin, 1.0});
  if (kind == ModelKind::Empirical && !problem.fixed_rho) {
    problem.boxes.push_back({"rho", detail::kEtaMargin, detail::kRhoUpper, detail::kRhoUpper});
  } else if (kind == ModelKind::Dependent) {
    const int n_rhos =
        options.dependent_rho_count.value_or(recommended_order(mu_max_eff) - 1);
    if (n_rhos < 0) throw ParameterOutOfRange("negative dependent rho count");
    for (int i = 0; i < n_rhos; ++i)
      problem.boxes.push_back({"rho" + std::to_string(i + 2), detail::kRhoLower,
                               detail::kRhoUpper, detail::kRhoUpper - detail::kRhoLower});
  }

  const int n_params = static_cast<int>(problem.boxes.size());
  const int dof = static_cast<int>(input.points.size()) - n_params;
  if (dof <= 0)
    throw DegenerateDof("fit needs at least " + std::to_string(n_params + 1) + " points, has " +
                        std::to_string(input.points.size()));

  auto objective = [&](const std::vector<double>& raw) -> double {
    const std::vector<double> th = problem.clip(raw);
    double penalty = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) {
      const double d = (raw[i] - th[i]) / problem.boxes[i].scale;
      penalty += d * d;
    }
    double value;
    try {
      value = detail::chi2_sum(input, problem.build(th));
    } catch (const Error&) {
      value = 1e300;  // infeasible parameter combination inside the box
    }
    return value + 1e8 * penalty;
  };

  // heuristic start: eta from the lowest-mu point's slope, all rhos at 1
  std::vector<double> heuristic(n_params, 1.0);
  {
    const CorrectedPoint* lowest = &input.points.front();
    for (const auto& p : input.points)
      if (p.mu < lowest->mu) lowest = &p;
    const double eta_guess =
        lowest->mu > 0.0 ? lowest->breakdown.p0_sig / lowest->mu : 0.1;
    heuristic[0] = std::clamp(eta_guess, 0.01, 0.9);
  }

  static constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13};
  const std::uint64_t offset = 1 + options.seed % 8191;
  const int n_starts = std::max(options.starts, 1);
  std::vector<std::vector<double>> starts(static_cast<std::size_t>(n_starts));
  starts[0] = heuristic;
  for (int s = 1; s < n_starts; ++s) {
    std::vector<double> x(n_params);
    for (int d = 0; d < n_params; ++d) {
      const double u = detail::halton(offset + static_cast<std::uint64_t>(s),
                                      kPrimes[d % 6] + (d >= 6 ? 1 : 0));
      x[d] = problem.boxes[d].lo + u * (problem.boxes[d].hi - problem.boxes[d].lo);
    }
    starts[static_cast<std::size_t>(s)] = problem.clip(x);
  }

  SimplexOptions nm;
  nm.diameter_tol = 1e-10;
  for (const auto& b : problem.boxes) nm.scale.push_back(b.scale);

  std::vector<SimplexResult> runs(starts.size());
  parallel_for(starts.size(), [&](std::size_t s) { runs[s] = nelder_mead(objective, starts[s], nm); });

  int converged = 0;
  int best = -1;
  std::vector<double> best_theta;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    if (!runs[s].converged) continue;
    ++converged;
    std::vector<double> theta = problem.clip(runs[s].x);
    if (best < 0 || runs[s].value < runs[static_cast<std::size_t>(best)].value ||
        (runs[s].value == runs[static_cast<std::size_t>(best)].value &&
         std::lexicographical_compare(theta.begin(), theta.end(), best_theta.begin(),
                                      best_theta.end()))) {
      best = static_cast<int>(s);
      best_theta = theta;
    }
  }
  if (best < 0) throw NoConvergence("no optimizer start converged");

  FitResult result;
  result.model = problem.build(best_theta);
  result.starts_converged = converged;
  result.dof = dof;
  result.chi2 = detail::chi2_sum(input, result.model);
  result.chi2_reduced = result.chi2 / dof;
  result.adequacy = classify_adequacy(result.chi2_reduced);

  for (int i = 0; i < n_params; ++i) {
    const detail::ParamBox& box = problem.boxes[i];
    FitParam p;
    p.name = box.name;
    p.value = best_theta[static_cast<std::size_t>(i)];
    p.lower = box.lo;
    p.upper = box.hi;
    if (problem.kind == ModelKind::Empirical && i == 1)
      p.upper = std::min(p.upper, (1.0 - 1e-9) / best_theta[0]);
    p.at_lower = std::abs(p.value - p.lower) < 1e-9;
    p.at_upper = std::abs(p.value - p.upper) < 1e-9;
    if (p.at_lower || p.at_upper)
      result.notes.push_back("parameter " + p.name + " stopped at its box bound");
    result.params.push_back(p);
  }
  if (const auto* dep = std::get_if<DependentModel>(&result.model)) {
    bool above = false, below = false;
    for (double rho : dep->rhos) {
      above = above || rho > 1.0 + 1e-9;
      below = below || rho < 1.0 - 1e-9;
    }
    if (above && below)
      result.notes.push_back("fitted rho_i values straddle 1; treat their physical reading with care");
  }

  result.residuals.reserve(input.points.size());
  for (const auto& pt : input.points) {
    FitResidual r;
    r.mu = pt.mu;
    r.observed_hz = pt.r0_sig_hz;
    r.predicted_hz = input.detector.nu_l_hz * detection_probability(result.model, pt.mu);
    const double sigma_p = sigma_model_hz(result.model, pt, input);
    r.sigma_hz = std::hypot(pt.sigma_r0_sig_hz, sigma_p);
    result.residuals.push_back(r);
  }
  return result;
}

/// Corrects the series, keeps points with mu in [mu_min, mu_max] (small
/// relative slack on the upper edge), and fits.
inline FitResult fit(const MeasurementSeries& series, ModelKind kind,
                     const FitOptions& options = {}) {
  FitInput input{correct_series(series, options.order), series.detector, series.optics,
                 series.sigma_mu_rel};
  const double hi = options.mu_max * (1.0 + 1e-9);
  std::vector<CorrectedPoint> kept;
  for (auto& p : input.points)
    if (p.mu >= options.mu_min && p.mu <= hi) kept.push_back(std::move(p));
  input.points = std::move(kept);
  if (input.points.empty()) throw EmptyInput("no points inside the requested mu range");
  return fit(input, kind, options);
}

}  // namespace pcc
