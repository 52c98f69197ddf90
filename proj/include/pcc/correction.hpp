#pragma once

#include <cmath>
#include <string>

#include "pcc/detector.hpp"
#include "pcc/errors.hpp"

// Recovery of the true per-pulse detection probability from measured count
// rates, undoing dead-time blocking and afterpulsing (first or second order).

namespace pcc {

/// Results in [-kProbClampTol, 0) or (1, 1 + kProbClampTol] are treated as
/// floating-point cancellation and clamped; larger excursions are errors.
inline constexpr double kProbClampTol = 1e-12;

/// Below this afterpulse probability the second-order inversion switches to
/// its series expansion; the closed form is 0/0 at p_ap = 0.
inline constexpr double kApSeriesThreshold = 1e-6;

namespace detail {

template <typename ErrorT>
inline double clamp01(double p, const char* what) {
  if (p < 0.0) {
    if (p >= -kProbClampTol) return 0.0;
    throw ErrorT(std::string(what) + " is negative: " + std::to_string(p));
  }
  if (p > 1.0) {
    if (p <= 1.0 + kProbClampTol) return 1.0;
    throw ErrorT(std::string(what) + " exceeds 1: " + std::to_string(p));
  }
  return p;
}

/// First-order afterpulse map P0 -> P, no range checks.
inline double forward_first_raw(double p0, double p_ap) { return p0 / (1.0 - p_ap); }

/// Second-order afterpulse map P0 -> P, no range checks.
inline double forward_second_raw(double p0, double p_ap) {
  return p0 / (1.0 - p_ap) -
         p0 * p0 * p_ap / ((1.0 - p_ap) * (1.0 - p_ap) * (1.0 + p_ap));
}

/// Minus root of the second-order quadratic,
///   P0 = (1 - p^2)/(2p) * (1 - sqrt(1 - 4pP/(1+p))),
/// evaluated in the cancellation-free form 2P(1-p)/(1 + sqrt(1 - 4pP/(1+p))).
inline double invert_second_closed(double p, double p_ap) {
  const double x = 4.0 * p_ap * p / (1.0 + p_ap);
  if (x > 1.0)
    throw NegativeDiscriminant(
        "measured click probability " + std::to_string(p) +
        " is inconsistent with afterpulse probability " + std::to_string(p_ap));
  return 2.0 * p * (1.0 - p_ap) / (1.0 + std::sqrt(1.0 - x));
}

/// Series expansion of the minus root around p_ap = 0:
///   P0 = P - p_ap P(1-P) - 2 p_ap^2 P^2 (1-P) + O(p_ap^3).
inline double invert_second_series(double p, double p_ap) {
  return p - p_ap * p * (1.0 - p) - 2.0 * p_ap * p_ap * p * p * (1.0 - p);
}

inline void check_probability_inputs(double p, double p_ap, const char* what) {
  if (!(p_ap >= 0.0 && p_ap < 1.0))
    throw ParameterOutOfRange("afterpulse probability must lie in [0, 1)");
  if (!(p >= -kProbClampTol && p <= 1.0 + kProbClampTol))
    throw ParameterOutOfRange(std::string(what) + " must lie in [0, 1], got " + std::to_string(p));
}

}  // namespace detail

/// Click probability including afterpulses, from the afterpulse-free one.
///
/// First order counts the full recurrent afterpulse cascade; second order
/// additionally removes the quadratic overlap of cascades with other clicks.
inline double afterpulse_forward(double p0, double p_ap, ApOrder order) {
  detail::check_probability_inputs(p0, p_ap, "click probability");
  const double p = order == ApOrder::First ? detail::forward_first_raw(p0, p_ap)
                                           : detail::forward_second_raw(p0, p_ap);
  return detail::clamp01<OutOfRange>(p, "afterpulse-inflated click probability");
}

/// Inverse of afterpulse_forward. The second-order form takes the minus root
/// of the quadratic (the plus root is unphysical) and switches to a series
/// expansion below kApSeriesThreshold.
inline double afterpulse_invert(double p, double p_ap, ApOrder order) {
  detail::check_probability_inputs(p, p_ap, "click probability");
  double p0;
  if (order == ApOrder::First) {
    p0 = p * (1.0 - p_ap);
  } else if (p_ap < kApSeriesThreshold) {
    p0 = detail::invert_second_series(p, p_ap);
  } else {
    p0 = detail::invert_second_closed(p, p_ap);
  }
  return detail::clamp01<OutOfRange>(p0, "afterpulse-free click probability");
}

/// Probability of a dark click in a window tau during the light-on run.
/// The measured rate R shortens the live time; the factor (R/nu_tau)(tau/T)
/// accounts for dark counts landing in dead windows.
inline double dark_click_probability(const RawRates& raw, const DetectorParams& det,
                                     ApOrder order) {
  det.validate();
  const double nu_tau = det.nu_tau_hz();
  const double p0_dark = afterpulse_invert(raw.r_dark_hz / nu_tau, det.p_ap, order);
  const double blocking = 1.0 - (raw.r_hz / nu_tau) * (det.tau_s / det.period_s());
  return detail::clamp01<InconsistentRates>(p0_dark * blocking, "dark click probability");
}

/// Probability that a click in a window tau is caused by light,
///   P_sig = 1 - (1 - P0) / (1 - P_dc).
inline double signal_click_probability(const RawRates& raw, const DetectorParams& det,
                                       ApOrder order) {
  det.validate();
  const double nu_tau = det.nu_tau_hz();
  const double p0 = afterpulse_invert(raw.r_hz / nu_tau, det.p_ap, order);
  const double p_dc = dark_click_probability(raw, det, order);
  if (p_dc >= 1.0) throw InconsistentRates("dark click probability reached 1");
  const double p_sig = 1.0 - (1.0 - p0) / (1.0 - p_dc);
  return detail::clamp01<InconsistentRates>(p_sig, "signal click probability");
}

/// Full correction chain: measured rates to the probability that a laser
/// pulse, if one comes, is detected.
///
/// The denominator removes laser pulses blocked by dead time: every signal
/// click blocks the integer part of tau/T full periods, while off-grid
/// clicks (dark counts, afterpulses) block tau/T periods on average.
inline CorrectionBreakdown pulse_detection_probability(const RawRates& raw,
                                                       const DetectorParams& det,
                                                       ApOrder order) {
  det.validate();
  const double nu_tau = det.nu_tau_hz();
  const double tau_over_t = det.tau_s / det.period_s();

  CorrectionBreakdown b;
  b.p_measured = raw.r_hz / nu_tau;
  b.p_measured_dark = raw.r_dark_hz / nu_tau;
  b.p0 = afterpulse_invert(b.p_measured, det.p_ap, order);
  b.p0_dark = afterpulse_invert(b.p_measured_dark, det.p_ap, order);
  b.p_dc = detail::clamp01<InconsistentRates>(
      b.p0_dark * (1.0 - b.p_measured * tau_over_t), "dark click probability");
  if (b.p_dc >= 1.0) throw InconsistentRates("dark click probability reached 1");
  b.p_sig = detail::clamp01<InconsistentRates>(
      1.0 - (1.0 - b.p0) / (1.0 - b.p_dc), "signal click probability");

  const double r_sig = b.p_sig * nu_tau;
  const double blocked_fraction = tau_over_t - std::floor(tau_over_t);
  const double denom = det.nu_l_hz - raw.r_hz * tau_over_t + r_sig * blocked_fraction;
  if (!(denom > 0.0))
    throw InconsistentRates("blocked-pulse correction denominator is not positive");
  b.p0_sig = detail::clamp01<InconsistentRates>(r_sig / denom, "per-pulse detection probability");
  return b;
}

}  // namespace pcc
