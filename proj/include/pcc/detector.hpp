#pragma once

#include <string>
#include <vector>

#include "pcc/errors.hpp"

namespace pcc {

/// Afterpulse correction order. Second is the default everywhere; First is
/// adequate only for small afterpulse probabilities (below roughly 2%) and is
/// kept for comparison.
enum class ApOrder { First, Second };

/// Fixed operating parameters of a non-paralyzable single-photon detector.
/// Clicks during dead time do not extend it.
struct DetectorParams {
  double tau_s = 0.0;    ///< dead time after a registered click, seconds
  double p_ap = 0.0;     ///< afterpulse probability per registered click
  double nu_l_hz = 0.0;  ///< laser repetition rate, Hz

  /// Limit count rate 1/tau; a non-paralyzable detector cannot click faster.
  double nu_tau_hz() const { return 1.0 / tau_s; }

  /// Laser period 1/nu_l.
  double period_s() const { return 1.0 / nu_l_hz; }

  void validate() const {
    if (!(tau_s > 0.0)) throw ParameterOutOfRange("dead time must be positive");
    if (!(nu_l_hz > 0.0)) throw ParameterOutOfRange("laser repetition rate must be positive");
    if (!(p_ap >= 0.0 && p_ap < 1.0))
      throw ParameterOutOfRange("afterpulse probability must lie in [0, 1)");
  }
};

/// Mean click rates measured with the laser on and off.
struct RawRates {
  double r_hz = 0.0;
  double r_dark_hz = 0.0;
};

/// Rejects rates no non-paralyzable detector can produce. Suspicious but
/// tolerable inputs (noise can push r_dark above r) come back as warnings.
inline std::vector<std::string> validate_rates(const RawRates& raw, const DetectorParams& det) {
  det.validate();
  if (!(raw.r_hz >= 0.0) || !(raw.r_dark_hz >= 0.0))
    throw InconsistentRates("count rates must be non-negative");
  if (raw.r_hz >= det.nu_tau_hz() || raw.r_dark_hz >= det.nu_tau_hz())
    throw InconsistentRates("count rate reaches the dead-time limit 1/tau");
  std::vector<std::string> warnings;
  if (raw.r_dark_hz > raw.r_hz)
    warnings.push_back("dark count rate exceeds the light-on count rate");
  return warnings;
}

/// Every intermediate probability of the rate correction, kept for reporting.
struct CorrectionBreakdown {
  double p_measured = 0.0;       ///< P  = R / nu_tau
  double p_measured_dark = 0.0;  ///< P' = R' / nu_tau
  double p0 = 0.0;               ///< afterpulse-free click probability, light on
  double p0_dark = 0.0;          ///< afterpulse-free click probability, light off
  double p_dc = 0.0;             ///< dark-click probability in a window tau
  double p_sig = 0.0;            ///< signal-click probability in a window tau
  double p0_sig = 0.0;           ///< per-pulse detection probability
};

}  // namespace pcc
