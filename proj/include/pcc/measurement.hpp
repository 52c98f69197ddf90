#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "pcc/detector.hpp"
#include "pcc/errors.hpp"

namespace pcc {

// SI defining constants
inline constexpr double kPlanckJs = 6.62607015e-34;
inline constexpr double kLightSpeedMs = 299792458.0;

/// Optical path configuration: converts the power set before the attenuator
/// into mean photons per pulse, and carries the instrument uncertainties.
struct OpticsConfig {
  double attenuation_db = 0.0;   ///< total attenuation between meter and detector
  double wavelength_m = 1550e-9;
  double delta_w_w = 200e-12;    ///< power meter standard deviation
  double delta_alpha_db = 0.1;   ///< attenuation standard deviation

  void validate() const {
    if (!(attenuation_db > 0.0)) throw ParameterOutOfRange("attenuation must be positive");
    if (!(wavelength_m > 0.0)) throw ParameterOutOfRange("wavelength must be positive");
    if (!(delta_w_w >= 0.0) || !(delta_alpha_db >= 0.0))
      throw ParameterOutOfRange("uncertainties must be non-negative");
  }
};

/// Mean photon number per pulse: mu = W 10^{-alpha/10} / (nu_l h c / lambda).
inline double power_to_mu(double power_w, const OpticsConfig& optics, double nu_l_hz) {
  const double photon_energy_j = kPlanckJs * kLightSpeedMs / optics.wavelength_m;
  return power_w * std::pow(10.0, -optics.attenuation_db / 10.0) / (nu_l_hz * photon_energy_j);
}

/// Power to set for a wanted mean photon number (inverse of power_to_mu).
inline double mu_to_power(double mu, const OpticsConfig& optics, double nu_l_hz) {
  const double photon_energy_j = kPlanckJs * kLightSpeedMs / optics.wavelength_m;
  return mu * nu_l_hz * photon_energy_j * std::pow(10.0, optics.attenuation_db / 10.0);
}

/// Repeated count-rate samples taken at one optical setting. Exactly one of
/// power_w / mu is set; mu-based points skip the optics conversion.
struct MeasurementPoint {
  std::optional<double> power_w;
  std::optional<double> mu;
  std::vector<double> samples_hz;
  std::optional<double> sigma_override_hz;  ///< replaces the sample estimate when set

  double mean_hz() const {
    if (samples_hz.empty()) throw EmptyInput("measurement point has no samples");
    return std::accumulate(samples_hz.begin(), samples_hz.end(), 0.0) /
           static_cast<double>(samples_hz.size());
  }

  /// Standard deviation of the mean, (1/sqrt(n)) * sample standard deviation.
  double sigma_mean_hz() const {
    if (sigma_override_hz) return *sigma_override_hz;
    const std::size_t n = samples_hz.size();
    if (n < 2) return 0.0;
    const double m = mean_hz();
    double ss = 0.0;
    for (double s : samples_hz) ss += (s - m) * (s - m);
    return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
};

/// A full measurement run: one dark point plus per-energy points, all taken
/// with the same detector settings.
struct MeasurementSeries {
  std::vector<MeasurementPoint> points;  ///< sorted by mu ascending
  MeasurementPoint dark;                 ///< laser off
  DetectorParams detector;
  std::optional<OpticsConfig> optics;    ///< present for power-based series
  double sigma_mu_rel = 0.02;            ///< relative sigma of mu for mu-based series

  double mu_at(std::size_t i) const {
    const MeasurementPoint& p = points.at(i);
    if (p.mu) return *p.mu;
    if (p.power_w && optics) return power_to_mu(*p.power_w, *optics, detector.nu_l_hz);
    throw Error("point has neither mu nor (power, optics)");
  }

  void sort_points() {
    std::stable_sort(points.begin(), points.end(),
                     [this](const MeasurementPoint& a, const MeasurementPoint& b) {
                       const double ma = a.mu ? *a.mu : power_to_mu(*a.power_w, *optics, detector.nu_l_hz);
                       const double mb = b.mu ? *b.mu : power_to_mu(*b.power_w, *optics, detector.nu_l_hz);
                       return ma < mb;
                     });
  }

  void validate() const {
    detector.validate();
    if (optics) optics->validate();
    if (points.empty()) throw EmptyInput("series has no points");
    if (dark.samples_hz.empty()) throw EmptyInput("series has no dark point samples");
    double prev = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].samples_hz.empty()) throw EmptyInput("point has no samples");
      if (points[i].power_w && !(*points[i].power_w > 0.0))
        throw ParameterOutOfRange("power must be positive");
      const double m = mu_at(i);
      if (m < prev) throw Error("points must be sorted by mu ascending");
      prev = m;
    }
  }
};

}  // namespace pcc
