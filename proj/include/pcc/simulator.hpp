#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "pcc/correction.hpp"
#include "pcc/detector.hpp"
#include "pcc/measurement.hpp"
#include "pcc/models.hpp"
#include "pcc/random.hpp"
#include "pcc/threading.hpp"

// Event-driven Monte Carlo detector: Poisson photon numbers per pulse,
// model-governed triggering, non-paralyzable dead time, recurrent
// afterpulses, homogeneous dark counts. Serves as the ground-truth oracle
// for the rate correction and the fitting pipeline.
//
// Time is kept in integer femtoseconds so dead-time boundary comparisons are
// exact: an event at exactly dead-time expiry is live.

namespace pcc {

struct SimConfig {
  PdeModel model;          ///< ground-truth per-pulse detection via eta_k
  double mu = 0.0;         ///< mean photons per pulse
  DetectorParams detector;
  double dcr_hz = 0.0;     ///< intrinsic dark rate, before dead-time losses
  long long n_pulses = 0;
  std::uint64_t seed = 0;
};

struct SimResult {
  long long clicks_total = 0;           ///< registered clicks, light on
  double r_hz = 0.0;
  double r_dark_hz = 0.0;               ///< from the paired laser-off run
  long long true_pulse_detections = 0;  ///< pulses whose photons would trigger absent dead time
  double duration_s = 0.0;
};

namespace detail {

inline constexpr std::uint64_t kNeverFs = std::numeric_limits<std::uint64_t>::max();

inline std::uint64_t to_fs(double seconds) {
  return static_cast<std::uint64_t>(seconds * 1e15 + 0.5);
}

/// Per-photon-number trigger probabilities, precomputed over the plausible k
/// range and extended on demand.
class EtaTable {
 public:
  EtaTable(const PdeModel& model, double mu) : model_(model) {
    const int k_hi = std::max(poisson_truncation(mu, 1e-15) + 8, 1);
    table_.resize(static_cast<std::size_t>(k_hi) + 1, 0.0);
    for (int k = 1; k <= k_hi; ++k) table_[static_cast<std::size_t>(k)] = eta_k(model_, k);
  }

  double operator()(int k) const {
    if (k <= 0) return 0.0;
    if (static_cast<std::size_t>(k) < table_.size()) return table_[static_cast<std::size_t>(k)];
    return eta_k(model_, k);
  }

 private:
  PdeModel model_;
  std::vector<double> table_;
};

struct RunTallies {
  long long clicks = 0;
  long long wanted = 0;  ///< pulses that would trigger absent dead time
};

/// One detector run over n_pulses laser periods. Three independent random
/// streams keep photon outcomes identical when only p_ap or the dark rate
/// changes. Afterpulses spawn per registered click with probability p_ap and
/// fire uniformly within ap_jitter_fs after dead-time expiry; a pending
/// afterpulse is absorbed when another click registers first.
inline RunTallies run_detector(const EtaTable& eta, double mu, const DetectorParams& det,
                               double dcr_hz, long long n_pulses, std::uint64_t photon_seed,
                               std::uint64_t dark_seed, std::uint64_t ap_seed,
                               std::uint64_t ap_jitter_fs) {
  Rng photon(photon_seed);
  Rng dark(dark_seed);
  Rng ap(ap_seed);

  const std::uint64_t tau_fs = to_fs(det.tau_s);
  const std::uint64_t period_fs = to_fs(det.period_s());
  if (n_pulses < 1) throw ParameterOutOfRange("n_pulses must be at least 1");
  if (static_cast<std::uint64_t>(n_pulses) > kNeverFs / period_fs / 2)
    throw ParameterOutOfRange("simulated duration overflows the femtosecond clock");
  const std::uint64_t duration_fs = static_cast<std::uint64_t>(n_pulses) * period_fs;

  double dark_clock_s = 0.0;
  std::uint64_t t_dark = kNeverFs;
  if (dcr_hz > 0.0) {
    dark_clock_s = dark.exponential(dcr_hz);
    t_dark = to_fs(dark_clock_s);
  }
  std::uint64_t t_ap = kNeverFs;  // at most one pending afterpulse
  std::uint64_t live_from = 0;    // boundary inclusive
  long long pulse_i = 0;
  RunTallies tally;

  auto register_click = [&](std::uint64_t t) {
    ++tally.clicks;
    live_from = t + tau_fs;
    if (ap.uniform01() < det.p_ap) {
      const std::uint64_t jitter =
          ap_jitter_fs > 0
              ? static_cast<std::uint64_t>(ap.uniform01() * static_cast<double>(ap_jitter_fs))
              : 0;
      t_ap = live_from + jitter;
    } else {
      t_ap = kNeverFs;
    }
  };

  while (true) {
    const std::uint64_t t_pulse =
        pulse_i < n_pulses ? static_cast<std::uint64_t>(pulse_i) * period_fs : kNeverFs;
    std::uint64_t t;
    int kind;  // tie priority: afterpulse, then pulse, then dark
    if (t_ap <= t_pulse && t_ap <= t_dark) {
      t = t_ap;
      kind = 0;
    } else if (t_pulse <= t_dark) {
      t = t_pulse;
      kind = 1;
    } else {
      t = t_dark;
      kind = 2;
    }
    if (t >= duration_fs) break;

    switch (kind) {
      case 0:
        t_ap = kNeverFs;
        if (t >= live_from) register_click(t);
        break;
      case 1: {
        const int k = photon.poisson(mu);
        if (k > 0 && photon.uniform01() < eta(k)) {
          ++tally.wanted;
          if (t >= live_from) register_click(t);
        }
        ++pulse_i;
        break;
      }
      default:
        if (t >= live_from) register_click(t);
        dark_clock_s += dark.exponential(dcr_hz);
        t_dark = to_fs(dark_clock_s);
        break;
    }
  }
  return tally;
}

inline double run_duration_s(const DetectorParams& det, long long n_pulses) {
  return static_cast<double>(static_cast<std::uint64_t>(n_pulses) * to_fs(det.period_s())) * 1e-15;
}

/// Width of the afterpulse release window: the whole number of laser periods
/// closest to 2 tau / (1 + p_ap), at least one period. A window spanning full
/// periods keeps afterpulse positions uniform across the pulse grid, and this
/// width makes the fraction of afterpulses absorbed by intervening clicks
/// track the quadratic depletion term of the second-order afterpulse model.
inline std::uint64_t ap_release_window_fs(const DetectorParams& det) {
  const double target_s = 2.0 * det.tau_s / (1.0 + det.p_ap);
  const double periods = std::max(1.0, std::round(target_s / det.period_s()));
  return static_cast<std::uint64_t>(periods) * to_fs(det.period_s());
}

}  // namespace detail

/// Runs the light-on timeline and a paired laser-off timeline (mu = 0) on
/// decorrelated substreams of the same seed. Identical configs give
/// bit-identical results.
inline SimResult simulate(const SimConfig& cfg) {
  cfg.detector.validate();
  validate_model(cfg.model);
  if (cfg.mu < 0.0) throw ParameterOutOfRange("mu must be non-negative");
  if (cfg.dcr_hz < 0.0) throw ParameterOutOfRange("dark count rate must be non-negative");

  const detail::EtaTable eta(cfg.model, cfg.mu);
  const std::uint64_t ap_window = detail::ap_release_window_fs(cfg.detector);
  const auto light = detail::run_detector(eta, cfg.mu, cfg.detector, cfg.dcr_hz, cfg.n_pulses,
                                          substream_seed(cfg.seed, 0x11),
                                          substream_seed(cfg.seed, 0x12),
                                          substream_seed(cfg.seed, 0x13), ap_window);
  const auto dark = detail::run_detector(eta, 0.0, cfg.detector, cfg.dcr_hz, cfg.n_pulses,
                                         substream_seed(cfg.seed, 0x21),
                                         substream_seed(cfg.seed, 0x22),
                                         substream_seed(cfg.seed, 0x23), ap_window);
  SimResult out;
  out.duration_s = detail::run_duration_s(cfg.detector, cfg.n_pulses);
  out.clicks_total = light.clicks;
  out.true_pulse_detections = light.wanted;
  out.r_hz = static_cast<double>(light.clicks) / out.duration_s;
  out.r_dark_hz = static_cast<double>(dark.clicks) / out.duration_s;
  return out;
}

/// Steady-state measured rates consistent with the rate-correction algebra:
/// feeding the returned pair back through pulse_detection_probability
/// reproduces detection_probability(model, mu) to solver tolerance. This is
/// the zero-noise limit used by expectation-mode series.
inline RawRates expected_raw_rates(const PdeModel& model, double mu, const DetectorParams& det,
                                   double dcr_hz, ApOrder order) {
  det.validate();
  validate_model(model);
  const double nu_tau = det.nu_tau_hz();
  const double nu_l = det.nu_l_hz;
  const double p0_dark = dcr_hz / nu_tau;
  if (!(p0_dark < 1.0)) throw InconsistentRates("dark rate reaches the dead-time limit");
  const double r_dark = nu_tau * afterpulse_forward(p0_dark, det.p_ap, order);

  const double p_target = detection_probability(model, mu);
  const double tau_over_t = det.tau_s / det.period_s();
  const double blocked_fraction = tau_over_t - std::floor(tau_over_t);

  auto implied_measured = [&](double r) {
    const double p_dc = p0_dark * (1.0 - (r / nu_tau) * tau_over_t);
    const double r_sig = p_target * (nu_l - r * tau_over_t) / (1.0 - p_target * blocked_fraction);
    const double p0 = 1.0 - (1.0 - r_sig / nu_tau) * (1.0 - p_dc);
    return nu_tau * afterpulse_forward(p0, det.p_ap, order);
  };

  // r - implied(r) crosses zero once between 0 and the rate ceiling
  double lo = 0.0, hi = nu_tau * (1.0 - 1e-12);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    double residual;
    try {
      residual = mid - implied_measured(mid);
    } catch (const Error&) {
      residual = -1.0;  // implied probability blew up: move right
    }
    (residual < 0.0 ? lo : hi) = mid;
  }
  return {0.5 * (lo + hi), r_dark};
}

/// Monte Carlo series generator: a grid of pulse energies (mu directly, or
/// powers through the optics), repeated fixed-duration sub-runs per point,
/// plus one shared dark point. Expectation mode swaps the sampling for the
/// algebra-consistent steady-state rates (single noise-free sample each).
struct SeriesSpec {
  PdeModel model;
  DetectorParams detector;
  double dcr_hz = 0.0;
  std::vector<double> mus;
  std::vector<double> powers_w;
  std::optional<OpticsConfig> optics;
  int samples_per_point = 300;
  double sample_duration_s = 1.0;
  bool expectation_mode = false;
  ApOrder order = ApOrder::Second;  ///< expectation mode inverts the correction at this order
  std::uint64_t seed = 0;
  double sigma_mu_rel = 0.02;
};

inline MeasurementSeries generate_series(const SeriesSpec& spec) {
  spec.detector.validate();
  validate_model(spec.model);
  const bool power_based = !spec.powers_w.empty();
  if (power_based && !spec.optics) throw Error("a power grid needs an optics configuration");
  if (power_based && !spec.mus.empty()) throw Error("give either a power grid or a mu grid");
  const std::size_t n_points = power_based ? spec.powers_w.size() : spec.mus.size();
  if (n_points == 0) throw EmptyInput("empty energy grid");
  if (spec.samples_per_point < 1) throw ParameterOutOfRange("samples_per_point must be positive");

  MeasurementSeries series;
  series.detector = spec.detector;
  series.optics = spec.optics;
  series.sigma_mu_rel = spec.sigma_mu_rel;
  series.points.resize(n_points);
  series.dark.mu = 0.0;

  std::vector<double> mus(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    if (power_based) {
      series.points[i].power_w = spec.powers_w[i];
      mus[i] = power_to_mu(spec.powers_w[i], *spec.optics, spec.detector.nu_l_hz);
    } else {
      series.points[i].mu = spec.mus[i];
      mus[i] = spec.mus[i];
    }
  }

  if (spec.expectation_mode) {
    for (std::size_t i = 0; i < n_points; ++i) {
      const RawRates rates =
          expected_raw_rates(spec.model, mus[i], spec.detector, spec.dcr_hz, spec.order);
      series.points[i].samples_hz = {rates.r_hz};
      if (i == 0) series.dark.samples_hz = {rates.r_dark_hz};
    }
    series.sort_points();
    return series;
  }

  const long long n_pulses =
      static_cast<long long>(spec.sample_duration_s * spec.detector.nu_l_hz + 0.5);
  if (n_pulses < 1) throw ParameterOutOfRange("sample duration shorter than one laser period");
  const double duration_s = detail::run_duration_s(spec.detector, n_pulses);
  const std::size_t s_per_point = static_cast<std::size_t>(spec.samples_per_point);

  std::vector<detail::EtaTable> tables;
  tables.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) tables.emplace_back(spec.model, mus[i]);
  const detail::EtaTable dark_table(spec.model, 0.0);

  for (auto& p : series.points) p.samples_hz.resize(s_per_point);
  series.dark.samples_hz.resize(s_per_point);

  const std::uint64_t ap_window = detail::ap_release_window_fs(spec.detector);
  const std::size_t n_jobs = n_points * s_per_point + s_per_point;
  parallel_for(n_jobs, [&](std::size_t job) {
    const bool is_dark = job >= n_points * s_per_point;
    const std::size_t i = is_dark ? n_points : job / s_per_point;
    const std::size_t j = is_dark ? job - n_points * s_per_point : job % s_per_point;
    const std::uint64_t base = substream_seed(
        spec.seed, (static_cast<std::uint64_t>(i + 1) << 32) | static_cast<std::uint64_t>(j + 1));
    const auto tally = detail::run_detector(
        is_dark ? dark_table : tables[i], is_dark ? 0.0 : mus[i], spec.detector, spec.dcr_hz,
        n_pulses, substream_seed(base, 1), substream_seed(base, 2), substream_seed(base, 3),
        ap_window);
    const double rate = static_cast<double>(tally.clicks) / duration_s;
    if (is_dark)
      series.dark.samples_hz[j] = rate;
    else
      series.points[i].samples_hz[j] = rate;
  });

  series.sort_points();
  return series;
}

}  // namespace pcc
