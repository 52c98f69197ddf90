#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pcc/correction.hpp"

using namespace pcc;

namespace {

// Independent oracle for the second-order inversion: bisect the smaller root
// of  c2 x^2 - c1 x + p = 0  instead of using the closed form.
long double invert_second_oracle(long double p, long double p_ap) {
  const long double c2 = p_ap / ((1.0L - p_ap) * (1.0L - p_ap) * (1.0L + p_ap));
  const long double c1 = 1.0L / (1.0L - p_ap);
  auto q = [&](long double x) { return c2 * x * x - c1 * x + p; };
  long double lo = 0.0L, hi = c1 / (2.0L * c2);  // vertex bounds the smaller root
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (q(mid) > 0.0L ? lo : hi) = mid;
  }
  return 0.5L * (lo + hi);
}

// Layered oracle for the breakdown quantities, composed from the same
// formulas but evaluated independently in long double.
struct BreakdownOracle {
  long double p_dc, p_sig, p0_sig;
};

BreakdownOracle breakdown_oracle(double r, double r_dark, const DetectorParams& det,
                                 bool second) {
  const long double nu_tau = 1.0L / static_cast<long double>(det.tau_s);
  const long double tau_over_t = static_cast<long double>(det.tau_s) * det.nu_l_hz;
  auto invert = [&](long double p) {
    return second ? invert_second_oracle(p, det.p_ap)
                  : p * (1.0L - static_cast<long double>(det.p_ap));
  };
  BreakdownOracle o;
  const long double p0 = invert(r / nu_tau);
  const long double p0_dark = invert(r_dark / nu_tau);
  o.p_dc = p0_dark * (1.0L - (r / nu_tau) * tau_over_t);
  o.p_sig = 1.0L - (1.0L - p0) / (1.0L - o.p_dc);
  const long double r_sig = o.p_sig * nu_tau;
  const long double frac = tau_over_t - std::floor(tau_over_t);
  o.p0_sig = r_sig / (det.nu_l_hz - r * tau_over_t + r_sig * frac);
  return o;
}

}  // namespace

TEST_CASE("afterpulse_forward matches hand values") {
  CHECK(afterpulse_forward(0.0, 0.1, ApOrder::Second) == 0.0);
  CHECK(afterpulse_forward(0.3, 0.0, ApOrder::Second) == 0.3);
  // 0.3/0.9 - 0.09*0.1/(0.81*1.1) = 32/99
  CHECK_THAT(afterpulse_forward(0.3, 0.1, ApOrder::Second),
             Catch::Matchers::WithinAbs(32.0 / 99.0, 1e-15));
  CHECK_THAT(afterpulse_forward(0.3, 0.1, ApOrder::First),
             Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
}

TEST_CASE("afterpulse_forward rejects unphysical results") {
  CHECK_THROWS_AS(afterpulse_forward(0.9, 0.3, ApOrder::First), OutOfRange);
  CHECK_THROWS_AS(afterpulse_forward(1.2, 0.1, ApOrder::Second), ParameterOutOfRange);
  CHECK_THROWS_AS(afterpulse_forward(0.3, 1.0, ApOrder::Second), ParameterOutOfRange);
}

TEST_CASE("afterpulse_invert matches hand values and the quadratic oracle") {
  CHECK_THAT(afterpulse_invert(0.44, 0.2, ApOrder::First), Catch::Matchers::WithinAbs(0.352, 1e-15));
  CHECK(afterpulse_invert(0.5, 0.0, ApOrder::Second) == 0.5);

  const double p = afterpulse_forward(0.3, 0.1, ApOrder::Second);
  CHECK_THAT(afterpulse_invert(p, 0.1, ApOrder::Second), Catch::Matchers::WithinAbs(0.3, 1e-14));
  CHECK_THAT(afterpulse_invert(p, 0.1, ApOrder::Second),
             Catch::Matchers::WithinAbs(static_cast<double>(invert_second_oracle(p, 0.1)), 1e-14));
}

TEST_CASE("afterpulse_invert flags a negative discriminant") {
  // 4 p_ap P / (1 + p_ap) > 1
  CHECK_THROWS_AS(afterpulse_invert(0.99, 0.4, ApOrder::Second), NegativeDiscriminant);
}

TEST_CASE("round trip invert(forward(p0)) over the working grid") {
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      const double p0 = 0.9 * i / 49.0;
      const double p_ap = 0.3 * j / 49.0;
      for (const ApOrder order : {ApOrder::First, ApOrder::Second}) {
        double p;
        try {
          p = afterpulse_forward(p0, p_ap, order);
        } catch (const OutOfRange&) {
          continue;  // physically inconsistent corner of the grid
        }
        CHECK_THAT(afterpulse_invert(p, p_ap, order), Catch::Matchers::WithinAbs(p0, 1e-12));
      }
    }
  }
}

TEST_CASE("order difference identity") {
  // forward(Second) - forward(First) = -p0^2 p_ap / ((1-p_ap)^2 (1+p_ap))
  for (int i = 0; i < 50; ++i) {
    for (int j = 1; j < 50; ++j) {
      const double p0 = 0.9 * i / 49.0;
      const double p_ap = 0.3 * j / 49.0;
      const double expected = -p0 * p0 * p_ap / ((1.0 - p_ap) * (1.0 - p_ap) * (1.0 + p_ap));
      const double diff = detail::forward_second_raw(p0, p_ap) - detail::forward_first_raw(p0, p_ap);
      CHECK_THAT(diff, Catch::Matchers::WithinAbs(expected, 1e-15));
    }
  }
}

TEST_CASE("series and closed-form branches agree at the switch point") {
  for (double p = 0.0; p <= 1.0; p += 0.05) {
    const double series = detail::invert_second_series(p, kApSeriesThreshold);
    const double closed = detail::invert_second_closed(p, kApSeriesThreshold);
    CHECK_THAT(series, Catch::Matchers::WithinAbs(closed, 1e-10));
  }
}

TEST_CASE("dark_click_probability hand values") {
  CHECK(dark_click_probability({5e4, 0.0}, {5e-6, 0.1, 1e5}, ApOrder::Second) == 0.0);

  // no blocking, no afterpulsing: P_dc = R' tau
  const DetectorParams plain{5e-6, 0.0, 1e5};
  CHECK_THAT(dark_click_probability({0.0, 100.0}, plain, ApOrder::Second),
             Catch::Matchers::WithinAbs(5.0e-4, 1e-18));

  const DetectorParams det{5e-6, 0.1, 1e5};
  const RawRates raw{5e4, 1e3};
  const auto oracle = breakdown_oracle(raw.r_hz, raw.r_dark_hz, det, true);
  CHECK_THAT(dark_click_probability(raw, det, ApOrder::Second),
             Catch::Matchers::WithinAbs(static_cast<double>(oracle.p_dc), 1e-14));
}

TEST_CASE("signal_click_probability hand values and oracle") {
  // laser adds nothing: signal probability collapses to the blocking residue
  const DetectorParams det_small{1e-6, 0.0, 1e5};
  CHECK(signal_click_probability({0.0, 0.0}, det_small, ApOrder::Second) == 0.0);
  CHECK(signal_click_probability({100.0, 100.0}, det_small, ApOrder::Second) < 1e-7);

  // p_ap = 0 and no dark counts: P_sig = R / nu_tau
  const DetectorParams plain{5e-6, 0.0, 1e5};
  CHECK_THAT(signal_click_probability({1.4e4, 0.0}, plain, ApOrder::Second),
             Catch::Matchers::WithinAbs(1.4e4 * 5e-6, 1e-15));

  const DetectorParams spd{5.4e-6, 0.006, 1e5};
  const RawRates raw{1.4e4, 600.0};
  const auto oracle = breakdown_oracle(raw.r_hz, raw.r_dark_hz, spd, true);
  CHECK_THAT(signal_click_probability(raw, spd, ApOrder::Second),
             Catch::Matchers::WithinAbs(static_cast<double>(oracle.p_sig), 1e-14));
}

TEST_CASE("pulse_detection_probability trivia and consistency") {
  const DetectorParams det{5.4e-6, 0.006, 1e5};
  const auto zero = pulse_detection_probability({0.0, 0.0}, det, ApOrder::Second);
  CHECK(zero.p0_sig == 0.0);

  // every pulse clicks, tau < T, no noise: the correction returns exactly 1
  const DetectorParams ideal{5e-6, 0.0, 1e5};
  const auto saturated = pulse_detection_probability({1e5, 0.0}, ideal, ApOrder::Second);
  CHECK_THAT(saturated.p0_sig, Catch::Matchers::WithinAbs(1.0, 1e-12));

  const RawRates raw{1.4e4, 600.0};
  const auto b = pulse_detection_probability(raw, det, ApOrder::Second);
  CHECK(b.p_sig == signal_click_probability(raw, det, ApOrder::Second));
  CHECK(b.p_dc == dark_click_probability(raw, det, ApOrder::Second));
  const auto oracle = breakdown_oracle(raw.r_hz, raw.r_dark_hz, det, true);
  CHECK_THAT(b.p0_sig, Catch::Matchers::WithinAbs(static_cast<double>(oracle.p0_sig), 1e-14));

  // every breakdown field is a probability
  for (const double field : {b.p_measured, b.p_measured_dark, b.p0, b.p0_dark, b.p_dc, b.p_sig, b.p0_sig}) {
    CHECK(field >= 0.0);
    CHECK(field <= 1.0);
  }
  CHECK(b.p0 <= b.p_measured);  // afterpulses only add clicks
}

TEST_CASE("pulse_detection_probability handles tau > T") {
  const DetectorParams idq{14.6e-6, 0.117, 1e5};
  const RawRates raw{2.0e4, 600.0};
  const auto b = pulse_detection_probability(raw, idq, ApOrder::Second);
  const auto oracle = breakdown_oracle(raw.r_hz, raw.r_dark_hz, idq, true);
  CHECK_THAT(b.p0_sig, Catch::Matchers::WithinAbs(static_cast<double>(oracle.p0_sig), 1e-13));
  // unblocking recovers more signal than was registered
  CHECK(b.p0_sig * idq.nu_l_hz > b.p_sig * idq.nu_tau_hz());
}

TEST_CASE("monotonic in the light-on rate") {
  const DetectorParams det{5.4e-6, 0.032, 1e5};
  double previous = -1.0;
  for (double r = 400.0; r <= 6e4; r += 1.5e3) {
    const double p = pulse_detection_probability({r, 400.0}, det, ApOrder::Second).p0_sig;
    CHECK(p >= previous);
    previous = p;
  }
}

TEST_CASE("validate_rates warns but does not reject noisy dark excess") {
  const DetectorParams det{5e-6, 0.0, 1e5};
  CHECK(validate_rates({100.0, 120.0}, det).size() == 1);
  CHECK(validate_rates({120.0, 100.0}, det).empty());
  CHECK_THROWS_AS(validate_rates({2.1e5, 0.0}, det), InconsistentRates);
  CHECK_THROWS_AS(validate_rates({-1.0, 0.0}, det), InconsistentRates);
}
