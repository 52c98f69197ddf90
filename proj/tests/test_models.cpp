#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pcc/models.hpp"
#include "pcc/random.hpp"

using namespace pcc;

TEST_CASE("poisson_pmf basics") {
  CHECK(poisson_pmf(0.0, 0) == 1.0);
  CHECK(poisson_pmf(0.0, 3) == 0.0);
  CHECK_THAT(poisson_pmf(1.0, 1), Catch::Matchers::WithinAbs(std::exp(-1.0), 1e-15));
  CHECK_THAT(poisson_pmf(2.0, 6), Catch::Matchers::WithinAbs(64.0 * std::exp(-2.0) / 720.0, 1e-15));
  // normalization over the truncation range
  for (const double mu : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    double sum = 0.0;
    for (int k = 0; k <= poisson_truncation(mu); ++k) sum += poisson_pmf(mu, k);
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("eta_k reproduces the tabulated model values") {
  // tabulated values are rounded to three decimals
  const PdeModel ind = IndependentModel{0.256};
  CHECK_THAT(eta_k(ind, 2), Catch::Matchers::WithinAbs(0.446, 2e-3));
  CHECK_THAT(eta_k(ind, 3), Catch::Matchers::WithinAbs(0.588, 2e-3));

  const PdeModel dep = DependentModel{0.251, {1.157, 1.884}};
  CHECK_THAT(eta_k(dep, 2), Catch::Matchers::WithinAbs(0.469, 2e-3));
  CHECK_THAT(eta_k(dep, 3), Catch::Matchers::WithinAbs(0.721, 2e-3));

  const PdeModel emp = EmpiricalModel{0.259, 1.117};
  CHECK_THAT(eta_k(emp, 2), Catch::Matchers::WithinAbs(0.443, 2e-3));

  for (const PdeModel& m : {ind, dep, emp})
    CHECK(eta_k(m, 1) == eta_of(m));
}

TEST_CASE("eta_k against the expanded dependent polynomial") {
  // eta_2 = eta (1 + rho2) - rho2 eta^2
  // eta_3 = eta (1 + rho2 + rho3) - eta^2 (rho2 + rho2 rho3 + rho3) + rho2 rho3 eta^3
  const double eta = 0.21, r2 = 1.3, r3 = 0.8;
  const PdeModel dep = DependentModel{eta, {r2, r3}};
  CHECK_THAT(eta_k(dep, 2),
             Catch::Matchers::WithinAbs(eta * (1.0 + r2) - r2 * eta * eta, 1e-15));
  CHECK_THAT(eta_k(dep, 3),
             Catch::Matchers::WithinAbs(eta * (1.0 + r2 + r3) - eta * eta * (r2 + r2 * r3 + r3) +
                                            r2 * r3 * eta * eta * eta,
                                        1e-15));
}

TEST_CASE("eta_k is strictly increasing in k") {
  // parameter ranges keep the survival factors above double rounding noise,
  // so the mathematically strict increase stays visible at k = 20
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double eta = 0.02 + 0.7 * rng.uniform01();
    const PdeModel models[] = {
        PdeModel(IndependentModel{eta}),
        PdeModel(DependentModel{eta, {0.7, 1.35, 0.9}}),
        PdeModel(EmpiricalModel{eta, std::min(2.5, 0.8 / eta)}),
    };
    for (const PdeModel& m : models) {
      double previous = 0.0;
      for (int k = 1; k <= 20; ++k) {
        const double value = eta_k(m, k);
        CHECK(value > previous);
        CHECK(value <= 1.0);
        previous = value;
      }
    }
  }
}

TEST_CASE("eta_k rejects rho_i eta reaching 1") {
  const PdeModel dep = DependentModel{0.5, {2.0}};
  CHECK_THROWS_AS(eta_k(dep, 2), ParameterOutOfRange);
  CHECK_THROWS_AS(validate_model(PdeModel(EmpiricalModel{0.5, 2.5})), ParameterOutOfRange);
  CHECK_THROWS_AS(validate_model(PdeModel(IndependentModel{1.0})), ParameterOutOfRange);
  CHECK_THROWS_AS(validate_model(PdeModel(DependentModel{0.2, {-1.0}})), ParameterOutOfRange);
}

TEST_CASE("detection_probability closed forms and series agree") {
  CHECK(detection_probability(IndependentModel{0.256}, 0.0) == 0.0);
  CHECK(detection_probability(DependentModel{0.2, {1.1}}, 0.0) == 0.0);
  CHECK(detection_probability(EmpiricalModel{0.2, 1.5}, 0.0) == 0.0);

  const PdeModel ind = IndependentModel{0.256};
  CHECK_THAT(detection_probability(ind, 1.0),
             Catch::Matchers::WithinAbs(1.0 - std::exp(-0.256), 1e-15));

  // closed form versus explicit sum over pmf * eta_k
  for (const double mu : {0.1, 0.7, 1.0, 2.0}) {
    double sum = 0.0;
    for (int k = 1; k <= poisson_truncation(mu); ++k) sum += poisson_pmf(mu, k) * eta_k(ind, k);
    CHECK_THAT(detection_probability(ind, mu), Catch::Matchers::WithinAbs(sum, 1e-12));

    const PdeModel emp = EmpiricalModel{0.2, 2.7};
    double emp_sum = 0.0;
    for (int k = 1; k <= poisson_truncation(mu); ++k) emp_sum += poisson_pmf(mu, k) * eta_k(emp, k);
    CHECK_THAT(detection_probability(emp, mu), Catch::Matchers::WithinAbs(emp_sum, 1e-12));
  }

  // empirical with rho -> 1 reduces to independent
  CHECK_THAT(detection_probability(EmpiricalModel{0.2, 1.0}, 0.7),
             Catch::Matchers::WithinAbs(1.0 - std::exp(-0.14), 1e-15));
}

TEST_CASE("model limit identities") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const double eta = 0.03 + 0.8 * rng.uniform01();
    const PdeModel ind = IndependentModel{eta};
    const PdeModel dep = DependentModel{eta, {1.0, 1.0, 1.0, 1.0}};
    const PdeModel emp = EmpiricalModel{eta, 1.0};
    for (int k = 1; k <= 20; ++k) {
      CHECK_THAT(eta_k(dep, k), Catch::Matchers::WithinAbs(eta_k(ind, k), 1e-15));
      CHECK_THAT(eta_k(emp, k), Catch::Matchers::WithinAbs(eta_k(ind, k), 1e-15));
    }
    for (double mu = 0.25; mu <= 5.0; mu += 0.25) {
      CHECK_THAT(detection_probability(dep, mu),
                 Catch::Matchers::WithinAbs(detection_probability(ind, mu), 1e-12));
      CHECK_THAT(detection_probability(emp, mu),
                 Catch::Matchers::WithinAbs(detection_probability(ind, mu), 1e-15));
    }
  }
}

TEST_CASE("slope at zero energy equals eta") {
  const double h = 1e-6;
  const PdeModel models[] = {
      PdeModel(IndependentModel{0.256}),
      PdeModel(DependentModel{0.164, {0.5, 0.589, 0.828}}),
      PdeModel(EmpiricalModel{0.164, 2.717}),
  };
  for (const PdeModel& m : models) {
    const double slope = detection_probability(m, h) / h;
    CHECK_THAT(slope, Catch::Matchers::WithinAbs(eta_of(m), 1e-6));
  }
}

TEST_CASE("detection_probability is increasing and bounded") {
  const PdeModel models[] = {
      PdeModel(IndependentModel{0.3}),
      PdeModel(DependentModel{0.15, {0.6, 1.2}}),
      PdeModel(EmpiricalModel{0.152, 2.897}),
  };
  for (const PdeModel& m : models) {
    double bound = 1.0;
    if (const auto* emp = std::get_if<EmpiricalModel>(&m))
      bound = std::min(1.0, 1.0 / emp->rho);
    double previous = 0.0;
    for (double mu = 0.1; mu <= 20.0; mu *= 1.4) {
      const double p = detection_probability(m, mu);
      CHECK(p > previous);
      CHECK(p <= bound + 1e-12);
      previous = p;
    }
  }
  // empirical plateau at 1/rho
  CHECK_THAT(detection_probability(EmpiricalModel{0.152, 2.897}, 50.0),
             Catch::Matchers::WithinAbs(1.0 / 2.897, 1e-6));
}

TEST_CASE("dependent truncation is sound") {
  const PdeModel dep = DependentModel{0.164, {0.5, 0.589, 0.828, 0.949, 0.989}};
  for (const double mu : {0.3, 1.0, 2.0, 5.0}) {
    const int k_star = poisson_truncation(mu);
    double truncated = 0.0, extended = 0.0;
    for (int k = 1; k <= k_star; ++k) truncated += poisson_pmf(mu, k) * eta_k(dep, k);
    for (int k = 1; k <= k_star + 10; ++k) extended += poisson_pmf(mu, k) * eta_k(dep, k);
    CHECK_THAT(truncated, Catch::Matchers::WithinAbs(extended, 1e-12));
    CHECK_THAT(detection_probability(dep, mu), Catch::Matchers::WithinAbs(extended, 1e-12));
  }
}

TEST_CASE("recommended_order ladder") {
  CHECK(recommended_order(0.1) == 1);
  CHECK(recommended_order(0.5) == 2);
  CHECK(recommended_order(1.0) == 3);
  CHECK(recommended_order(1.5) == 5);
  CHECK(recommended_order(2.0) == 6);
  CHECK(recommended_order(0.0) == 1);
  // rises monotonically past the tabulated range
  int previous = 6;
  for (double mu = 2.0; mu <= 10.0; mu += 0.5) {
    const int k = recommended_order(mu);
    CHECK(k >= previous);
    previous = k;
  }
}
