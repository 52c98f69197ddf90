#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "pcc/errors.hpp"

// The three coherent-pulse detection models. Each is defined by its
// per-photon-number efficiencies eta_k: the probability that a pulse carrying
// exactly k photons produces at least one click.
//
//   Independent:  eta_k = 1 - (1 - eta)^k           photons detected independently
//   Dependent:    eta_k = 1 - prod_i (1 - rho_i eta)  the i-th photon is tried with
//                 efficiency rho_i * eta after i-1 missed photons (rho_1 = 1)
//   Empirical:    eta_k = (1 - (1 - rho eta)^k) / rho  one correlation parameter

namespace pcc {

struct IndependentModel {
  double eta = 0.0;
};

struct DependentModel {
  double eta = 0.0;
  std::vector<double> rhos;  ///< rho_2..rho_K; rho_1 == 1 implicitly, 1 beyond the list
};

struct EmpiricalModel {
  double eta = 0.0;
  double rho = 1.0;
};

using PdeModel = std::variant<IndependentModel, DependentModel, EmpiricalModel>;

enum class ModelKind { Independent, Dependent, Empirical };

inline ModelKind kind_of(const PdeModel& m) {
  if (std::holds_alternative<IndependentModel>(m)) return ModelKind::Independent;
  if (std::holds_alternative<DependentModel>(m)) return ModelKind::Dependent;
  return ModelKind::Empirical;
}

inline const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Independent: return "independent";
    case ModelKind::Dependent: return "dependent";
    default: return "empirical";
  }
}

inline double eta_of(const PdeModel& m) {
  return std::visit([](const auto& v) { return v.eta; }, m);
}

inline void validate_model(const PdeModel& m) {
  const double eta = eta_of(m);
  if (!(eta > 0.0 && eta < 1.0))
    throw ParameterOutOfRange("eta must lie strictly inside (0, 1), got " + std::to_string(eta));
  if (const auto* dep = std::get_if<DependentModel>(&m)) {
    for (double rho : dep->rhos)
      if (!(rho > 0.0)) throw ParameterOutOfRange("every rho_i must be positive");
  } else if (const auto* emp = std::get_if<EmpiricalModel>(&m)) {
    if (!(emp->rho > 0.0)) throw ParameterOutOfRange("rho must be positive");
    if (!(emp->rho * emp->eta < 1.0))
      throw ParameterOutOfRange("rho * eta must stay below 1");
  }
}

/// Number of parameters the model family fits.
inline int free_parameter_count(const PdeModel& m) {
  if (std::holds_alternative<IndependentModel>(m)) return 1;
  if (const auto* dep = std::get_if<DependentModel>(&m))
    return 1 + static_cast<int>(dep->rhos.size());
  return 2;
}

/// Poisson probability of k photons in a pulse of mean energy mu,
/// mu^k e^{-mu} / k!, evaluated in log space.
inline double poisson_pmf(double mu, int k) {
  if (k < 0) throw ParameterOutOfRange("photon number must be non-negative");
  if (mu < 0.0) throw ParameterOutOfRange("mean photon number must be non-negative");
  if (mu == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(mu) - mu - std::lgamma(static_cast<double>(k) + 1.0));
}

/// Smallest K whose Poisson tail mass beyond K stays below tail_tol.
inline int poisson_truncation(double mu, double tail_tol = 1e-12) {
  if (mu <= 0.0) return 0;
  double pmf = std::exp(-mu);
  double cdf = pmf;
  int k = 0;
  const int cap = static_cast<int>(mu + 60.0 * std::sqrt(mu + 1.0) + 200.0);
  while (1.0 - cdf >= tail_tol && k < cap) {
    ++k;
    pmf *= mu / k;
    cdf += pmf;
  }
  return k;
}

namespace detail {

inline double dependent_rho(const DependentModel& m, int k) {
  if (k <= 1) return 1.0;
  const std::size_t i = static_cast<std::size_t>(k) - 2;
  return i < m.rhos.size() ? m.rhos[i] : 1.0;
}

inline double finish_eta_k(double value) {
  if (value > 1.0) {
    // eta_k is a probability; tolerate rounding, reject real excursions
    if (value <= 1.0 + 1e-12) return 1.0;
    throw ParameterOutOfRange("eta_k exceeds 1: " + std::to_string(value));
  }
  return value;
}

}  // namespace detail

/// Probability that a pulse with exactly k photons produces a click.
inline double eta_k(const PdeModel& model, int k) {
  if (k < 1) throw ParameterOutOfRange("photon number must be at least 1");
  validate_model(model);
  if (k == 1) return eta_of(model);  // eta_1 = eta in every family
  if (const auto* ind = std::get_if<IndependentModel>(&model))
    return detail::finish_eta_k(1.0 - std::pow(1.0 - ind->eta, k));
  if (const auto* dep = std::get_if<DependentModel>(&model)) {
    double survive = 1.0;  // probability that all k photons go undetected
    for (int i = 1; i <= k; ++i) {
      const double factor = 1.0 - detail::dependent_rho(*dep, i) * dep->eta;
      if (factor <= 0.0)
        throw ParameterOutOfRange("rho_" + std::to_string(i) + " * eta reaches 1");
      survive *= factor;
    }
    return detail::finish_eta_k(1.0 - survive);
  }
  const auto& emp = std::get<EmpiricalModel>(model);
  return detail::finish_eta_k((1.0 - std::pow(1.0 - emp.rho * emp.eta, k)) / emp.rho);
}

/// Probability of detecting a coherent pulse of mean photon number mu.
/// Independent and Empirical have closed forms; Dependent sums the Poisson
/// series until the tail mass is below 1e-12.
inline double detection_probability(const PdeModel& model, double mu) {
  if (mu < 0.0) throw ParameterOutOfRange("mean photon number must be non-negative");
  validate_model(model);
  if (mu == 0.0) return 0.0;
  if (const auto* ind = std::get_if<IndependentModel>(&model))
    return 1.0 - std::exp(-ind->eta * mu);
  if (const auto* emp = std::get_if<EmpiricalModel>(&model))
    return (1.0 - std::exp(-emp->rho * emp->eta * mu)) / emp->rho;

  const auto& dep = std::get<DependentModel>(model);
  const int k_star = poisson_truncation(mu);
  double pmf = std::exp(-mu);
  double survive = 1.0;
  double sum = 0.0;
  for (int k = 1; k <= k_star; ++k) {
    pmf *= mu / k;
    const double factor = 1.0 - detail::dependent_rho(dep, k) * dep.eta;
    if (factor <= 0.0)
      throw ParameterOutOfRange("rho_" + std::to_string(k) + " * eta reaches 1");
    survive *= factor;
    sum += pmf * (1.0 - survive);
  }
  return sum;
}

/// How many per-photon efficiencies are worth fitting at pulse energy mu:
/// one more eta_k as soon as the next photon number stops being negligible.
/// Beyond mu = 2 the smallest K whose Poisson tail stays below 4.6e-3
/// continues the ladder.
inline int recommended_order(double mu) {
  if (mu <= 0.3) return 1;
  if (mu <= 0.7) return 2;
  if (mu <= 1.0) return 3;
  if (mu <= 1.3) return 4;
  if (mu <= 1.7) return 5;
  if (mu <= 2.0) return 6;
  double pmf = std::exp(-mu);
  double cdf = pmf;
  int k = 0;
  while (k < 6 || 1.0 - cdf >= 4.6e-3) {
    ++k;
    pmf *= mu / k;
    cdf += pmf;
  }
  return k;
}

}  // namespace pcc
