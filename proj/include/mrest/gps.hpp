#ifndef MREST_GPS_HPP
#define MREST_GPS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "mrest/data.hpp"
#include "mrest/error.hpp"
#include "mrest/glm.hpp"

namespace mrest {

/// Generalized propensity score pi(d | x) = C(N, d) p(x)^d (1 - p(x))^(N - d)
/// where p(x) is a fitted binomial success probability.
struct GpsModel {
  PropensityFit fit;

  explicit GpsModel(PropensityFit f) : fit(std::move(f)) {
    if (fit.spec.trials < 1) throw InvalidArgument("GPS model needs at least one trial");
    if (fit.coefficients.size() != static_cast<Eigen::Index>(fit.spec.features.size()))
      throw InvalidArgument("coefficient count does not match the feature count");
    if (!fit.coefficients.allFinite()) throw InvalidArgument("non-finite GPS coefficients");
  }

  /// A model with known coefficients, e.g. the true data-generating score.
  static GpsModel fixed(PropensityModelSpec spec, Eigen::VectorXd coefficients) {
    PropensityFit f{std::move(spec), std::move(coefficients), true, 0, 0.0, {}};
    return GpsModel(std::move(f));
  }

  int trials() const { return fit.spec.trials; }
};

inline double success_prob(const GpsModel& model, const Eigen::VectorXd& x) {
  const double eta = design_row(model.fit.spec.features, x).dot(model.fit.coefficients);
  return inverse_link(model.fit.spec.link, eta);
}

inline double binomial_coefficient(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

namespace detail {

inline double binomial_pmf(int trials, int level, double p) {
  return binomial_coefficient(trials, level) * std::pow(p, level) *
         std::pow(1.0 - p, trials - level);
}

inline void check_level(const GpsModel& model, int level) {
  if (level < 0 || level > model.trials())
    throw InvalidArgument("GPS level " + std::to_string(level) + " is outside 0.." +
                          std::to_string(model.trials()));
}

}  // namespace detail

/// Probability of receiving `level`, floored at kProbabilityClamp.
inline double gps_pmf(const GpsModel& model, const Eigen::VectorXd& x, int level) {
  detail::check_level(model, level);
  return std::max(detail::binomial_pmf(model.trials(), level, success_prob(model, x)),
                  kProbabilityClamp);
}

/// pi(level | X_i) for every unit. Counts floor activations in `clamped` when given.
inline Eigen::VectorXd gps_pmf_all(const GpsModel& model, const Dataset& ds, int level,
                                   std::size_t* clamped = nullptr) {
  detail::check_level(model, level);
  const Eigen::VectorXd eta = design_matrix(model.fit.spec.features, ds) * model.fit.coefficients;
  Eigen::VectorXd out(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double raw =
        detail::binomial_pmf(model.trials(), level, inverse_link(model.fit.spec.link, eta(i)));
    if (raw < kProbabilityClamp) {
      out(i) = kProbabilityClamp;
      if (clamped) ++*clamped;
    } else {
      out(i) = raw;
    }
  }
  return out;
}

}  // namespace mrest

#endif  // MREST_GPS_HPP
