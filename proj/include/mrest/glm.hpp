#ifndef MREST_GLM_HPP
#define MREST_GLM_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrest/data.hpp"
#include "mrest/error.hpp"

namespace mrest {

/// Floor and ceiling applied to every probability produced by a link inverse.
inline constexpr double kProbabilityClamp = 1e-12;

/// One basis function of a postulated model. Covariate indices are 1-based so
/// that `covariate == 1` refers to the CSV column `x1`.
struct FeatureTerm {
  enum class Kind { Intercept, CovariatePower, CovariateExp, TreatmentPower };

  Kind kind = Kind::Intercept;
  int covariate = 0;
  int exponent = 1;

  static FeatureTerm intercept() { return {Kind::Intercept, 0, 1}; }
  static FeatureTerm covariate_power(int j, int k) { return {Kind::CovariatePower, j, k}; }
  static FeatureTerm covariate_exp(int j) { return {Kind::CovariateExp, j, 1}; }
  static FeatureTerm treatment_power(int k) { return {Kind::TreatmentPower, 0, k}; }

  friend bool operator==(const FeatureTerm&, const FeatureTerm&) = default;
};

using FeatureList = std::vector<FeatureTerm>;

inline bool uses_treatment(const FeatureList& features) {
  return std::any_of(features.begin(), features.end(), [](const FeatureTerm& t) {
    return t.kind == FeatureTerm::Kind::TreatmentPower;
  });
}

/// Throws InvalidArgument unless every term is well formed for `p` covariates.
inline void validate_features(const FeatureList& features, Eigen::Index p, bool allow_treatment) {
  if (features.empty()) throw InvalidArgument("model has no feature terms");
  for (const auto& t : features) {
    switch (t.kind) {
      case FeatureTerm::Kind::Intercept:
        break;
      case FeatureTerm::Kind::CovariatePower:
        if (t.exponent < 1) throw InvalidArgument("covariate power exponent must be >= 1");
        [[fallthrough]];
      case FeatureTerm::Kind::CovariateExp:
        if (t.covariate < 1 || t.covariate > p)
          throw InvalidArgument("covariate index " + std::to_string(t.covariate) +
                                " is outside 1.." + std::to_string(p));
        break;
      case FeatureTerm::Kind::TreatmentPower:
        if (!allow_treatment)
          throw InvalidArgument("treatment terms are not allowed in a propensity model");
        if (t.exponent < 1) throw InvalidArgument("treatment power exponent must be >= 1");
        break;
    }
  }
}

namespace detail {

inline double int_pow(double base, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= base;
  return r;
}

template <typename Row>
double term_value(const FeatureTerm& t, const Row& x, std::optional<double> d) {
  switch (t.kind) {
    case FeatureTerm::Kind::Intercept:
      return 1.0;
    case FeatureTerm::Kind::CovariatePower:
      return int_pow(x(t.covariate - 1), t.exponent);
    case FeatureTerm::Kind::CovariateExp:
      return std::exp(x(t.covariate - 1));
    case FeatureTerm::Kind::TreatmentPower:
      return int_pow(*d, t.exponent);
  }
  return 0.0;
}

}  // namespace detail

/// Evaluates the basis in declared order. `d` must be given iff a
/// TreatmentPower term is present.
inline Eigen::VectorXd design_row(const FeatureList& features, const Eigen::VectorXd& x,
                                  std::optional<double> d = std::nullopt) {
  const bool needs_d = uses_treatment(features);
  if (needs_d && !d) throw InvalidArgument("treatment level required by a treatment term");
  if (!needs_d && d) throw InvalidArgument("treatment level supplied to a covariate-only basis");
  validate_features(features, x.size(), needs_d);
  Eigen::VectorXd row(static_cast<Eigen::Index>(features.size()));
  for (std::size_t c = 0; c < features.size(); ++c)
    row(static_cast<Eigen::Index>(c)) = detail::term_value(features[c], x, d);
  return row;
}

/// Design matrix over all units. With `level` set every row uses that
/// treatment level, otherwise each unit's observed level.
inline Eigen::MatrixXd design_matrix(const FeatureList& features, const Dataset& ds,
                                     std::optional<int> level = std::nullopt) {
  const bool needs_d = uses_treatment(features);
  validate_features(features, ds.num_covariates(), needs_d);
  const auto n = static_cast<Eigen::Index>(ds.size());
  const auto& x = ds.covariates();
  Eigen::MatrixXd m(n, static_cast<Eigen::Index>(features.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::optional<double> d;
    if (needs_d) d = static_cast<double>(level ? *level : ds.treatment(static_cast<std::size_t>(i)));
    const auto row = x.row(i);
    for (std::size_t c = 0; c < features.size(); ++c)
      m(i, static_cast<Eigen::Index>(c)) = detail::term_value(features[c], row, d);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Links

enum class Link { Logit, Cloglog };

inline std::string link_name(Link link) { return link == Link::Logit ? "logit" : "cloglog"; }

inline Link parse_link(const std::string& name) {
  if (name == "logit") return Link::Logit;
  if (name == "cloglog") return Link::Cloglog;
  throw ParseError("unknown link '" + name + "' (expected logit or cloglog)");
}

/// Unclamped inverse link.
inline double inverse_link_raw(Link link, double eta) {
  if (link == Link::Logit) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
  }
  return -std::expm1(-std::exp(eta));
}

inline double inverse_link(Link link, double eta) {
  return std::clamp(inverse_link_raw(link, eta), kProbabilityClamp, 1.0 - kProbabilityClamp);
}

inline double link_function(Link link, double p) {
  if (link == Link::Logit) return std::log(p) - std::log1p(-p);
  return std::log(-std::log1p(-p));
}

/// d p / d eta.
inline double inverse_link_derivative(Link link, double eta) {
  if (link == Link::Logit) {
    const double p = inverse_link_raw(Link::Logit, eta);
    return p * (1.0 - p);
  }
  return std::exp(eta - std::exp(eta));
}

// ---------------------------------------------------------------------------
// Model specifications and fits

struct PropensityModelSpec {
  Link link = Link::Logit;
  FeatureList features;
  int trials = 1;  ///< binomial trials N = Q - 1
};

struct PropensityFit {
  PropensityModelSpec spec;
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  /// Log-likelihood after the starting point and after each accepted step.
  std::vector<double> log_likelihood_trace;
};

struct OutcomeModelSpec {
  FeatureList features;
};

struct OutcomeFit {
  OutcomeModelSpec spec;
  Eigen::VectorXd coefficients;
  double residual_variance = 0.0;
  bool converged = true;
};

struct IrlsOptions {
  int max_iterations = 100;
  int max_halvings = 30;
  double coefficient_tolerance = 1e-8;
  double log_likelihood_tolerance = 1e-10;
  double separation_norm = 1e4;
  double separation_step = 1e-3;
  double ridge = 1e-10;
};

namespace detail {

/// Solves A x = b with a rank-revealing QR; retries once with a ridge.
inline Eigen::VectorXd solve_normal_equations(Eigen::MatrixXd a, const Eigen::VectorXd& b,
                                              double ridge) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols()) {
    a.diagonal().array() += ridge;
    qr.compute(a);
    if (qr.rank() < a.cols()) throw NumericalError("singular weighted normal equations");
  }
  return qr.solve(b);
}

inline double binomial_log_likelihood(Link link, const Eigen::VectorXd& eta, const Dataset& ds,
                                      int trials) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = inverse_link(link, eta(i));
    const double d = ds.treatment(static_cast<std::size_t>(i));
    ll += d * std::log(p) + (trials - d) * std::log1p(-p);
  }
  return ll;
}

}  // namespace detail

/// Maximum-likelihood fit of a binomial success probability by iteratively
/// reweighted least squares with step-halving. Starts from all-zero
/// coefficients.
inline PropensityFit fit_binomial(const Dataset& ds, const PropensityModelSpec& spec,
                                  const IrlsOptions& opt = {}) {
  if (spec.trials != ds.q_levels() - 1)
    throw InvalidArgument("propensity model has " + std::to_string(spec.trials) +
                          " trials but the dataset has Q - 1 = " +
                          std::to_string(ds.q_levels() - 1));
  if (uses_treatment(spec.features))
    throw InvalidArgument("treatment terms are not allowed in a propensity model");
  const Eigen::MatrixXd x = design_matrix(spec.features, ds);
  const auto n = x.rows();
  const auto k = x.cols();
  const double trials = spec.trials;

  PropensityFit fit{spec, Eigen::VectorXd::Zero(k), false, 0, 0.0, {}};
  Eigen::VectorXd eta = x * fit.coefficients;
  double ll = detail::binomial_log_likelihood(spec.link, eta, ds, spec.trials);
  fit.log_likelihood_trace.push_back(ll);

  Eigen::VectorXd w(n);
  Eigen::VectorXd z(n);
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    fit.iterations = iter;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = inverse_link(spec.link, eta(i));
      const double dp = std::max(inverse_link_derivative(spec.link, eta(i)), 1e-300);
      const double d = ds.treatment(static_cast<std::size_t>(i));
      w(i) = trials * dp * dp / (p * (1.0 - p));
      z(i) = eta(i) + (d - trials * p) / (trials * dp);
    }
    const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
    const Eigen::VectorXd target =
        detail::solve_normal_equations(xtw * x, xtw * z, opt.ridge);
    if (!target.allFinite()) throw NumericalError("IRLS produced non-finite coefficients");

    Eigen::VectorXd step = target - fit.coefficients;
    Eigen::VectorXd next = target;
    Eigen::VectorXd next_eta = x * next;
    double next_ll = detail::binomial_log_likelihood(spec.link, next_eta, ds, spec.trials);
    int halvings = 0;
    while (!(next_ll >= ll) && halvings < opt.max_halvings) {
      step *= 0.5;
      next = fit.coefficients + step;
      next_eta = x * next;
      next_ll = detail::binomial_log_likelihood(spec.link, next_eta, ds, spec.trials);
      ++halvings;
    }
    if (!(next_ll >= ll)) {
      // No ascent direction left at working precision.
      fit.converged = step.cwiseAbs().maxCoeff() < 1e-6;
      break;
    }

    const double coef_change = (next - fit.coefficients).cwiseAbs().maxCoeff();
    const double ll_change = next_ll - ll;
    fit.coefficients = next;
    eta = next_eta;
    ll = next_ll;
    fit.log_likelihood_trace.push_back(ll);

    if (fit.coefficients.norm() > opt.separation_norm)
      throw NumericalError("coefficient norm exceeds " + std::to_string(opt.separation_norm) +
                           "; perfect separation suspected");
    if (coef_change < opt.coefficient_tolerance) {
      fit.converged = true;
      break;
    }
    if (ll_change < opt.log_likelihood_tolerance) {
      // A flat likelihood with moving coefficients means they run off to infinity.
      if (coef_change > opt.separation_step)
        throw NumericalError("coefficients diverge on a flat likelihood; perfect separation suspected");
      fit.converged = true;
      break;
    }
  }
  fit.log_likelihood = ll;
  return fit;
}

/// Ordinary least squares on (design_row(features, X_i, D_i), Y_i).
inline OutcomeFit fit_gaussian(const Dataset& ds, const OutcomeModelSpec& spec) {
  const Eigen::MatrixXd x = design_matrix(spec.features, ds);
  const auto n = x.rows();
  const auto k = x.cols();
  if (n <= k)
    throw InvalidArgument("outcome model needs more units (" + std::to_string(n) +
                          ") than terms (" + std::to_string(k) + ")");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < k) throw NumericalError("outcome design matrix is rank deficient");
  OutcomeFit fit{spec, qr.solve(ds.outcomes()), 0.0, true};
  const Eigen::VectorXd resid = ds.outcomes() - x * fit.coefficients;
  fit.residual_variance = resid.squaredNorm() / static_cast<double>(n - k);
  return fit;
}

inline double predict_or(const OutcomeFit& fit, const Eigen::VectorXd& x, double d) {
  std::optional<double> dd;
  if (uses_treatment(fit.spec.features)) dd = d;
  return design_row(fit.spec.features, x, dd).dot(fit.coefficients);
}

/// a(X_i, level) for every unit.
inline Eigen::VectorXd predict_or_all(const OutcomeFit& fit, const Dataset& ds, int level) {
  return design_matrix(fit.spec.features, ds, level) * fit.coefficients;
}

}  // namespace mrest

#endif  // MREST_GLM_HPP
