#ifndef MREST_ESTIMATORS_HPP
#define MREST_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrest/data.hpp"
#include "mrest/elweights.hpp"
#include "mrest/error.hpp"
#include "mrest/glm.hpp"
#include "mrest/gps.hpp"

namespace mrest {

/// Postulated propensity family P and outcome-regression family A.
struct ModelFamily {
  std::vector<PropensityModelSpec> ps;
  std::vector<OutcomeModelSpec> outcome;
};

/// Two propensity models (logit with x, x^2; cloglog with x, e^x) and two
/// outcome models (d, d^2, x, x^2; d, x) over a single covariate, for a
/// four-level treatment.
inline ModelFamily default_family(int trials = 3) {
  using T = FeatureTerm;
  ModelFamily f;
  f.ps.push_back({Link::Logit, {T::intercept(), T::covariate_power(1, 1), T::covariate_power(1, 2)},
                  trials});
  f.ps.push_back({Link::Cloglog, {T::intercept(), T::covariate_power(1, 1), T::covariate_exp(1)},
                  trials});
  f.outcome.push_back({{T::intercept(), T::treatment_power(1), T::treatment_power(2),
                        T::covariate_power(1, 1), T::covariate_power(1, 2)}});
  f.outcome.push_back({{T::intercept(), T::treatment_power(1), T::covariate_power(1, 1)}});
  return f;
}

struct FittedModels {
  std::vector<GpsModel> ps;
  std::vector<OutcomeFit> outcome;
};

inline FittedModels fit_models(const Dataset& ds, const ModelFamily& family,
                               const IrlsOptions& irls = {}) {
  FittedModels out;
  for (const auto& spec : family.ps) out.ps.emplace_back(fit_binomial(ds, spec, irls));
  for (const auto& spec : family.outcome) out.outcome.push_back(fit_gaussian(ds, spec));
  return out;
}

// ---------------------------------------------------------------------------
// Estimator naming: KIND_<J propensity digits><K outcome digits>

enum class EstimatorKind { Reg, Ipw, Dr, Mr };

inline std::string kind_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Reg:
      return "REG";
    case EstimatorKind::Ipw:
      return "IPW";
    case EstimatorKind::Dr:
      return "DR";
    case EstimatorKind::Mr:
      return "MR";
  }
  return "?";
}

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::Mr;
  std::vector<bool> ps_mask;
  std::vector<bool> or_mask;

  std::size_t ps_count() const { return static_cast<std::size_t>(std::count(ps_mask.begin(), ps_mask.end(), true)); }
  std::size_t or_count() const { return static_cast<std::size_t>(std::count(or_mask.begin(), or_mask.end(), true)); }

  std::string name() const {
    std::string s = kind_name(kind) + "_";
    for (bool b : ps_mask) s += b ? '1' : '0';
    for (bool b : or_mask) s += b ? '1' : '0';
    return s;
  }

  bool valid() const {
    switch (kind) {
      case EstimatorKind::Reg:
        return ps_count() == 0 && or_count() == 1;
      case EstimatorKind::Ipw:
        return ps_count() == 1 && or_count() == 0;
      case EstimatorKind::Dr:
        return ps_count() == 1 && or_count() == 1;
      case EstimatorKind::Mr:
        return ps_count() + or_count() >= 1;
    }
    return false;
  }
};

/// Every valid estimator name for a family with `j` propensity and `k` outcome models.
inline std::vector<std::string> valid_estimator_names(std::size_t j, std::size_t k) {
  std::vector<std::string> names;
  const std::size_t bits = j + k;
  for (auto kind : {EstimatorKind::Reg, EstimatorKind::Ipw, EstimatorKind::Dr, EstimatorKind::Mr}) {
    for (std::size_t mask = (std::size_t{1} << bits); mask-- > 1;) {
      EstimatorSpec spec{kind, {}, {}};
      for (std::size_t b = 0; b < bits; ++b) {
        const bool on = (mask >> (bits - 1 - b)) & 1U;
        (b < j ? spec.ps_mask : spec.or_mask).push_back(on);
      }
      if (spec.valid()) names.push_back(spec.name());
    }
  }
  return names;
}

inline EstimatorSpec parse_estimator(const std::string& name, std::size_t j, std::size_t k) {
  auto fail = [&](const std::string& why) {
    std::string msg = "invalid estimator '" + name + "': " + why + ". Valid names:";
    for (const auto& v : valid_estimator_names(j, k)) msg += " " + v;
    throw ParseError(msg);
  };
  const auto us = name.find('_');
  if (us == std::string::npos) fail("expected KIND_digits");
  const std::string kind = name.substr(0, us);
  const std::string digits = name.substr(us + 1);
  EstimatorSpec spec;
  if (kind == "REG") {
    spec.kind = EstimatorKind::Reg;
  } else if (kind == "IPW") {
    spec.kind = EstimatorKind::Ipw;
  } else if (kind == "DR") {
    spec.kind = EstimatorKind::Dr;
  } else if (kind == "MR") {
    spec.kind = EstimatorKind::Mr;
  } else {
    fail("unknown kind '" + kind + "'");
  }
  if (digits.size() != j + k)
    fail("expected " + std::to_string(j + k) + " mask digits (" + std::to_string(j) +
         " propensity, " + std::to_string(k) + " outcome)");
  for (std::size_t b = 0; b < digits.size(); ++b) {
    if (digits[b] != '0' && digits[b] != '1') fail("mask digits must be 0 or 1");
    (b < j ? spec.ps_mask : spec.or_mask).push_back(digits[b] == '1');
  }
  if (!spec.valid()) fail("wrong number of models for " + kind);
  return spec;
}

// ---------------------------------------------------------------------------
// Point estimates

struct EstimateDiagnostics {
  int iterations = 0;
  double grad_norm = 0.0;
  double min_slack = 0.0;
  double max_moment_residual = 0.0;
  std::size_t clamp_count = 0;
  std::string message;
};

enum class ApoStatus { Ok, Failed };

struct ApoEstimate {
  std::string estimator;
  int level = 0;
  double value = 0.0;
  ApoStatus status = ApoStatus::Ok;
  EstimateDiagnostics diagnostics;

  bool ok() const { return status == ApoStatus::Ok; }
};

/// Largest |sum_i w_i g_il| over columns; zero when the weights solve the moment system.
inline double max_moment_residual(const ConstraintSystem& cs, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd rows = cs.group_rows();
  return (rows.transpose() * w).cwiseAbs().maxCoeff();
}

/// Moment-constraint residual above which an MR solution is rejected.
inline constexpr double kMomentTolerance = 1e-6;

namespace detail {

inline double indicator(const Dataset& ds, std::size_t i, int level) {
  return ds.treatment(i) == level ? 1.0 : 0.0;
}

inline double dr_sum(const Dataset& ds, int level, const Eigen::VectorXd& pi,
                     const Eigen::VectorXd& a) {
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double ind = indicator(ds, i, level);
    sum += ind * ds.outcome(i) / pi(ii) - (ind - pi(ii)) / pi(ii) * a(ii);
  }
  return sum / static_cast<double>(ds.size());
}

}  // namespace detail

/// Augmented inverse-probability-weighted mean from precomputed
/// pi(level | X_i) and a(X_i, level).
inline double dr_value(const Dataset& ds, int level, const Eigen::VectorXd& pi,
                       const Eigen::VectorXd& a) {
  if (pi.size() != static_cast<Eigen::Index>(ds.size()) || a.size() != pi.size())
    throw InvalidArgument("prediction vectors must have one entry per unit");
  return detail::dr_sum(ds, level, pi, a);
}

inline double ipw_value(const Dataset& ds, int level, const Eigen::VectorXd& pi) {
  if (pi.size() != static_cast<Eigen::Index>(ds.size()))
    throw InvalidArgument("prediction vector must have one entry per unit");
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    sum += detail::indicator(ds, i, level) * ds.outcome(i) / pi(static_cast<Eigen::Index>(i));
  return sum / static_cast<double>(ds.size());
}

inline ApoEstimate reg_apo(const Dataset& ds, const OutcomeFit& fit, int level) {
  treatment_group(ds, level);
  ApoEstimate e;
  e.level = level;
  e.value = predict_or_all(fit, ds, level).mean();
  return e;
}

inline ApoEstimate ipw_apo(const Dataset& ds, const GpsModel& gps, int level) {
  treatment_group(ds, level);
  ApoEstimate e;
  e.level = level;
  const Eigen::VectorXd pi = gps_pmf_all(gps, ds, level, &e.diagnostics.clamp_count);
  e.value = ipw_value(ds, level, pi);
  return e;
}

inline ApoEstimate dr_apo(const Dataset& ds, const GpsModel& gps, const OutcomeFit& fit,
                          int level) {
  treatment_group(ds, level);
  ApoEstimate e;
  e.level = level;
  const Eigen::VectorXd pi = gps_pmf_all(gps, ds, level, &e.diagnostics.clamp_count);
  e.value = dr_value(ds, level, pi, predict_or_all(fit, ds, level));
  return e;
}

/// Weighted group mean of Y with empirical-likelihood weights for a prebuilt
/// constraint system. Solver failures and empty groups give a Failed estimate.
inline ApoEstimate mr_apo(const Dataset& ds, const ConstraintSystem& cs,
                          const SolverOptions& opt = {}) {
  ApoEstimate e;
  e.level = cs.level;
  if (cs.group.empty()) {
    e.status = ApoStatus::Failed;
    e.diagnostics.message = "no units received level " + std::to_string(cs.level);
    return e;
  }
  const MRSolution sol = solve_rho(cs, opt);
  e.diagnostics.iterations = sol.iterations;
  e.diagnostics.grad_norm = sol.grad_norm;
  e.diagnostics.min_slack = sol.min_slack;
  if (!sol.converged()) {
    e.status = ApoStatus::Failed;
    e.diagnostics.message = to_string(sol.status) + ": " + sol.message;
    return e;
  }
  e.diagnostics.max_moment_residual = max_moment_residual(cs, sol.weights);
  if (!(e.diagnostics.max_moment_residual < kMomentTolerance)) {
    e.status = ApoStatus::Failed;
    e.diagnostics.message = "moment constraints violated after convergence";
    return e;
  }
  double value = 0.0;
  for (std::size_t r = 0; r < cs.group.size(); ++r)
    value += sol.weights(static_cast<Eigen::Index>(r)) * ds.outcome(cs.group.members[r]);
  e.value = value;
  return e;
}

inline ApoEstimate mr_apo(const Dataset& ds, const std::vector<GpsModel>& ps,
                          const std::vector<OutcomeFit>& outcome, int level,
                          const SolverOptions& opt = {}) {
  std::size_t clamped = 0;
  const ConstraintSystem cs = build_constraints(ds, ps, outcome, level, &clamped);
  ApoEstimate e = mr_apo(ds, cs, opt);
  e.diagnostics.clamp_count = clamped;
  return e;
}

/// Evaluates one named estimator at one level. Library errors inside the
/// estimator are captured as a Failed estimate rather than thrown.
inline ApoEstimate estimate(const Dataset& ds, const FittedModels& models,
                            const EstimatorSpec& spec, int level, const SolverOptions& opt = {}) {
  if (!spec.valid()) throw InvalidArgument("invalid estimator specification " + spec.name());
  if (spec.ps_mask.size() != models.ps.size() || spec.or_mask.size() != models.outcome.size())
    throw InvalidArgument("estimator " + spec.name() + " does not match the model family");
  std::vector<GpsModel> ps;
  std::vector<OutcomeFit> outcome;
  for (std::size_t j = 0; j < spec.ps_mask.size(); ++j)
    if (spec.ps_mask[j]) ps.push_back(models.ps[j]);
  for (std::size_t k = 0; k < spec.or_mask.size(); ++k)
    if (spec.or_mask[k]) outcome.push_back(models.outcome[k]);

  ApoEstimate e;
  try {
    if (treatment_group(ds, level).empty()) {
      e.level = level;
      e.status = ApoStatus::Failed;
      e.diagnostics.message = "no units received level " + std::to_string(level);
    } else {
      switch (spec.kind) {
        case EstimatorKind::Reg:
          e = reg_apo(ds, outcome.front(), level);
          break;
        case EstimatorKind::Ipw:
          e = ipw_apo(ds, ps.front(), level);
          break;
        case EstimatorKind::Dr:
          e = dr_apo(ds, ps.front(), outcome.front(), level);
          break;
        case EstimatorKind::Mr:
          e = mr_apo(ds, ps, outcome, level, opt);
          break;
      }
    }
  } catch (const NumericalError& err) {
    e = ApoEstimate{};
    e.level = level;
    e.status = ApoStatus::Failed;
    e.diagnostics.message = err.what();
  } catch (const DomainViolation& err) {
    e = ApoEstimate{};
    e.level = level;
    e.status = ApoStatus::Failed;
    e.diagnostics.message = err.what();
  }
  if (e.ok() && !std::isfinite(e.value)) {
    e.status = ApoStatus::Failed;
    e.diagnostics.message = "non-finite estimate";
  }
  e.estimator = spec.name();
  return e;
}

/// Difference of two average potential outcomes from the same estimator.
inline double ate(const ApoEstimate& treated, const ApoEstimate& reference) {
  if (treated.estimator != reference.estimator)
    throw InvalidArgument("cannot difference estimates from '" + treated.estimator + "' and '" +
                          reference.estimator + "'");
  if (!treated.ok() || !reference.ok())
    throw InvalidArgument("cannot difference failed estimates");
  return treated.value - reference.value;
}

}  // namespace mrest

#endif  // MREST_ESTIMATORS_HPP
