#ifndef MREST_ELWEIGHTS_HPP
#define MREST_ELWEIGHTS_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrest/data.hpp"
#include "mrest/error.hpp"
#include "mrest/glm.hpp"
#include "mrest/gps.hpp"

namespace mrest {

/// Centered moment vectors g_i for one treatment level.
///
/// Row i of `g` is (pi^1(d|X_i) - theta^1, ..., pi^J(d|X_i) - theta^J,
/// a^1(X_i,d) - eta^1, ..., a^K(X_i,d) - eta^K), where theta and eta are
/// means over all n units.
struct ConstraintSystem {
  int level = 0;
  Eigen::MatrixXd g;
  Eigen::VectorXd theta;
  Eigen::VectorXd eta;
  TreatmentGroup group;

  std::size_t n() const { return static_cast<std::size_t>(g.rows()); }
  Eigen::Index dim() const { return g.cols(); }

  /// Rows of `g` for units in the treatment group, in member order.
  Eigen::MatrixXd group_rows() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(group.size()), g.cols());
    for (std::size_t r = 0; r < group.size(); ++r)
      out.row(static_cast<Eigen::Index>(r)) = g.row(static_cast<Eigen::Index>(group.members[r]));
    return out;
  }
};

/// Centers raw predictions column by column. The first `num_ps` columns are
/// propensity scores, the remainder outcome-regression predictions.
inline ConstraintSystem center_predictions(const Eigen::MatrixXd& predictions, Eigen::Index num_ps,
                                           TreatmentGroup group) {
  if (predictions.cols() < 1) throw InvalidArgument("constraint system needs at least one model");
  if (num_ps < 0 || num_ps > predictions.cols())
    throw InvalidArgument("propensity column count out of range");
  for (const auto i : group.members)
    if (i >= static_cast<std::size_t>(predictions.rows()))
      throw InvalidArgument("group member outside the prediction rows");
  ConstraintSystem cs;
  cs.level = group.level;
  const Eigen::RowVectorXd means = predictions.colwise().mean();
  cs.g = predictions.rowwise() - means;
  cs.theta = means.head(num_ps).transpose();
  cs.eta = means.tail(predictions.cols() - num_ps).transpose();
  cs.group = std::move(group);
  return cs;
}

inline ConstraintSystem build_constraints(const Dataset& ds, const std::vector<GpsModel>& ps,
                                          const std::vector<OutcomeFit>& outcome, int level,
                                          std::size_t* clamped = nullptr) {
  if (ps.empty() && outcome.empty())
    throw InvalidArgument("at least one propensity or outcome model is required");
  auto group = treatment_group(ds, level);
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::MatrixXd raw(n, static_cast<Eigen::Index>(ps.size() + outcome.size()));
  Eigen::Index c = 0;
  for (const auto& m : ps) raw.col(c++) = gps_pmf_all(m, ds, level, clamped);
  for (const auto& m : outcome) raw.col(c++) = predict_or_all(m, ds, level);
  return center_predictions(raw, static_cast<Eigen::Index>(ps.size()), std::move(group));
}

// ---------------------------------------------------------------------------
// Barrier objective F_n(rho) = -(1/n) sum_{i in M_q} log(1 + rho' g_i)

struct GradHess {
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

namespace detail {

/// The group rows of a constraint system together with the full sample size.
class BarrierProblem {
 public:
  BarrierProblem(Eigen::MatrixXd group_g, double n) : g_(std::move(group_g)), n_(n) {}

  Eigen::Index dim() const { return g_.cols(); }
  const Eigen::MatrixXd& rows() const { return g_; }

  Eigen::VectorXd slacks(const Eigen::VectorXd& rho) const {
    return (g_ * rho).array() + 1.0;
  }

  static double min_or_inf(const Eigen::VectorXd& v) {
    return v.size() == 0 ? std::numeric_limits<double>::infinity() : v.minCoeff();
  }

  double objective_at(const Eigen::VectorXd& s) const { return -s.array().log().sum() / n_; }

  double objective(const Eigen::VectorXd& rho) const {
    const Eigen::VectorXd s = slacks(rho);
    if (!(min_or_inf(s) > 0.0)) throw DomainViolation("rho lies outside the barrier domain");
    return objective_at(s);
  }

  GradHess grad_hess_at(const Eigen::VectorXd& s) const {
    const Eigen::MatrixXd scaled = s.cwiseInverse().asDiagonal() * g_;
    GradHess out;
    out.gradient = -scaled.colwise().sum().transpose() / n_;
    Eigen::MatrixXd h = scaled.transpose() * scaled / n_;
    // Mirror the lower triangle so the Hessian is exactly symmetric.
    out.hessian = h.selfadjointView<Eigen::Lower>();
    return out;
  }

 private:
  Eigen::MatrixXd g_;
  double n_;
};

inline BarrierProblem barrier_problem(const ConstraintSystem& cs) {
  return BarrierProblem(cs.group_rows(), static_cast<double>(cs.n()));
}

inline void check_rho(const ConstraintSystem& cs, const Eigen::VectorXd& rho) {
  if (rho.size() != cs.dim())
    throw InvalidArgument("rho has length " + std::to_string(rho.size()) + ", expected " +
                          std::to_string(cs.dim()));
}

}  // namespace detail

inline double fn_objective(const ConstraintSystem& cs, const Eigen::VectorXd& rho) {
  detail::check_rho(cs, rho);
  return detail::barrier_problem(cs).objective(rho);
}

inline GradHess fn_grad_hess(const ConstraintSystem& cs, const Eigen::VectorXd& rho) {
  detail::check_rho(cs, rho);
  const auto problem = detail::barrier_problem(cs);
  const Eigen::VectorXd s = problem.slacks(rho);
  if (!(detail::BarrierProblem::min_or_inf(s) > 0.0))
    throw DomainViolation("rho lies outside the barrier domain");
  return problem.grad_hess_at(s);
}

// ---------------------------------------------------------------------------
// Damped Newton minimization of F_n over D_n

enum class SolveStatus { Converged, MaxIter, Degenerate };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::MaxIter:
      return "max_iter";
    case SolveStatus::Degenerate:
      return "degenerate";
  }
  return "unknown";
}

struct SolverOptions {
  int max_iterations = 100;
  double moment_tolerance = 1e-9;  ///< on the weighted moment residual
  double decrement_tolerance = 1e-12;
  double armijo = 1e-4;
  double boundary_margin = 1e-10;
  double degenerate_slack = 1e-8;
  double hessian_ridge = 1e-12;
  int max_backtracks = 60;
  double divergence_norm = 1e12;
};

struct MRSolution {
  Eigen::VectorXd rho;
  Eigen::VectorXd weights;  ///< over group members, in member order
  double objective = 0.0;
  double grad_norm = 0.0;
  double min_slack = 1.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::Degenerate;
  std::string message;

  bool converged() const { return status == SolveStatus::Converged; }
};

/// Weights w_i proportional to 1 / (1 + rho' g_i) over the group, summing to one.
inline Eigen::VectorXd mr_weights(const MRSolution& sol, const ConstraintSystem& cs) {
  if (!sol.converged())
    throw NumericalError("cannot form weights from a " + to_string(sol.status) + " solution");
  detail::check_rho(cs, sol.rho);
  const Eigen::VectorXd s = (cs.group_rows() * sol.rho).array() + 1.0;
  if (!(detail::BarrierProblem::min_or_inf(s) > 0.0))
    throw DomainViolation("rho lies outside the barrier domain");
  const Eigen::VectorXd inv = s.cwiseInverse();
  // Neumaier summation keeps the normalisation error near one ulp.
  double sum = 0.0;
  double comp = 0.0;
  for (Eigen::Index i = 0; i < inv.size(); ++i) {
    const double t = sum + inv(i);
    comp += std::abs(sum) >= std::abs(inv(i)) ? (sum - t) + inv(i) : (inv(i) - t) + sum;
    sum = t;
  }
  return inv / (sum + comp);
}

namespace detail {

/// Newton direction; falls back to a ridged factorisation when H is singular.
inline bool newton_direction(const Eigen::MatrixXd& h, const Eigen::VectorXd& grad, double ridge,
                             Eigen::VectorXd& dir) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) {
    Eigen::MatrixXd hr = h;
    hr.diagonal().array() += ridge;
    llt.compute(hr);
    if (llt.info() != Eigen::Success) return false;
  }
  dir = llt.solve(-grad);
  return dir.allFinite();
}

}  // namespace detail

inline MRSolution solve_rho(const ConstraintSystem& cs, const SolverOptions& opt = {}) {
  const Eigen::Index dim = cs.dim();
  if (dim < 1) throw InvalidArgument("constraint system has no columns");
  if (cs.group.empty()) throw InvalidArgument("treatment group is empty");

  MRSolution sol;
  sol.rho = Eigen::VectorXd::Zero(dim);

  // Columns that vanish on the group cannot move the weights; solve on the rest.
  const Eigen::MatrixXd rows = cs.group_rows();
  std::vector<Eigen::Index> active;
  for (Eigen::Index c = 0; c < dim; ++c)
    if (rows.col(c).cwiseAbs().maxCoeff() > 0.0) active.push_back(c);
  const auto m = static_cast<Eigen::Index>(cs.group.size());
  const auto k = static_cast<Eigen::Index>(active.size());
  if (m < k + 1) {
    sol.status = SolveStatus::Degenerate;
    sol.message = "group of size " + std::to_string(m) + " cannot support " + std::to_string(k) +
                  " constraints";
    return sol;
  }

  Eigen::MatrixXd reduced(m, k);
  for (Eigen::Index c = 0; c < k; ++c) reduced.col(c) = rows.col(active[static_cast<std::size_t>(c)]);
  const detail::BarrierProblem problem(std::move(reduced), static_cast<double>(cs.n()));

  Eigen::VectorXd rho = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd s = problem.slacks(rho);
  double f = problem.objective_at(s);
  GradHess gh = problem.grad_hess_at(s);
  sol.status = SolveStatus::MaxIter;

  // Largest |sum_i w_i g_i| under the weights implied by the slacks. Unlike the
  // raw gradient it does not vanish when rho runs off to infinity.
  auto moment_residual = [&](const Eigen::VectorXd& sl) {
    const Eigen::VectorXd inv = sl.cwiseInverse();
    return (problem.rows().transpose() * inv).cwiseAbs().maxCoeff() / inv.sum();
  };

  auto try_step = [&](const Eigen::VectorXd& cand, Eigen::VectorXd& cand_s, double& cand_f) {
    cand_s = problem.slacks(cand);
    if (!(detail::BarrierProblem::min_or_inf(cand_s) >= opt.boundary_margin)) return false;
    cand_f = problem.objective_at(cand_s);
    return std::isfinite(cand_f);
  };

  for (int iter = 0; k > 0 && iter < opt.max_iterations; ++iter) {
    Eigen::VectorXd dir;
    if (!detail::newton_direction(gh.hessian, gh.gradient, opt.hessian_ridge, dir)) {
      sol.status = SolveStatus::Degenerate;
      sol.message = "barrier Hessian is singular";
      break;
    }
    const double slope = gh.gradient.dot(dir);
    const double decrement = -slope;
    const bool small = moment_residual(s) < opt.moment_tolerance ||
                       decrement < opt.decrement_tolerance;
    if (small) {
      // Final full step to reach working precision before stopping.
      Eigen::VectorXd cs_s;
      double cf = 0.0;
      const Eigen::VectorXd cand = rho + dir;
      if (decrement > 0.0 && try_step(cand, cs_s, cf) && cf <= f) {
        rho = cand;
        s = cs_s;
        f = cf;
        gh = problem.grad_hess_at(s);
        sol.iterations = iter + 1;
      }
      sol.status = SolveStatus::Converged;
      break;
    }

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd cand_s;
    double cand_f = 0.0;
    Eigen::VectorXd cand;
    for (int b = 0; b <= opt.max_backtracks; ++b, t *= 0.5) {
      cand = rho + t * dir;
      if (try_step(cand, cand_s, cand_f) && cand_f < f && cand_f <= f + opt.armijo * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      sol.status = SolveStatus::Degenerate;
      sol.message = "line search failed to decrease the barrier objective";
      break;
    }
    rho = cand;
    s = cand_s;
    f = cand_f;
    gh = problem.grad_hess_at(s);
    sol.iterations = iter + 1;
    if (rho.cwiseAbs().maxCoeff() > opt.divergence_norm) {
      sol.status = SolveStatus::Degenerate;
      sol.message = "rho diverges; zero is not inside the convex hull of the constraints";
      break;
    }
  }
  if (k == 0) sol.status = SolveStatus::Converged;
  if (sol.status == SolveStatus::MaxIter)
    sol.message = "no convergence after " + std::to_string(opt.max_iterations) + " iterations";

  for (Eigen::Index c = 0; c < k; ++c) sol.rho(active[static_cast<std::size_t>(c)]) = rho(c);
  sol.objective = f;
  sol.grad_norm = k > 0 ? gh.gradient.cwiseAbs().maxCoeff() : 0.0;
  sol.min_slack = detail::BarrierProblem::min_or_inf(s);
  if (sol.converged() && sol.min_slack < opt.degenerate_slack) {
    sol.status = SolveStatus::Degenerate;
    sol.message = "minimiser approaches the barrier boundary";
  }
  if (sol.converged()) sol.weights = mr_weights(sol, cs);
  return sol;
}

}  // namespace mrest

#endif  // MREST_ELWEIGHTS_HPP
