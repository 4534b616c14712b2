#ifndef MREST_SIM_HPP
#define MREST_SIM_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "mrest/data.hpp"
#include "mrest/error.hpp"
#include "mrest/estimators.hpp"
#include "mrest/glm.hpp"
#include "mrest/rng.hpp"

namespace mrest {

/// X ~ U[x_low, x_high]; D | X ~ Bin(trials, logistic(ps' (1, x, x^2)));
/// Y | X, D ~ N(or' (1, d, d^2, x, x^2), outcome_variance).
struct DgpSpec {
  int n = 10000;
  double x_low = -2.5;
  double x_high = 2.5;
  int trials = 3;
  Eigen::Vector3d ps_coefficients{-0.5, 0.1, -0.2};
  Eigen::Matrix<double, 5, 1> outcome_coefficients{
      (Eigen::Matrix<double, 5, 1>() << 1.0, 2.0, -0.35, 2.0, 3.0).finished()};
  double outcome_variance = 2.0;

  void validate() const {
    if (n < 1) throw InvalidArgument("sample size must be at least 1");
    if (!(outcome_variance > 0.0)) throw InvalidArgument("outcome variance must be positive");
    if (!(x_low < x_high)) throw InvalidArgument("covariate range is empty");
    if (trials < 1) throw InvalidArgument("treatment needs at least one trial");
  }

  double success_probability(double x) const {
    return inverse_link_raw(Link::Logit,
                            ps_coefficients(0) + ps_coefficients(1) * x + ps_coefficients(2) * x * x);
  }

  double outcome_mean(double x, double d) const {
    const auto& b = outcome_coefficients;
    return b(0) + b(1) * d + b(2) * d * d + b(3) * x + b(4) * x * x;
  }
};

/// Draws n units in order; per unit: x, then `trials` Bernoulli draws, then one normal.
inline Dataset simulate_dataset(const DgpSpec& dgp, std::uint64_t seed) {
  dgp.validate();
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(dgp.n);
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, 1);
  std::vector<int> d(static_cast<std::size_t>(n));
  const double sd = std::sqrt(dgp.outcome_variance);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi = rng.uniform(dgp.x_low, dgp.x_high);
    const double p = dgp.success_probability(xi);
    int di = 0;
    for (int t = 0; t < dgp.trials; ++t) di += rng.bernoulli(p) ? 1 : 0;
    x(i, 0) = xi;
    d[static_cast<std::size_t>(i)] = di;
    y(i) = dgp.outcome_mean(xi, di) + sd * rng.normal();
  }
  return Dataset(std::move(y), std::move(d), std::move(x), dgp.trials + 1);
}

/// E[Y(level)] in closed form, using the uniform moments of X.
inline double true_apo(const DgpSpec& dgp, int level) {
  if (level < 0 || level > dgp.trials)
    throw InvalidArgument("level " + std::to_string(level) + " is outside 0.." +
                          std::to_string(dgp.trials));
  const double a = dgp.x_low;
  const double b = dgp.x_high;
  const double ex = (a + b) / 2.0;
  const double ex2 = (a * a + a * b + b * b) / 3.0;
  const auto& c = dgp.outcome_coefficients;
  const double d = level;
  return c(0) + c(1) * d + c(2) * d * d + c(3) * ex + c(4) * ex2;
}

inline double true_apo(int level) { return true_apo(DgpSpec{}, level); }

/// The nine estimators compared in the simulation table.
inline std::vector<std::string> table1_estimator_names() {
  return {"DR_1010", "DR_1001", "DR_0110", "DR_0101", "MR_1101",
          "MR_1110", "MR_1011", "MR_0111", "MR_1111"};
}

struct ExperimentConfig {
  DgpSpec dgp;
  int replications = 200;
  std::uint64_t seed = 20240601;
  ModelFamily family = default_family();
  std::vector<EstimatorSpec> estimators;
  int workers = 1;
  SolverOptions solver;

  void validate() const {
    dgp.validate();
    if (replications < 1) throw InvalidArgument("replications must be at least 1");
    if (estimators.empty()) throw InvalidArgument("estimator list is empty");
    if (workers < 1) throw InvalidArgument("worker count must be at least 1");
    for (const auto& p : family.ps)
      if (p.trials != dgp.trials)
        throw InvalidArgument("propensity model trials do not match the simulated treatment");
    for (const auto& e : estimators)
      if (e.ps_mask.size() != family.ps.size() || e.or_mask.size() != family.outcome.size() ||
          !e.valid())
        throw InvalidArgument("estimator " + e.name() + " does not match the model family");
  }
};

inline ExperimentConfig table1_config() {
  ExperimentConfig cfg;
  for (const auto& name : table1_estimator_names())
    cfg.estimators.push_back(
        parse_estimator(name, cfg.family.ps.size(), cfg.family.outcome.size()));
  return cfg;
}

struct CellSummary {
  int level = 0;
  double av_est = 0.0;
  double emp_var = 0.0;
  double bias = 0.0;
  int successes = 0;
  int failures = 0;
  /// False when fewer than two successful replications exist; emp_var is then 0.
  bool variance_defined = false;
};

struct EstimatorSummary {
  std::string name;
  std::vector<CellSummary> levels;
};

struct ExperimentReport {
  int n = 0;
  int replications = 0;
  std::uint64_t seed = 0;
  std::vector<double> truth;
  std::vector<EstimatorSummary> estimators;
  /// Largest MR solver iteration count over all cells.
  int max_solver_iterations = 0;

  const EstimatorSummary& find(const std::string& name) const {
    for (const auto& e : estimators)
      if (e.name == name) return e;
    throw InvalidArgument("estimator " + name + " not in report");
  }
};

/// Point estimates of one replication: [estimator][level].
using ReplicationResult = std::vector<std::vector<ApoEstimate>>;

inline ReplicationResult run_replication(const ExperimentConfig& cfg, int r) {
  const int q = cfg.dgp.trials + 1;
  ReplicationResult out(cfg.estimators.size());
  const Dataset ds = simulate_dataset(cfg.dgp, replication_seed(cfg.seed, static_cast<std::uint64_t>(r)));
  FittedModels models;
  std::string fit_error;
  try {
    models = fit_models(ds, cfg.family);
  } catch (const Error& e) {
    fit_error = e.what();
  }
  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    for (int level = 0; level < q; ++level) {
      if (!fit_error.empty()) {
        ApoEstimate failed;
        failed.estimator = cfg.estimators[e].name();
        failed.level = level;
        failed.status = ApoStatus::Failed;
        failed.diagnostics.message = "model fit failed: " + fit_error;
        out[e].push_back(std::move(failed));
      } else {
        out[e].push_back(estimate(ds, models, cfg.estimators[e], level, cfg.solver));
      }
    }
  }
  return out;
}

/// Runs all replications on `cfg.workers` threads. Replication r always uses
/// replication_seed(seed, r) and results are reduced in replication order, so
/// the report does not depend on the worker count.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto reps = static_cast<std::size_t>(cfg.replications);
  std::vector<ReplicationResult> results(reps);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < reps; r = next++) results[r] = run_replication(cfg, static_cast<int>(r));
  };
  const int nthreads = std::min<int>(cfg.workers, cfg.replications);
  if (nthreads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
  }

  ExperimentReport rep;
  rep.n = cfg.dgp.n;
  rep.replications = cfg.replications;
  rep.seed = cfg.seed;
  const int q = cfg.dgp.trials + 1;
  for (int l = 0; l < q; ++l) rep.truth.push_back(true_apo(cfg.dgp, l));

  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    EstimatorSummary es{cfg.estimators[e].name(), {}};
    for (int l = 0; l < q; ++l) {
      CellSummary cell;
      cell.level = l;
      std::vector<double> values;
      for (const auto& res : results) {
        const auto& est = res[e][static_cast<std::size_t>(l)];
        rep.max_solver_iterations = std::max(rep.max_solver_iterations, est.diagnostics.iterations);
        if (est.ok())
          values.push_back(est.value);
        else
          ++cell.failures;
      }
      cell.successes = static_cast<int>(values.size());
      if (!values.empty()) {
        double sum = 0.0;
        for (double v : values) sum += v;
        cell.av_est = sum / static_cast<double>(values.size());
        cell.bias = cell.av_est - rep.truth[static_cast<std::size_t>(l)];
      } else {
        cell.av_est = std::nan("");
        cell.bias = std::nan("");
      }
      if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - cell.av_est) * (v - cell.av_est);
        cell.emp_var = ss / static_cast<double>(values.size() - 1);
        cell.variance_defined = true;
      }
      es.levels.push_back(cell);
    }
    rep.estimators.push_back(std::move(es));
  }
  return rep;
}

}  // namespace mrest

#endif  // MREST_SIM_HPP
