#ifndef MREST_REPORT_HPP
#define MREST_REPORT_HPP

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mrest/data.hpp"
#include "mrest/error.hpp"
#include "mrest/estimators.hpp"
#include "mrest/sim.hpp"

namespace mrest {

// ---------------------------------------------------------------------------
// Reference simulation table (R = 1000, n = 10000) and tolerances

struct ReferenceRow {
  const char* name;
  std::array<double, 4> av_est;
  std::array<double, 4> emp_var;
  std::array<double, 4> bias;
};

inline constexpr std::array<double, 4> kReferenceTruth{7.253, 8.903, 9.853, 10.103};

inline const std::vector<ReferenceRow>& reference_table() {
  static const std::vector<ReferenceRow> rows{
      {"DR_1010", {7.255, 8.902, 9.853, 10.103}, {0.008, 0.006, 0.005, 0.008}, {0.002, -0.001, 0.000, 0.000}},
      {"DR_1001", {7.238, 8.903, 9.850, 10.109}, {0.073, 0.015, 0.012, 0.071}, {-0.015, 0.001, -0.002, 0.006}},
      {"DR_0110", {7.253, 8.901, 9.853, 10.103}, {0.008, 0.006, 0.005, 0.008}, {0.000, -0.001, 0.000, 0.000}},
      {"DR_0101", {7.010, 8.784, 9.969, 10.479}, {0.071, 0.014, 0.011, 0.061}, {-0.243, -0.118, 0.117, 0.377}},
      {"MR_1101", {7.251, 8.899, 9.852, 10.098}, {0.009, 0.006, 0.005, 0.009}, {-0.002, -0.004, -0.001, -0.005}},
      {"MR_1110", {7.247, 8.899, 9.848, 10.099}, {0.008, 0.005, 0.005, 0.009}, {-0.006, -0.004, -0.005, -0.006}},
      {"MR_1011", {7.250, 8.905, 9.854, 10.105}, {0.008, 0.006, 0.005, 0.009}, {-0.003, 0.002, 0.002, 0.002}},
      {"MR_0111", {7.249, 8.899, 9.851, 10.098}, {0.008, 0.005, 0.005, 0.008}, {-0.004, -0.003, -0.002, -0.005}},
      {"MR_1111", {7.248, 8.899, 9.850, 10.096}, {0.008, 0.005, 0.005, 0.009}, {-0.005, -0.004, -0.003, -0.007}},
  };
  return rows;
}

inline const ReferenceRow* find_reference(const std::string& name) {
  for (const auto& r : reference_table())
    if (name == r.name) return &r;
  return nullptr;
}

/// Tolerances used when comparing a run against the reference table.
struct ComparisonTolerances {
  double truth = 0.01;            ///< |analytic truth - reference truth|
  double consistent_bias = 0.03;  ///< |bias| for estimators with a correct model
  double misspecified_bias = 0.08;  ///< |bias - reference bias| for DR_0101
  double variance_low = 0.5;      ///< DR_1010 variance ratio bounds
  double variance_high = 2.0;
};

struct ComparisonCheck {
  std::string criterion;
  std::string estimator;
  int level = 0;
  double observed = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
};

struct Comparison {
  bool skipped = false;
  std::string reason;
  std::vector<ComparisonCheck> checks;

  bool pass() const {
    if (skipped) return false;
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  bool pass(const std::string& criterion) const {
    bool any = false;
    for (const auto& c : checks) {
      if (c.criterion != criterion) continue;
      any = true;
      if (!c.pass) return false;
    }
    return any;
  }
};

inline Comparison compare_to_reference(const ExperimentReport& rep,
                                       const ComparisonTolerances& tol = {}) {
  Comparison cmp;
  if (rep.replications < 2) {
    cmp.skipped = true;
    cmp.reason = "fewer than two replications; empirical variance undefined";
    return cmp;
  }
  if (rep.truth.size() != kReferenceTruth.size()) {
    cmp.skipped = true;
    cmp.reason = "reference table covers exactly four treatment levels";
    return cmp;
  }
  auto add = [&](std::string crit, std::string est, int level, double obs, double lo, double hi) {
    cmp.checks.push_back({std::move(crit), std::move(est), level, obs, lo, hi,
                          std::isfinite(obs) && obs >= lo && obs <= hi});
  };
  for (int l = 0; l < 4; ++l) {
    const auto ref = kReferenceTruth[static_cast<std::size_t>(l)];
    add("truth", "Truth", l, rep.truth[static_cast<std::size_t>(l)], ref - tol.truth, ref + tol.truth);
  }
  for (const auto& est : rep.estimators) {
    const auto* ref = find_reference(est.name);
    if (!ref) continue;
    for (const auto& cell : est.levels) {
      const auto l = static_cast<std::size_t>(cell.level);
      if (est.name == "DR_0101") {
        add("misspecified_bias", est.name, cell.level, cell.bias,
            ref->bias[l] - tol.misspecified_bias, ref->bias[l] + tol.misspecified_bias);
      } else {
        add("consistent_bias", est.name, cell.level, cell.bias, -tol.consistent_bias,
            tol.consistent_bias);
      }
      if (est.name == "DR_1010")
        add("variance", est.name, cell.level, cell.emp_var, tol.variance_low * ref->emp_var[l],
            tol.variance_high * ref->emp_var[l]);
    }
  }
  return cmp;
}

// ---------------------------------------------------------------------------
// Experiment report emission

inline nlohmann::json to_json(const Comparison& cmp) {
  nlohmann::json j;
  j["skipped"] = cmp.skipped;
  if (cmp.skipped) {
    j["reason"] = cmp.reason;
    j["verdict"] = "SKIPPED";
    return j;
  }
  j["verdict"] = cmp.pass() ? "PASS" : "FAIL";
  j["checks"] = nlohmann::json::array();
  for (const auto& c : cmp.checks)
    j["checks"].push_back({{"criterion", c.criterion},
                           {"estimator", c.estimator},
                           {"level", c.level},
                           {"observed", c.observed},
                           {"lower", c.lower},
                           {"upper", c.upper},
                           {"pass", c.pass}});
  return j;
}

inline nlohmann::json to_json(const ExperimentReport& rep) {
  nlohmann::json j;
  j["n"] = rep.n;
  j["replications"] = rep.replications;
  j["seed"] = rep.seed;
  j["truth"] = rep.truth;
  j["max_solver_iterations"] = rep.max_solver_iterations;
  j["estimators"] = nlohmann::json::array();
  for (const auto& e : rep.estimators) {
    nlohmann::json row{{"name", e.name}, {"levels", nlohmann::json::array()}};
    for (const auto& c : e.levels) {
      nlohmann::json cell{{"level", c.level},
                          {"successes", c.successes},
                          {"failures", c.failures},
                          {"variance_defined", c.variance_defined}};
      // NaN is not representable in JSON; cells without successes emit null.
      cell["av_est"] = std::isfinite(c.av_est) ? nlohmann::json(c.av_est) : nlohmann::json();
      cell["emp_var"] = c.emp_var;
      cell["bias"] = std::isfinite(c.bias) ? nlohmann::json(c.bias) : nlohmann::json();
      row["levels"].push_back(std::move(cell));
    }
    j["estimators"].push_back(std::move(row));
  }
  return j;
}

namespace detail {

inline std::string fixed3(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  // Avoid "-0.000".
  if (std::string(buf) == "-0.000") return "0.000";
  return buf;
}

}  // namespace detail

/// Table-shaped CSV: `estimator,statistic,0,...,Q-1`, a Truth row first, then
/// AvEst, EmpVar and Bias rows per estimator. Values use shortest round-trip
/// formatting.
inline std::string table_csv(const ExperimentReport& rep) {
  std::ostringstream out;
  out << "estimator,statistic";
  for (std::size_t l = 0; l < rep.truth.size(); ++l) out << ',' << l;
  out << "\nTruth,Truth";
  for (double t : rep.truth) out << ',' << detail::format_real(t);
  out << '\n';
  auto cell_str = [](double v) { return std::isfinite(v) ? detail::format_real(v) : std::string("NA"); };
  for (const auto& e : rep.estimators) {
    out << e.name << ",AvEst";
    for (const auto& c : e.levels) out << ',' << cell_str(c.av_est);
    out << '\n' << e.name << ",EmpVar";
    for (const auto& c : e.levels) out << ',' << cell_str(c.emp_var);
    out << '\n' << e.name << ",Bias";
    for (const auto& c : e.levels) out << ',' << cell_str(c.bias);
    out << '\n';
  }
  return out.str();
}

/// Parsed form of table_csv output: row key "NAME/STAT" -> values per level.
inline std::map<std::string, std::vector<double>> parse_table_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("table CSV: empty");
  const auto header = detail::split_commas(line);
  if (header.size() < 3 || header[0] != "estimator" || header[1] != "statistic")
    throw ParseError("table CSV: bad header");
  for (std::size_t c = 2; c < header.size(); ++c)
    if (header[c] != std::to_string(c - 2)) throw ParseError("table CSV: bad level column");
  std::map<std::string, std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size()) throw ParseError("table CSV: ragged row");
    const std::string stat(cells[1]);
    if (stat != "Truth" && stat != "AvEst" && stat != "EmpVar" && stat != "Bias")
      throw ParseError("table CSV: unknown statistic '" + stat + "'");
    std::vector<double> vals;
    for (std::size_t c = 2; c < cells.size(); ++c) {
      if (cells[c] == "NA") {
        vals.push_back(std::nan(""));
        continue;
      }
      const auto v = detail::parse_real(cells[c]);
      if (!v) throw ParseError("table CSV: bad number '" + std::string(cells[c]) + "'");
      vals.push_back(*v);
    }
    const std::string key = std::string(cells[0]) + "/" + stat;
    if (!rows.emplace(key, std::move(vals)).second) throw ParseError("table CSV: duplicate row " + key);
  }
  return rows;
}

/// Human-readable table rounded to three decimals.
inline std::string table_text(const ExperimentReport& rep) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-10s %-8s", "", "");
  out << buf;
  for (std::size_t l = 0; l < rep.truth.size(); ++l) {
    std::snprintf(buf, sizeof(buf), " %9zu", l);
    out << buf;
  }
  out << '\n';
  auto row = [&](const std::string& a, const std::string& b, auto values) {
    std::snprintf(buf, sizeof(buf), "%-10s %-8s", a.c_str(), b.c_str());
    out << buf;
    for (double v : values) {
      std::snprintf(buf, sizeof(buf), " %9s", detail::fixed3(v).c_str());
      out << buf;
    }
    out << '\n';
  };
  row("Truth", "", rep.truth);
  for (const auto& e : rep.estimators) {
    std::vector<double> av, var, bias;
    for (const auto& c : e.levels) {
      av.push_back(c.av_est);
      var.push_back(c.emp_var);
      bias.push_back(c.bias);
    }
    row(e.name, "Av Est", av);
    row("", "Emp Var", var);
    row("", "Bias", bias);
  }
  bool flagged = false;
  for (const auto& e : rep.estimators)
    for (const auto& c : e.levels) {
      if (c.failures > 0) {
        out << "note: " << e.name << " level " << c.level << " failed in " << c.failures
            << " replication(s)\n";
      }
      flagged = flagged || !c.variance_defined;
    }
  if (flagged) out << "note: empirical variance undefined for fewer than two replications\n";
  return out.str();
}

inline std::string comparison_text(const Comparison& cmp) {
  std::ostringstream out;
  if (cmp.skipped) {
    out << "comparison: SKIPPED (" << cmp.reason << ")\n";
    return out.str();
  }
  char buf[160];
  for (const auto& c : cmp.checks) {
    std::snprintf(buf, sizeof(buf), "%-4s %-18s %-8s level %d: %.4f in [%.4f, %.4f]\n",
                  c.pass ? "ok" : "FAIL", c.criterion.c_str(), c.estimator.c_str(), c.level,
                  c.observed, c.lower, c.upper);
    out << buf;
  }
  out << "comparison: " << (cmp.pass() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Single-dataset estimate report

inline nlohmann::json to_json(const ApoEstimate& e) {
  nlohmann::json j{{"level", e.level}, {"status", e.ok() ? "ok" : "failed"}};
  j["value"] = e.ok() ? nlohmann::json(e.value) : nlohmann::json();
  j["diagnostics"] = {{"iterations", e.diagnostics.iterations},
                      {"grad_norm", e.diagnostics.grad_norm},
                      {"min_slack", e.diagnostics.min_slack},
                      {"max_moment_residual", e.diagnostics.max_moment_residual},
                      {"clamp_count", e.diagnostics.clamp_count}};
  if (!e.diagnostics.message.empty()) j["diagnostics"]["message"] = e.diagnostics.message;
  return j;
}

/// `results[e][level]` for every requested estimator; ATEs are against level 0.
inline nlohmann::json estimates_to_json(const Dataset& ds,
                                        const std::vector<std::vector<ApoEstimate>>& results) {
  nlohmann::json j;
  j["n"] = ds.size();
  j["q"] = ds.q_levels();
  j["level_labels"] = nlohmann::json::array();
  for (int l = 0; l < ds.q_levels(); ++l) j["level_labels"].push_back(std::to_string(l));
  j["group_sizes"] = nlohmann::json::array();
  for (int l = 0; l < ds.q_levels(); ++l) j["group_sizes"].push_back(treatment_group(ds, l).size());
  j["estimators"] = nlohmann::json::array();
  for (const auto& row : results) {
    if (row.empty()) continue;
    nlohmann::json e{{"name", row.front().estimator}};
    e["apo"] = nlohmann::json::array();
    for (const auto& est : row) e["apo"].push_back(to_json(est));
    e["ate_vs_0"] = nlohmann::json::array();
    for (std::size_t l = 1; l < row.size(); ++l) {
      nlohmann::json a{{"level", row[l].level}};
      a["value"] = row[l].ok() && row[0].ok() ? nlohmann::json(ate(row[l], row[0])) : nlohmann::json();
      e["ate_vs_0"].push_back(std::move(a));
    }
    j["estimators"].push_back(std::move(e));
  }
  return j;
}

inline std::string estimates_text(const std::vector<std::vector<ApoEstimate>>& results) {
  std::ostringstream out;
  char buf[96];
  for (const auto& row : results) {
    if (row.empty()) continue;
    out << row.front().estimator << '\n';
    for (const auto& e : row) {
      if (e.ok()) {
        std::snprintf(buf, sizeof(buf), "  level %d  APO %s", e.level, detail::fixed3(e.value).c_str());
        out << buf;
        if (e.level != row[0].level && row[0].ok())
          out << "  ATE vs 0 " << detail::fixed3(ate(e, row[0]));
        out << '\n';
      } else {
        out << "  level " << e.level << "  failed: " << e.diagnostics.message << '\n';
      }
    }
  }
  return out.str();
}

inline std::string estimates_csv(const std::vector<std::vector<ApoEstimate>>& results) {
  std::ostringstream out;
  out << "estimator,level,status,apo,ate_vs_0\n";
  for (const auto& row : results) {
    for (const auto& e : row) {
      out << e.estimator << ',' << e.level << ',' << (e.ok() ? "ok" : "failed") << ',';
      if (e.ok()) out << detail::format_real(e.value);
      out << ',';
      if (e.ok() && !row.empty() && row[0].ok()) out << detail::format_real(ate(e, row[0]));
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace mrest

#endif  // MREST_REPORT_HPP
