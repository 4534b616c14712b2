// Command-line front end: simulate, estimate, reproduce-table1.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mrest/mrest.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitStrict = 3;

void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mrest::Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw mrest::Error("error while writing '" + path + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

Eigen::Vector3d parse_ps_coef(const std::vector<double>& v) {
  if (v.size() != 3) throw mrest::ParseError("--ps-coef takes exactly three values");
  return {v[0], v[1], v[2]};
}

struct SimulateArgs {
  int n = 10000;
  std::uint64_t seed = 1;
  std::string output;
  std::vector<double> ps_coef;
};

int cmd_simulate(const SimulateArgs& a) {
  mrest::DgpSpec dgp;
  dgp.n = a.n;
  if (!a.ps_coef.empty()) dgp.ps_coefficients = parse_ps_coef(a.ps_coef);
  const auto ds = mrest::simulate_dataset(dgp, a.seed);
  std::ostringstream out;
  mrest::write_csv(out, ds);
  write_output(a.output, out.str());
  return 0;
}

struct EstimateArgs {
  std::string input;
  std::optional<int> q;
  std::string models;
  std::string estimators;
  std::string format = "json";
  std::string output;
  bool strict = false;
};

int cmd_estimate(const EstimateArgs& a) {
  const auto ds = mrest::load_csv(a.input, a.q);
  const int trials = ds.q_levels() - 1;
  const mrest::ModelFamily family =
      a.models.empty() ? mrest::default_family(trials) : mrest::load_model_family(a.models, trials);

  std::vector<std::string> names = split_list(a.estimators);
  if (names.empty()) {
    if (family.ps.size() == 2 && family.outcome.size() == 2) {
      names = mrest::table1_estimator_names();
    } else {
      names.push_back("MR_" + std::string(family.ps.size() + family.outcome.size(), '1'));
    }
  }
  std::vector<mrest::EstimatorSpec> specs;
  for (const auto& name : names)
    specs.push_back(mrest::parse_estimator(name, family.ps.size(), family.outcome.size()));

  const auto models = mrest::fit_models(ds, family);
  std::vector<std::vector<mrest::ApoEstimate>> results;
  bool any_failed = false;
  for (const auto& spec : specs) {
    auto& row = results.emplace_back();
    for (int level = 0; level < ds.q_levels(); ++level) {
      row.push_back(mrest::estimate(ds, models, spec, level));
      any_failed = any_failed || !row.back().ok();
    }
  }

  std::string text;
  if (a.format == "json") {
    auto j = mrest::estimates_to_json(ds, results);
    j["models"] = mrest::model_family_to_json(family);
    text = j.dump(2) + "\n";
  } else if (a.format == "csv") {
    text = mrest::estimates_csv(results);
  } else {
    text = mrest::estimates_text(results);
  }
  write_output(a.output, text);
  return a.strict && any_failed ? kExitStrict : 0;
}

struct ReproduceArgs {
  int n = 10000;
  std::uint64_t seed = mrest::ExperimentConfig{}.seed;
  int replications = 200;
  bool full = false;
  int workers = 1;
  std::string models;
  std::string format = "table";
  std::string output;
  bool strict = false;
  std::vector<double> ps_coef;
};

int cmd_reproduce_table1(const ReproduceArgs& a) {
  auto cfg = mrest::table1_config();
  cfg.dgp.n = a.n;
  if (!a.ps_coef.empty()) cfg.dgp.ps_coefficients = parse_ps_coef(a.ps_coef);
  cfg.seed = a.seed;
  cfg.replications = a.full ? 1000 : a.replications;
  cfg.workers = a.workers;
  if (!a.models.empty()) {
    cfg.family = mrest::load_model_family(a.models, cfg.dgp.trials);
    cfg.estimators.clear();
    for (const auto& name : mrest::table1_estimator_names())
      cfg.estimators.push_back(
          mrest::parse_estimator(name, cfg.family.ps.size(), cfg.family.outcome.size()));
  }

  const auto rep = mrest::run_experiment(cfg);
  const auto cmp = mrest::compare_to_reference(rep);

  std::string text;
  if (a.format == "json") {
    auto j = mrest::to_json(rep);
    j["comparison"] = mrest::to_json(cmp);
    text = j.dump(2) + "\n";
  } else if (a.format == "csv") {
    text = mrest::table_csv(rep);
  } else {
    text = mrest::table_text(rep);
  }
  write_output(a.output, text);
  if (a.format != "json") std::cerr << mrest::comparison_text(cmp);

  bool any_failed = false;
  for (const auto& e : rep.estimators)
    for (const auto& c : e.levels) any_failed = any_failed || c.failures > 0;
  const bool verdict_ok = cmp.skipped || cmp.pass();
  return a.strict && (any_failed || !verdict_ok) ? kExitStrict : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiply robust and doubly robust estimation of average potential outcomes"};
  app.require_subcommand(1);
  const std::vector<std::string> formats{"json", "csv", "table"};
  const int hw = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Write a dataset drawn from the simulation design");
  simulate->add_option("--n", sim.n, "Sample size")->check(CLI::Range(1, 100000000));
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("-o,--output", sim.output, "Output CSV (default: stdout)");
  simulate->add_option("--ps-coef", sim.ps_coef, "Treatment logit coefficients for (1, x, x^2)")
      ->delimiter(',')
      ->expected(3);

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Estimate average potential outcomes from a CSV");
  estimate->add_option("input", est.input, "Dataset CSV with columns y,d,x1..xp")->required();
  estimate->add_option("--q", est.q, "Number of treatment levels (default 1 + max d)")
      ->check(CLI::Range(2, 1000000));
  estimate->add_option("--models", est.models, "Model-family JSON (default: built-in family)");
  estimate->add_option("--estimators", est.estimators, "Comma-separated estimator names, e.g. MR_1111,DR_1010");
  estimate->add_option("--format", est.format, "Output format")->check(CLI::IsMember(formats));
  estimate->add_option("-o,--output", est.output, "Output path (default: stdout)");
  estimate->add_flag("--strict", est.strict, "Exit non-zero if any estimate failed");

  ReproduceArgs rt;
  rt.workers = hw;
  auto* reproduce =
      app.add_subcommand("reproduce-table1", "Run the Monte Carlo study and compare with reference values");
  reproduce->add_option("--n", rt.n, "Sample size per replication")->check(CLI::Range(1, 100000000));
  reproduce->add_option("--seed", rt.seed, "Base seed");
  auto* reps = reproduce->add_option("--replications", rt.replications, "Number of replications")
                   ->check(CLI::Range(1, 1000000));
  reproduce->add_flag("--full", rt.full, "Use 1000 replications")->excludes(reps);
  reproduce->add_option("--workers", rt.workers, "Worker threads")->check(CLI::Range(1, 4096));
  reproduce->add_option("--models", rt.models, "Model-family JSON with two PS and two OR models");
  reproduce->add_option("--format", rt.format, "Output format")->check(CLI::IsMember(formats));
  reproduce->add_option("-o,--output", rt.output, "Output path (default: stdout)");
  reproduce->add_flag("--strict", rt.strict, "Exit non-zero on failed cells or a failed comparison");
  reproduce->add_option("--ps-coef", rt.ps_coef, "Treatment logit coefficients for (1, x, x^2)")
      ->delimiter(',')
      ->expected(3);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (estimate->parsed()) return cmd_estimate(est);
    if (reproduce->parsed()) return cmd_reproduce_table1(rt);
  } catch (const mrest::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
