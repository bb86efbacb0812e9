#include "langevin/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "langevin/diagnostics.hpp"
#include "langevin/dynamics.hpp"
#include "langevin/harness.hpp"
#include "langevin/objectives.hpp"
#include "langevin/theory.hpp"

namespace langevin::cli {

namespace {

using nlohmann::json;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + " is not valid JSON: " + e.what());
  }
}

struct ObjectiveSource {
  std::string file;
  std::string benchmark;

  void add_to(CLI::App* app) {
    app->add_option("--objective", file, "Objective JSON file")->check(CLI::ExistingFile);
    app->add_option("--benchmark", benchmark,
                    "Built-in objective: quadratic_1d, cosine_1d, quadratic_2d, cosine_2d");
  }
  bool given() const { return !file.empty() || !benchmark.empty(); }
  FiniteSumObjective load() const {
    if (!file.empty() && !benchmark.empty()) throw UsageError("pass either --objective or --benchmark, not both");
    if (!file.empty()) return harness::objective_from_spec(read_json_file(file));
    if (!benchmark.empty()) return harness::benchmark_by_name(benchmark);
    throw UsageError("an objective is required (--objective FILE or --benchmark NAME)");
  }
};

Vector to_vector(const std::vector<double>& values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

Vector point_or_random(const std::vector<double>& given, std::size_t d, std::mt19937_64& rng,
                       const char* flag) {
  if (!given.empty()) {
    if (given.size() != d) {
      throw UsageError(std::string(flag) + " has " + std::to_string(given.size()) +
                       " coordinates, objective has d = " + std::to_string(d));
    }
    return to_vector(given);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = normal(rng);
  return v;
}

void print(std::ostream& out, const json& doc) { out << doc.dump(2) << '\n'; }

// ---- subcommands ---------------------------------------------------------

struct RunArgs {
  std::string plan;
  std::string out_dir;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
  harness::ExperimentPlan plan = harness::load_plan(a.plan);
  const auto dir = harness::resolve_output_dir(plan, a.out_dir.empty() ? std::nullopt : std::optional(a.out_dir));
  plan.output_dir = dir.string();
  const auto record = harness::run_plan(plan);
  print(out, {{"record", (dir / "record.json").string()},
              {"timing", (dir / "timing.json").string()},
              {"fingerprint", record.fingerprint},
              {"comparison", harness::to_json(harness::compare_algorithms(record))}});
  return 0;
}

struct BudgetArgs {
  double epsilon = 0.0;
  std::string config;
  ObjectiveSource objective;
  std::optional<double> beta;
  std::optional<std::size_t> n;
  std::optional<double> rho, c0, c1, c2;
};

int cmd_budget(const BudgetArgs& a, std::ostream& out) {
  theory::TheoryParams p;
  std::optional<std::size_t> n = a.n;
  if (!a.config.empty()) {
    const json doc = read_json_file(a.config);
    p = theory::theory_params_from_json(doc);
    if (!n && doc.contains("n")) n = doc.at("n").get<std::size_t>();
  } else if (a.objective.given()) {
    if (!a.beta) throw UsageError("--beta is required with an objective");
    FiniteSumObjective obj = a.objective.load();
    if (!obj.minimizer()) obj = diagnostics::locate_minimizer(obj);
    p = theory::TheoryParams::from_objective(obj, *a.beta);
    if (!n) n = obj.n();
  } else {
    throw UsageError("budget needs --config FILE or an objective");
  }
  if (a.beta) p.beta = *a.beta;
  if (a.rho) p.rho = *a.rho;
  if (a.c0) p.c0 = *a.c0;
  if (a.c1) p.c1 = *a.c1;
  if (a.c2) p.c2 = *a.c2;
  p.validate();
  if (!n) throw UsageError("the number of components is unknown; pass --n or put \"n\" in the config");
  print(out, theory::budget_report(p, *n, a.epsilon));
  return 0;
}

struct ProbeArgs {
  std::string kind = "minibatch";
  std::string mode = "exhaustive";
  std::string family = "quadratic";
  std::size_t n = 6;
  std::size_t d = 1;
  std::size_t batch = 0;
  std::size_t draws = 0;
  std::uint64_t seed = 0;
  ObjectiveSource objective;
  std::vector<double> x;
  std::vector<double> z_snapshot;
};

int cmd_probe(const ProbeArgs& a, std::ostream& out) {
  FiniteSumObjective obj = a.objective.given()
                               ? a.objective.load()
                               : harness::random_objective(parse_family(a.family), a.n, a.d, a.seed);
  if (!obj.minimizer()) obj = diagnostics::locate_minimizer(obj);
  const auto mode = diagnostics::parse_probe_mode(a.mode);
  std::mt19937_64 rng(a.seed ^ 0x9e3779b97f4a7c15ULL);
  const Vector x = point_or_random(a.x, obj.d(), rng, "--x");
  json report;
  if (a.kind == "minibatch") {
    report = diagnostics::to_json(diagnostics::minibatch_variance_probe(obj, x, a.batch, mode, a.draws, a.seed));
  } else if (a.kind == "vr") {
    const Vector z_snap = point_or_random(a.z_snapshot, obj.d(), rng, "--z-snapshot");
    report = diagnostics::to_json(diagnostics::vr_variance_probe(obj, x, z_snap, a.batch, mode, a.draws, a.seed));
    report["z_snapshot"] = vector_to_json(z_snap);
  } else {
    throw UsageError("--kind must be minibatch or vr");
  }
  report["x"] = vector_to_json(x);
  report["objective"] = objective_to_json(obj);
  print(out, report);
  return 0;
}

struct GibbsArgs {
  ObjectiveSource objective;
  double beta = 1.0;
  std::size_t points = 1024;
  std::optional<double> eta;
  std::uint64_t steps = 0;
  double burn_in_fraction = 0.1;
  std::size_t max_samples = 1000000;
  std::uint64_t seed = 0;
  std::string density_csv;
};

int cmd_gibbs(const GibbsArgs& a, std::ostream& out) {
  FiniteSumObjective obj = a.objective.load();
  if (!obj.minimizer()) obj = diagnostics::locate_minimizer(obj);
  const auto table = diagnostics::gibbs_quadrature_auto(obj, a.beta, a.points);
  const double f_star = obj.value(*obj.minimizer());
  const double mean_f = diagnostics::gibbs_expectation(table, [&](const Vector& x) { return obj.value(x); });
  theory::TheoryParams p;
  p.M = obj.certificate().M;
  p.m = obj.certificate().m;
  p.b = obj.certificate().b;
  p.beta = a.beta;
  p.d = obj.d();
  json report{{"beta", a.beta},
              {"points", a.points},
              {"box_lo", vector_to_json(table.grid.box.lo)},
              {"box_hi", vector_to_json(table.grid.box.hi)},
              {"Q", table.Q},
              {"log_Q", table.log_Q},
              {"boundary_ratio", table.boundary_ratio},
              {"x_star", vector_to_json(*obj.minimizer())},
              {"f_star", f_star},
              {"expected_F_n", mean_f},
              {"expected_gap", mean_f - f_star},
              {"R_M", theory::r_m(p)}};
  if (a.eta) {
    if (a.steps == 0) throw UsageError("--steps is required with --eta");
    if (!(a.burn_in_fraction >= 0.0 && a.burn_in_fraction < 1.0)) {
      throw UsageError("--burn-in-fraction must lie in [0, 1)");
    }
    const auto burn = static_cast<std::uint64_t>(std::floor(a.burn_in_fraction * static_cast<double>(a.steps)));
    const std::uint64_t kept = a.steps - burn;
    const std::uint64_t thin = std::max<std::uint64_t>(1, (kept + a.max_samples - 1) / a.max_samples);
    SamplerConfig config;
    config.algorithm = Algorithm::gld;
    config.eta = *a.eta;
    config.beta = a.beta;
    config.steps = a.steps;
    config.seed = a.seed;
    config.x0 = *obj.minimizer();
    SampleCollector samples(burn, thin, a.max_samples);
    Tracker* trackers[] = {&samples};
    run(config, obj, std::span<Tracker* const>(trackers));
    const auto empirical = diagnostics::empirical_density(samples.samples(), table.grid);
    report["chain"] = {{"eta", *a.eta},
                       {"steps", a.steps},
                       {"burn_in", burn},
                       {"thin", thin},
                       {"samples", samples.samples().size()},
                       {"seed", a.seed},
                       {"outside_fraction", empirical.outside_fraction},
                       {"warnings", empirical.warnings},
                       {"tv", diagnostics::total_variation(empirical, table.as_density())}};
  }
  if (!a.density_csv.empty()) {
    std::ofstream csv(a.density_csv);
    if (!csv) throw std::runtime_error("cannot write " + a.density_csv);
    table.as_density().write_csv(csv);
    report["density_csv"] = a.density_csv;
  }
  print(out, report);
  return 0;
}

struct CertifyArgs {
  ObjectiveSource objective;
  double radius = 10.0;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  bool locate = false;
};

int cmd_certify(const CertifyArgs& a, std::ostream& out) {
  FiniteSumObjective obj = a.objective.load();
  if (a.locate && !obj.minimizer()) obj = diagnostics::locate_minimizer(obj);
  std::mt19937_64 rng(a.seed);
  const auto report = certify(obj, a.radius, a.samples, rng);
  json doc = to_json(report);
  doc["certified"] = report.certified();
  doc["certificate"] = objective_to_json(obj).at("certificate");
  print(out, doc);
  return 0;
}

struct CompareArgs {
  std::string plan;
  std::vector<std::string> records;
};

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  if (a.plan.empty() == a.records.empty()) throw UsageError("compare needs exactly one of --plan or --record");
  std::vector<harness::ComparisonRow> rows;
  if (!a.plan.empty()) {
    rows = harness::compare_algorithms(harness::load_plan(a.plan));
  } else {
    std::vector<json> docs;
    for (const auto& r : a.records) docs.push_back(read_json_file(r));
    rows = harness::compare_records(docs);
  }
  print(out, {{"comparison", harness::to_json(rows)}});
  return 0;
}

void print_error(std::ostream& err, const std::string& type, const std::string& message,
                 const std::vector<std::string>& details = {}) {
  json e{{"type", type}, {"message", message}};
  if (!details.empty()) e["details"] = details;
  err << json{{"error", e}}.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Langevin samplers for finite-sum nonconvex objectives", "langevin"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Execute an experiment plan and write record.json");
  run_cmd->add_option("--plan", run_args.plan, "Experiment plan JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run_args.out_dir,
                      std::string("Output directory (default: plan output_dir, then $") + harness::kOutDirEnv + ")");

  BudgetArgs budget_args;
  auto* budget_cmd = app.add_subcommand("budget", "Theory report: constants, bounds and suggested hyperparameters");
  budget_cmd->add_option("--epsilon", budget_args.epsilon, "Target precision")->required()->check(CLI::PositiveNumber);
  budget_cmd->add_option("--config", budget_args.config, "Constants JSON {M, m, b, beta, d, G, rho, c0, c1, c2, n}")
      ->check(CLI::ExistingFile);
  budget_args.objective.add_to(budget_cmd);
  budget_cmd->add_option("--beta", budget_args.beta, "Inverse temperature (overrides the config)");
  budget_cmd->add_option("--n", budget_args.n, "Number of components (overrides the config)");
  budget_cmd->add_option("--rho", budget_args.rho, "Spectral-gap constant rho in (0, 1]");
  budget_cmd->add_option("--c0", budget_args.c0, "Absolute constant in Theta");
  budget_cmd->add_option("--c1", budget_args.c1, "Absolute constant in the stochastic and discretization terms");
  budget_cmd->add_option("--c2", budget_args.c2, "Absolute constant in the SGLD/VR-SGLD discretization term");

  ProbeArgs probe_args;
  auto* probe_cmd = app.add_subcommand("probe", "Minibatch or semi-stochastic gradient variance probe");
  probe_cmd->add_option("--kind", probe_args.kind, "minibatch or vr")->capture_default_str();
  probe_cmd->add_option("--mode", probe_args.mode, "exhaustive or montecarlo")->capture_default_str();
  probe_cmd->add_option("--family", probe_args.family, "Random objective family: quadratic or cosine")
      ->capture_default_str();
  probe_cmd->add_option("--n", probe_args.n, "Components of the random objective")->capture_default_str();
  probe_cmd->add_option("--d", probe_args.d, "Dimension of the random objective")->capture_default_str();
  probe_cmd->add_option("--batch", probe_args.batch, "Minibatch size B")->required();
  probe_cmd->add_option("--draws", probe_args.draws, "Subsets drawn in montecarlo mode");
  probe_cmd->add_option("--seed", probe_args.seed, "Seed for the random objective, point and draws")
      ->capture_default_str();
  probe_args.objective.add_to(probe_cmd);
  probe_cmd->add_option("--x", probe_args.x, "Probe point (z for vr), comma separated")->delimiter(',');
  probe_cmd->add_option("--z-snapshot", probe_args.z_snapshot, "Snapshot point for vr, comma separated")
      ->delimiter(',');

  GibbsArgs gibbs_args;
  auto* gibbs_cmd = app.add_subcommand("gibbs-check", "Gibbs quadrature, almost-minimizer gap and optional chain TV");
  gibbs_args.objective.add_to(gibbs_cmd);
  gibbs_cmd->add_option("--beta", gibbs_args.beta, "Inverse temperature")->required()->check(CLI::PositiveNumber);
  gibbs_cmd->add_option("--points", gibbs_args.points, "Quadrature points per axis")->capture_default_str();
  gibbs_cmd->add_option("--eta", gibbs_args.eta, "Run a GLD chain with this step size and report TV");
  gibbs_cmd->add_option("--steps", gibbs_args.steps, "Chain length");
  gibbs_cmd->add_option("--burn-in-fraction", gibbs_args.burn_in_fraction, "Discarded prefix of the chain")
      ->capture_default_str();
  gibbs_cmd->add_option("--max-samples", gibbs_args.max_samples, "Thin the kept path to at most this many samples")
      ->capture_default_str();
  gibbs_cmd->add_option("--seed", gibbs_args.seed, "Chain seed")->capture_default_str();
  gibbs_cmd->add_option("--density-csv", gibbs_args.density_csv, "Write the Gibbs density table as CSV");

  CertifyArgs certify_args;
  auto* certify_cmd = app.add_subcommand("certify", "Sampled falsification of the smoothness/dissipativity certificate");
  certify_args.objective.add_to(certify_cmd);
  certify_cmd->add_option("--radius", certify_args.radius, "Ball radius")->capture_default_str();
  certify_cmd->add_option("--samples", certify_args.samples, "Sample pairs")->capture_default_str();
  certify_cmd->add_option("--seed", certify_args.seed, "Sampling seed")->capture_default_str();
  certify_cmd->add_flag("--locate-minimizer", certify_args.locate, "Locate x* first so the gradient bound is checked");

  CompareArgs compare_args;
  auto* compare_cmd = app.add_subcommand("compare", "Gradient evaluations vs final gap, per sampler config");
  compare_cmd->add_option("--plan", compare_args.plan, "Plan to run (no files written)")->check(CLI::ExistingFile);
  compare_cmd->add_option("--record", compare_args.records, "record.json files to tabulate")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  // Subcommand help is raised before any callback runs, so dispatch here.
  try {
    if (run_cmd->parsed()) return cmd_run(run_args, out);
    if (budget_cmd->parsed()) return cmd_budget(budget_args, out);
    if (probe_cmd->parsed()) return cmd_probe(probe_args, out);
    if (gibbs_cmd->parsed()) return cmd_gibbs(gibbs_args, out);
    if (certify_cmd->parsed()) return cmd_certify(certify_args, out);
    if (compare_cmd->parsed()) return cmd_compare(compare_args, out);
    print_error(err, "usage", "no subcommand given");
    return 2;
  } catch (const UsageError& e) {
    print_error(err, "usage", e.what());
    return 2;
  } catch (const harness::PlanValidationError& e) {
    print_error(err, "plan_validation", "invalid experiment plan", e.errors());
    return 1;
  } catch (const ConfigError& e) {
    print_error(err, "config_validation", "invalid sampler config", e.errors());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "runtime", e.what());
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("langevin");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace langevin::cli
