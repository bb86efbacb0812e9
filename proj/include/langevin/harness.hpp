#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "langevin/diagnostics.hpp"
#include "langevin/dynamics.hpp"
#include "langevin/objectives.hpp"

namespace langevin::harness {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kOutDirEnv = "LANGEVIN_OUT_DIR";

struct SamplerSpec {
  std::string name;
  SamplerConfig config;  // seed is assigned per replica
};

struct Replications {
  std::size_t count = 1;
  std::uint64_t base_seed = 0;

  std::uint64_t seed(std::size_t replica) const { return base_seed + replica; }
};

struct TrackerRequest {
  bool moments = false;
  std::optional<std::uint64_t> trace_stride;  // per-run CSV when set
};

struct GibbsRequest {
  std::vector<double> betas;  // empty: the distinct sampler betas
  std::size_t points = 1024;
};

struct ProbeRequest {
  enum class Kind { minibatch, vr } kind = Kind::minibatch;
  std::size_t batch = 1;
  diagnostics::ProbeMode mode = diagnostics::ProbeMode::exhaustive;
  std::size_t draws = 0;
  std::uint64_t seed = 0;
  Vector x;           // probe point (z for the VR probe)
  Vector z_snapshot;  // VR probe only
};

struct BudgetRequest {
  double epsilon = 0.1;
  std::optional<double> beta;  // defaults to the first sampler's beta
  double rho = 0.5;
  double c0 = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
};

struct DiagnosticRequests {
  std::optional<GibbsRequest> gibbs;
  std::vector<ProbeRequest> probes;
  std::optional<BudgetRequest> budget;
};

struct ExperimentPlan {
  int schema_version = kSchemaVersion;
  std::shared_ptr<const FiniteSumObjective> objective;
  std::vector<SamplerSpec> samplers;
  Replications replications;
  TrackerRequest trackers;
  DiagnosticRequests diagnostics;
  std::string output_dir;  // not part of the fingerprint

  /// Normalized plan document, every default spelled out.
  nlohmann::json to_json(bool include_output_dir = true) const;
  /// SHA-256 (hex) of the normalized document without output_dir.
  std::string fingerprint() const;
};

class PlanValidationError : public std::invalid_argument {
 public:
  explicit PlanValidationError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Collects every schema and cross-field violation before throwing.
ExperimentPlan parse_plan(const std::string& text);
ExperimentPlan parse_plan(const nlohmann::json& doc);
ExperimentPlan load_plan(const std::filesystem::path& path);

/// Objective document: either the objectives JSON schema or {"benchmark": name}
/// with name in quadratic_1d, cosine_1d, quadratic_2d, cosine_2d.
FiniteSumObjective objective_from_spec(const nlohmann::json& doc);
FiniteSumObjective benchmark_by_name(const std::string& name);

/// Random instances for the probe CLI: quadratic anchors ~ N(0, 1); cosine with
/// m0 = 1, A = 0.5, |w_i| = 2 in random directions, c_i ~ N(0, 0.25^2).
FiniteSumObjective random_objective(Family family, std::size_t n, std::size_t d, std::uint64_t seed);

struct ReplicaResult {
  std::size_t replica = 0;
  std::uint64_t seed = 0;
  std::optional<double> gap;  // F_n(X_K) - F_n(x*)
  double final_value = 0.0;
  std::uint64_t grad_evals = 0;
  double wall_seconds = 0.0;
  std::vector<nlohmann::json> trackers;
  std::optional<std::string> trace_csv;  // relative to the output directory
  std::optional<std::string> error;
};

struct ConfigResult {
  SamplerSpec spec;
  std::vector<ReplicaResult> replicas;
  double mean_gap = 0.0;
  double std_gap = 0.0;  // sample standard deviation, 0 for a single replica
  std::size_t failures = 0;
};

struct RunRecord {
  std::string fingerprint;
  nlohmann::json objective;
  std::optional<Vector> x_star;
  std::optional<double> f_star;
  std::vector<ConfigResult> configs;
  nlohmann::json diagnostics = nlohmann::json::object();
  std::vector<std::string> errors;  // plan-level failures (x* location)

  /// Deterministic record; no wall-clock fields.
  nlohmann::json to_json() const;
  /// Per-replica wall times, kept apart so record.json is reproducible.
  nlohmann::json timing_json() const;
};

/// Mean and sample standard deviation of the successful replica gaps.
void aggregate(ConfigResult& result);

struct RunOptions {
  bool write_outputs = true;
};

/// Runs every replica of every sampler, then the requested diagnostics.
/// With write_outputs, creates the output directory first, writes run CSVs as
/// runs finish, then record.json and timing.json.
RunRecord run_plan(const ExperimentPlan& plan, const RunOptions& options = {});

/// Output directory precedence: explicit override, plan.output_dir,
/// $LANGEVIN_OUT_DIR, then "langevin_out".
std::filesystem::path resolve_output_dir(const ExperimentPlan& plan,
                                         const std::optional<std::string>& override_dir);

struct ComparisonRow {
  std::string name;
  Algorithm algorithm = Algorithm::gld;
  std::size_t batch = 0;
  std::size_t epoch_len = 0;
  std::uint64_t steps = 0;
  std::uint64_t grad_evals = 0;
  std::optional<double> mean_gap;
  double std_gap = 0.0;
  std::size_t replicas = 0;
  std::size_t failures = 0;
};

/// Measurements only; rows keep the plan order.
std::vector<ComparisonRow> compare_algorithms(const RunRecord& record);
/// Runs the plan without writing outputs. Needs at least two samplers.
std::vector<ComparisonRow> compare_algorithms(const ExperimentPlan& plan);
/// Concatenates the tables of several record.json documents. Throws when
/// their objectives differ.
std::vector<ComparisonRow> compare_records(const std::vector<nlohmann::json>& records);

nlohmann::json to_json(const std::vector<ComparisonRow>& rows);

std::string sha256_hex(const std::string& bytes);

}  // namespace langevin::harness
