#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "langevin/harness.hpp"
#include "langevin/theory.hpp"

using namespace langevin;
using namespace langevin::harness;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal_plan() {
  return json::parse(R"({
    "schema_version": 1,
    "objective": {"benchmark": "quadratic_1d"},
    "samplers": [{"algorithm": "gld", "eta": 0.05, "beta": 2.0, "steps": 200}]
  })");
}

json sampler(const std::string& name, const std::string& algorithm, std::uint64_t steps,
             std::size_t batch = 0, std::size_t epoch_len = 0) {
  json s{{"name", name}, {"algorithm", algorithm}, {"eta", 0.05}, {"beta", 2.0}, {"steps", steps}};
  if (batch) s["batch"] = batch;
  if (epoch_len) s["epoch_len"] = epoch_len;
  return s;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("langevin_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string joined(const PlanValidationError& e) {
  std::string out;
  for (const auto& s : e.errors()) out += s + "\n";
  return out;
}

}  // namespace

TEST(Plan, MinimalPlanParsesAndFingerprintSurvivesReserialization) {
  const auto plan = parse_plan(minimal_plan());
  ASSERT_EQ(plan.samplers.size(), 1u);
  EXPECT_EQ(plan.samplers[0].config.algorithm, Algorithm::gld);
  EXPECT_EQ(plan.replications.count, 1u);
  const auto again = parse_plan(plan.to_json().dump());
  EXPECT_EQ(again.fingerprint(), plan.fingerprint());
  EXPECT_EQ(again.to_json(), plan.to_json());
  EXPECT_EQ(plan.fingerprint().size(), 64u);
}

TEST(Plan, FingerprintTracksContentOnly) {
  auto doc = minimal_plan();
  const auto base = parse_plan(doc).fingerprint();
  doc["output_dir"] = "/somewhere/else";
  EXPECT_EQ(parse_plan(doc).fingerprint(), base);
  doc["samplers"][0]["eta"] = 0.04;
  EXPECT_NE(parse_plan(doc).fingerprint(), base);
}

TEST(Plan, BatchAboveNNamesFieldAndBothValues) {
  auto doc = minimal_plan();
  doc["samplers"][0] = sampler("s", "sgld", 100, 5);
  try {
    parse_plan(doc);
    FAIL() << "expected PlanValidationError";
  } catch (const PlanValidationError& e) {
    const std::string msg = joined(e);
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4"), std::string::npos) << msg;
  }
}

TEST(Plan, VrEpochMustDivideSteps) {
  auto doc = minimal_plan();
  doc["samplers"][0] = sampler("vr", "vrsgld", 10, 2, 3);
  try {
    parse_plan(doc);
    FAIL() << "expected PlanValidationError";
  } catch (const PlanValidationError& e) {
    const std::string msg = joined(e);
    EXPECT_NE(msg.find("divisible"), std::string::npos) << msg;
    EXPECT_NE(msg.find("10"), std::string::npos) << msg;
    EXPECT_NE(msg.find("3"), std::string::npos) << msg;
  }
}

TEST(Plan, AllErrorsAreCollected) {
  auto doc = minimal_plan();
  doc["samplers"] = json::array({sampler("a", "sgld", 100, 9), sampler("b", "vrsgld", 10, 2, 3)});
  doc["samplers"][0]["eta"] = -1.0;
  doc["bogus"] = 1;
  try {
    parse_plan(doc);
    FAIL() << "expected PlanValidationError";
  } catch (const PlanValidationError& e) {
    EXPECT_GE(e.errors().size(), 4u) << joined(e);
    const std::string msg = joined(e);
    EXPECT_NE(msg.find("samplers[0] (a)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("samplers[1] (b)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
  }
}

TEST(Plan, SchemaViolations) {
  EXPECT_THROW(parse_plan(std::string("{not json")), std::invalid_argument);
  auto doc = minimal_plan();
  doc["schema_version"] = 2;
  EXPECT_THROW(parse_plan(doc), PlanValidationError);
  doc = minimal_plan();
  doc.erase("samplers");
  EXPECT_THROW(parse_plan(doc), PlanValidationError);
  doc = minimal_plan();
  doc["samplers"][0]["steps"] = "many";
  EXPECT_THROW(parse_plan(doc), PlanValidationError);
  doc = minimal_plan();
  doc["objective"] = {{"benchmark", "no_such_thing"}};
  EXPECT_THROW(parse_plan(doc), PlanValidationError);
  for (const char* section : {"diagnostics", "trackers", "replications"}) {
    doc = minimal_plan();
    doc[section] = 3;
    try {
      parse_plan(doc);
      ADD_FAILURE() << section;
    } catch (const PlanValidationError& e) {
      EXPECT_NE(joined(e).find(std::string(section) + " must be an object"), std::string::npos) << joined(e);
    }
  }
  EXPECT_THROW(parse_plan(json::array()), PlanValidationError);
}

TEST(Plan, ReplicaSeedsFollowBasePlusIndex) {
  auto doc = minimal_plan();
  doc["replications"] = {{"count", 3}, {"base_seed", 41}};
  const auto plan = parse_plan(doc);
  EXPECT_EQ(plan.replications.seed(0), 41u);
  EXPECT_EQ(plan.replications.seed(2), 43u);
}

TEST(Run, TwoReplicasRunTwiceGiveByteIdenticalRecords) {
  auto doc = minimal_plan();
  doc["replications"] = {{"count", 2}, {"base_seed", 7}};
  doc["trackers"] = {{"moments", true}, {"trace", {{"stride", 10}}}};
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  doc["output_dir"] = a.string();
  run_plan(parse_plan(doc));
  doc["output_dir"] = b.string();
  run_plan(parse_plan(doc));
  EXPECT_EQ(read_file(a / "record.json"), read_file(b / "record.json"));
  EXPECT_FALSE(read_file(a / "record.json").empty());
  for (const char* run : {"runs/GLD_0_r0.csv", "runs/GLD_0_r1.csv"}) {
    EXPECT_EQ(read_file(a / run), read_file(b / run)) << run;
  }
  EXPECT_TRUE(fs::exists(a / "timing.json"));
  EXPECT_EQ(read_file(a / "runs/GLD_0_r0.csv").substr(0, 24), "k,F_n,norm_sq,grad_evals");
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Run, GldAndFullBatchSgldGiveIdenticalGaps) {
  auto doc = minimal_plan();
  doc["objective"] = {{"benchmark", "cosine_2d"}};
  const std::size_t n = benchmark_cosine_2d().n();
  doc["samplers"] = json::array({sampler("gld", "gld", 300), sampler("sgld", "sgld", 300, n)});
  doc["replications"] = {{"count", 3}, {"base_seed", 11}};
  const auto record = run_plan(parse_plan(doc), RunOptions{false});
  ASSERT_EQ(record.configs.size(), 2u);
  for (std::size_t r = 0; r < 3; ++r) {
    ASSERT_TRUE(record.configs[0].replicas[r].gap);
    EXPECT_EQ(*record.configs[0].replicas[r].gap, *record.configs[1].replicas[r].gap);
  }
}

TEST(Run, AggregateMatchesHandAverage) {
  auto doc = minimal_plan();
  doc["replications"] = {{"count", 5}, {"base_seed", 3}};
  const auto record = run_plan(parse_plan(doc), RunOptions{false});
  const auto& c = record.configs[0];
  double sum = 0.0;
  for (const auto& r : c.replicas) sum += *r.gap;
  const double mean = sum / 5.0;
  double ss = 0.0;
  for (const auto& r : c.replicas) ss += (*r.gap - mean) * (*r.gap - mean);
  EXPECT_NEAR(c.mean_gap, mean, 1e-15);
  EXPECT_NEAR(c.std_gap, std::sqrt(ss / 4.0), 1e-15);
  const json doc_out = record.to_json();
  EXPECT_EQ(doc_out["configs"][0]["aggregate"]["mean_gap"].get<double>(), c.mean_gap);
}

TEST(Run, AggregateSkipsFailedReplicas) {
  ConfigResult c;
  for (int i = 0; i < 3; ++i) {
    ReplicaResult r;
    r.replica = static_cast<std::size_t>(i);
    if (i == 1) r.error = "boom"; else r.gap = 1.0 + i;
    c.replicas.push_back(r);
  }
  aggregate(c);
  EXPECT_EQ(c.failures, 1u);
  EXPECT_DOUBLE_EQ(c.mean_gap, 2.0);
  EXPECT_DOUBLE_EQ(c.std_gap, std::sqrt(2.0));
}

TEST(Run, FailingConfigDoesNotAbortSiblings) {
  auto plan = parse_plan(minimal_plan());
  SamplerSpec bad = plan.samplers[0];
  bad.name = "bad";
  bad.config.eta = -1.0;  // bypasses parse-time validation
  plan.samplers.push_back(bad);
  const auto record = run_plan(plan, RunOptions{false});
  ASSERT_EQ(record.configs.size(), 2u);
  EXPECT_EQ(record.configs[0].failures, 0u);
  EXPECT_EQ(record.configs[1].failures, 1u);
  ASSERT_TRUE(record.configs[1].replicas[0].error);
  EXPECT_NE(record.configs[1].replicas[0].error->find("eta"), std::string::npos);
}

TEST(Run, FailingDiagnosticLeavesRunCsvsIntact) {
  // Quadrature is limited to d <= 2; the plan is built directly to get past parse-time checks.
  json doc{{"schema_version", 1},
           {"objective", objective_to_json(make_quadratic({Vector::Zero(3), Vector::Ones(3)}))},
           {"samplers", json::array({sampler("gld", "gld", 50)})},
           {"trackers", {{"trace", {{"stride", 5}}}}}};
  const fs::path clean = scratch_dir("crash_clean"), broken = scratch_dir("crash_broken");
  doc["output_dir"] = clean.string();
  run_plan(parse_plan(doc));
  doc["output_dir"] = broken.string();
  auto plan = parse_plan(doc);
  plan.diagnostics.gibbs = GibbsRequest{{1.0}, 64};
  const auto record = run_plan(plan);
  ASSERT_TRUE(record.diagnostics.contains("gibbs"));
  EXPECT_TRUE(record.diagnostics["gibbs"][0].contains("error"));
  EXPECT_FALSE(read_file(clean / "runs/gld_r0.csv").empty());
  EXPECT_EQ(read_file(clean / "runs/gld_r0.csv"), read_file(broken / "runs/gld_r0.csv"));
  EXPECT_TRUE(fs::exists(broken / "record.json"));
  fs::remove_all(clean);
  fs::remove_all(broken);
}

TEST(Run, DiagnosticsAttachGibbsProbeAndBudget) {
  auto doc = minimal_plan();
  doc["diagnostics"] = json::parse(R"({
    "gibbs": {"betas": [1.0], "points": 2001},
    "probes": [{"kind": "minibatch", "batch": 2, "x": [0.3]},
               {"kind": "vr", "batch": 2, "x": [0.3], "z_snapshot": [-0.2]}],
    "budget": {"epsilon": 0.5}
  })");
  const auto record = run_plan(parse_plan(doc), RunOptions{false});
  const json& g = record.diagnostics["gibbs"][0];
  EXPECT_NEAR(g["expected_gap"].get<double>(), 0.5, 1e-6);
  const json& mb = record.diagnostics["probes"][0]["report"];
  EXPECT_NEAR(mb["ratio"].get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(record.diagnostics["probes"][1]["report"]["within_bound"].get<bool>());
  EXPECT_TRUE(record.diagnostics["budget"].is_object());
  EXPECT_FALSE(record.diagnostics["budget"].contains("error"));
}

TEST(Run, OutputDirectoryPrecedence) {
  auto plan = parse_plan(minimal_plan());
  ::setenv(kOutDirEnv, "/tmp/from_env", 1);
  EXPECT_EQ(resolve_output_dir(plan, std::nullopt), fs::path("/tmp/from_env"));
  plan.output_dir = "/tmp/from_plan";
  EXPECT_EQ(resolve_output_dir(plan, std::nullopt), fs::path("/tmp/from_plan"));
  EXPECT_EQ(resolve_output_dir(plan, std::string("/tmp/override")), fs::path("/tmp/override"));
  ::unsetenv(kOutDirEnv);
  plan.output_dir.clear();
  EXPECT_EQ(resolve_output_dir(plan, std::nullopt), fs::path("langevin_out"));
}

TEST(Compare, IdenticalConfigsGiveIdenticalRows) {
  auto doc = minimal_plan();
  doc["samplers"] = json::array({sampler("a", "sgld", 200, 2), sampler("b", "sgld", 200, 2)});
  doc["replications"] = {{"count", 2}, {"base_seed", 5}};
  const auto rows = compare_algorithms(parse_plan(doc));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].grad_evals, rows[1].grad_evals);
  EXPECT_EQ(rows[0].mean_gap, rows[1].mean_gap);
  EXPECT_EQ(rows[0].std_gap, rows[1].std_gap);
}

TEST(Compare, HalfBatchDoubleStepsSpendsSameGradients) {
  auto doc = minimal_plan();
  const std::uint64_t K = 150;
  doc["samplers"] = json::array({sampler("gld", "gld", K), sampler("sgld", "sgld", 2 * K, 2)});
  const auto rows = compare_algorithms(parse_plan(doc));
  EXPECT_EQ(rows[0].grad_evals, 4u * K);
  EXPECT_EQ(rows[0].grad_evals, rows[1].grad_evals);
}

TEST(Compare, VrRowMatchesTheoryComplexity) {
  auto doc = minimal_plan();
  doc["samplers"] = json::array({sampler("gld", "gld", 120), sampler("vr", "vrsgld", 120, 2, 6)});
  const auto rows = compare_algorithms(parse_plan(doc));
  EXPECT_EQ(rows[1].grad_evals, theory::gradient_complexity(Algorithm::vrsgld, 4, 120, 2, 6));
  EXPECT_EQ(rows[1].grad_evals, 2u * 120u + 4u * 20u);
}

TEST(Compare, NeedsTwoConfigsAndMatchingObjectives) {
  EXPECT_THROW(compare_algorithms(parse_plan(minimal_plan())), std::invalid_argument);
  auto a = run_plan(parse_plan(minimal_plan()), RunOptions{false}).to_json();
  auto other = minimal_plan();
  other["objective"] = {{"benchmark", "cosine_1d"}};
  auto b = run_plan(parse_plan(other), RunOptions{false}).to_json();
  EXPECT_THROW(compare_records({a, b}), std::invalid_argument);
  const auto rows = compare_records({a, a});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].grad_evals, 800u);
  EXPECT_EQ(*rows[0].mean_gap, *rows[1].mean_gap);
}

TEST(Compare, RecordRowsMatchInMemoryRows) {
  auto doc = minimal_plan();
  doc["samplers"] = json::array({sampler("gld", "gld", 100), sampler("vr", "vrsgld", 100, 2, 5)});
  doc["replications"] = {{"count", 2}, {"base_seed", 1}};
  const auto record = run_plan(parse_plan(doc), RunOptions{false});
  EXPECT_EQ(to_json(compare_algorithms(record)), to_json(compare_records({record.to_json()})));
}

TEST(Hash, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
