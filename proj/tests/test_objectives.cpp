#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "langevin/diagnostics.hpp"
#include "langevin/objectives.hpp"
#include "langevin/theory.hpp"
#include "test_support.hpp"

using namespace langevin;
using langevin::testing::gaussian_point;
using langevin::testing::vec;

namespace {

Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector up = x, down = x;
    up[j] += h;
    down[j] -= h;
    g[j] = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

std::vector<FiniteSumObjective> all_benchmarks() {
  return {benchmark_quadratic_1d(), benchmark_cosine_1d(), benchmark_quadratic_2d(), benchmark_cosine_2d()};
}

}  // namespace

TEST(Objectives, ComponentGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(1);
  for (const auto& obj : all_benchmarks()) {
    for (int trial = 0; trial < 20; ++trial) {
      const Vector x = gaussian_point(obj.d(), rng, 2.0);
      for (std::size_t i = 0; i < obj.n(); ++i) {
        const Vector fd = numeric_gradient([&](const Vector& y) { return obj.component_value(i, y); }, x);
        EXPECT_LT((obj.component_gradient(i, x) - fd).norm(), 1e-6);
      }
      const Vector fd = numeric_gradient([&](const Vector& y) { return obj.value(y); }, x);
      EXPECT_LT((obj.full_gradient(x) - fd).norm(), 1e-6);
    }
  }
}

TEST(Objectives, QuadraticCertificateAndMinimizer) {
  const auto obj = benchmark_quadratic_1d();
  EXPECT_EQ(obj.n(), 4u);
  EXPECT_DOUBLE_EQ(obj.certificate().M, 1.0);
  EXPECT_DOUBLE_EQ(obj.certificate().m, 0.5);
  EXPECT_DOUBLE_EQ(obj.certificate().b, 4.0);
  ASSERT_TRUE(obj.minimizer());
  EXPECT_DOUBLE_EQ((*obj.minimizer())[0], 0.0);
  // (4 + 1 + 1 + 4) / 8 by hand.
  EXPECT_DOUBLE_EQ(obj.value(vec({0.0})), 1.25);
}

TEST(Objectives, CosineCertificateMatchesOracle) {
  const auto obj = benchmark_cosine_1d();
  EXPECT_DOUBLE_EQ(obj.certificate().M, 3.0);
  EXPECT_DOUBLE_EQ(obj.certificate().m, 0.5);
  EXPECT_DOUBLE_EQ(obj.certificate().b, 0.5);
  EXPECT_FALSE(obj.certificate().G);
  EXPECT_FALSE(obj.minimizer());
}

TEST(Objectives, CosineFamilyIsNonconvex) {
  // F'' = 1 - 2 cos(2x) is -1 at the origin.
  const auto obj = benchmark_cosine_1d();
  const double h = 1e-4;
  const double second = (obj.value(vec({h})) - 2.0 * obj.value(vec({0.0})) + obj.value(vec({-h}))) / (h * h);
  EXPECT_NEAR(second, -1.0, 1e-5);
  EXPECT_LT(second, 0.0);
}

TEST(Objectives, WithMinimizerSetsGFromFormula) {
  const auto located = diagnostics::locate_minimizer(benchmark_cosine_1d());
  ASSERT_TRUE(located.minimizer());
  EXPECT_NEAR(std::abs((*located.minimizer())[0]), 0.9477471335169902, 1e-9);
  ASSERT_TRUE(located.certificate().G);
  EXPECT_NEAR(*located.certificate().G, 3.0, 1e-8);
  EXPECT_DOUBLE_EQ(*located.certificate().G, theory::g_constant(located, *located.minimizer()));
}

TEST(Objectives, MeanGradientOverAllIndicesIsBitwiseFullGradient) {
  std::mt19937_64 rng(2);
  for (const auto& obj : all_benchmarks()) {
    std::vector<std::size_t> all(obj.n());
    std::iota(all.begin(), all.end(), std::size_t{0});
    Vector a(static_cast<Eigen::Index>(obj.d())), b(a.size()), scratch(a.size());
    for (int t = 0; t < 10; ++t) {
      const Vector x = gaussian_point(obj.d(), rng, 3.0);
      obj.full_gradient_into(x, a, scratch);
      obj.mean_gradient_into(all, x, b, scratch);
      EXPECT_TRUE((a.array() == b.array()).all());
    }
  }
}

TEST(Objectives, CertificateHoldsOnBenchmarks) {
  std::mt19937_64 rng(3);
  for (const auto& raw : all_benchmarks()) {
    const auto obj = raw.minimizer() ? raw : diagnostics::locate_minimizer(raw);
    const auto report = certify(obj, 10.0, 4000, rng);
    EXPECT_TRUE(report.certified()) << to_json(report).dump();
    EXPECT_TRUE(report.gradient_bound_checked);
    EXPECT_LE(report.max_smoothness_ratio, obj.certificate().M + 1e-9);
  }
}

TEST(Objectives, CorruptedSmoothnessConstantIsCaught) {
  std::mt19937_64 rng(4);
  for (const auto& obj : all_benchmarks()) {
    Certificate bad = obj.certificate();
    bad.M /= 2.0;
    const auto report = certify(obj.with_certificate(bad), 10.0, 2000, rng);
    EXPECT_GT(report.smoothness_violations, 0u);
    EXPECT_FALSE(report.certified());
  }
}

TEST(Objectives, CorruptedDissipativityIsCaught) {
  std::mt19937_64 rng(5);
  const auto obj = benchmark_cosine_2d();
  Certificate bad = obj.certificate();
  bad.m *= 1.9;
  bad.b = 0.0;
  const auto report = certify(obj.with_certificate(bad), 10.0, 2000, rng);
  EXPECT_GT(report.dissipativity_violations, 0u);
}

TEST(Objectives, GradientBoundSkippedWithoutG) {
  std::mt19937_64 rng(6);
  const auto report = certify(benchmark_cosine_1d(), 5.0, 100, rng);
  EXPECT_FALSE(report.gradient_bound_checked);
  EXPECT_EQ(report.gradient_bound_violations, 0u);
}

TEST(Objectives, JsonRoundTripPreservesEvaluation) {
  std::mt19937_64 rng(7);
  for (const auto& obj : all_benchmarks()) {
    const auto back = objective_from_json(objective_to_json(obj));
    EXPECT_EQ(objective_to_json(back), objective_to_json(obj));
    for (int t = 0; t < 5; ++t) {
      const Vector x = gaussian_point(obj.d(), rng, 2.0);
      EXPECT_EQ(back.value(x), obj.value(x));
    }
  }
}

TEST(Objectives, JsonRejectsTamperedCertificate) {
  auto doc = objective_to_json(benchmark_cosine_2d());
  doc["certificate"]["M"] = doc["certificate"]["M"].get<double>() * 0.5;
  EXPECT_THROW(objective_from_json(doc), std::invalid_argument);
  auto shape = objective_to_json(benchmark_quadratic_1d());
  shape["n"] = 5;
  EXPECT_THROW(objective_from_json(shape), std::invalid_argument);
}

TEST(Objectives, DimensionAndConstructionErrors) {
  const auto obj = benchmark_quadratic_2d();
  EXPECT_THROW(obj.value(vec({1.0})), DimensionError);
  EXPECT_THROW(obj.component_gradient(obj.n(), vec({0.0, 0.0})), std::out_of_range);
  EXPECT_THROW(make_quadratic({}), std::invalid_argument);
  EXPECT_THROW(make_quadratic({vec({1.0}), vec({1.0, 2.0})}), DimensionError);
  EXPECT_THROW(make_cosine(0.0, 1.0, {vec({1.0})}, {vec({0.0})}), std::invalid_argument);
  EXPECT_THROW(make_cosine(1.0, 1.0, {vec({1.0})}, {}), std::invalid_argument);
}

TEST(Objectives, CosineWithZeroAmplitudeHasClosedFormMinimizer) {
  std::mt19937_64 rng(8);
  std::vector<Vector> w, c;
  for (int i = 0; i < 5; ++i) {
    w.push_back(gaussian_point(2, rng));
    c.push_back(gaussian_point(2, rng));
  }
  const auto obj = make_cosine(2.0, 0.0, w, c);
  Vector mean_c = Vector::Zero(2);
  for (const auto& ci : c) mean_c += ci;
  mean_c /= 5.0;
  const auto located = diagnostics::locate_minimizer(obj);
  EXPECT_LT((*located.minimizer() - (-mean_c / 2.0)).norm(), 1e-8);
}
