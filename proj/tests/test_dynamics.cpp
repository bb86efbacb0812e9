#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "langevin/diagnostics.hpp"
#include "langevin/dynamics.hpp"
#include "langevin/theory.hpp"
#include "test_support.hpp"

using namespace langevin;
using langevin::testing::gaussian_point;
using langevin::testing::vec;

namespace {

// Fixed Gaussian vector and a queue of scripted subsets.
class StubNoise final : public NoiseSource {
 public:
  explicit StubNoise(Vector eps, std::deque<std::vector<std::size_t>> subsets = {})
      : eps_(std::move(eps)), subsets_(std::move(subsets)) {}

  void gaussian(Vector& out) override { out = eps_; }
  void minibatch(std::size_t n, std::size_t batch, std::vector<std::size_t>& out) override {
    if (subsets_.empty()) {
      out.resize(n);
      std::iota(out.begin(), out.end(), std::size_t{0});
      out.resize(batch);
      return;
    }
    out = subsets_.front();
    subsets_.pop_front();
  }

 private:
  Vector eps_;
  std::deque<std::vector<std::size_t>> subsets_;
};

FiniteSumObjective origin_quadratic() { return make_quadratic({vec({0.0})}); }
FiniteSumObjective pair_quadratic() { return make_quadratic({vec({-1.0}), vec({1.0})}); }

SamplerConfig config(Algorithm a, double eta, std::uint64_t steps, std::size_t batch = 0, std::size_t epoch_len = 0,
                     std::uint64_t seed = 42) {
  SamplerConfig c;
  c.algorithm = a;
  c.eta = eta;
  c.beta = 2.0;
  c.steps = steps;
  c.batch = batch;
  c.epoch_len = epoch_len;
  c.seed = seed;
  return c;
}

std::vector<Vector> trajectory(const SamplerConfig& c, const FiniteSumObjective& obj) {
  struct Path final : Tracker {
    std::vector<Vector> xs;
    void observe(const ChainState& s, const FiniteSumObjective&) override { xs.push_back(s.x); }
    std::string name() const override { return "path"; }
    nlohmann::json summary() const override { return {}; }
  } path;
  Tracker* trackers[] = {&path};
  run(c, obj, std::span<Tracker* const>(trackers));
  return path.xs;
}

bool bitwise_equal(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!(a[k].array() == b[k].array()).all()) return false;
  }
  return true;
}

}  // namespace

TEST(GldStep, ZeroNoiseIsGradientDescent) {
  auto state = ChainState::at(vec({1.0}));
  StubNoise noise(vec({0.0}));
  gld_step(state, origin_quadratic(), 0.1, 1.0, noise);
  EXPECT_DOUBLE_EQ(state.x[0], 0.9);
  EXPECT_EQ(state.k, 1u);
  EXPECT_EQ(state.grad_evals, 1u);
}

TEST(GldStep, ZeroStepSizeLeavesIterate) {
  auto state = ChainState::at(vec({0.37}));
  StubNoise noise(vec({5.0}));
  gld_step(state, origin_quadratic(), 0.0, 1.0, noise);
  EXPECT_EQ(state.x[0], 0.37);
}

TEST(GldStep, NoiseScale) {
  auto state = ChainState::at(vec({0.0}));
  StubNoise noise(vec({1.0}));
  gld_step(state, origin_quadratic(), 0.5, 2.0, noise);
  EXPECT_NEAR(state.x[0], 0.7071067811865476, 1e-15);
}

TEST(GldStep, RejectsBadArguments) {
  auto state = ChainState::at(vec({0.0}));
  StubNoise noise(vec({0.0}));
  EXPECT_THROW(gld_step(state, origin_quadratic(), -0.1, 1.0, noise), std::invalid_argument);
  EXPECT_THROW(gld_step(state, origin_quadratic(), 0.1, 0.0, noise), std::invalid_argument);
  auto wrong = ChainState::at(vec({0.0, 0.0}));
  EXPECT_THROW(gld_step(wrong, origin_quadratic(), 0.1, 1.0, noise), DimensionError);
}

TEST(SgldStep, SingleIndexHandArithmetic) {
  auto state = ChainState::at(vec({0.0}));
  StubNoise noise(vec({0.0}), {{0}});
  sgld_step(state, pair_quadratic(), 0.1, 1.0, 1, noise);
  EXPECT_DOUBLE_EQ(state.x[0], -0.1);
  EXPECT_EQ(state.grad_evals, 1u);
}

TEST(SgldStep, AveragingOverSubsetsGivesGldDrift) {
  const auto obj = pair_quadratic();
  double mean = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    auto state = ChainState::at(vec({0.3}));
    StubNoise noise(vec({0.0}), {{i}});
    sgld_step(state, obj, 0.1, 1.0, 1, noise);
    mean += state.x[0] / 2.0;
  }
  auto state = ChainState::at(vec({0.3}));
  StubNoise noise(vec({0.0}));
  gld_step(state, obj, 0.1, 1.0, noise);
  EXPECT_NEAR(mean, state.x[0], 1e-15);
}

TEST(SgldStep, FullBatchMatchesGld) {
  const auto obj = benchmark_cosine_2d();
  std::mt19937_64 rng(3);
  const Vector x = gaussian_point(2, rng);
  const Vector eps = gaussian_point(2, rng);
  auto a = ChainState::at(x), b = ChainState::at(x);
  StubNoise na(eps), nb(eps);
  gld_step(a, obj, 0.01, 3.0, na);
  sgld_step(b, obj, 0.01, 3.0, obj.n(), nb);
  EXPECT_TRUE((a.x.array() == b.x.array()).all());
}

TEST(SgldStep, RejectsBatchOutOfRange) {
  auto state = ChainState::at(vec({0.0}));
  StubNoise noise(vec({0.0}));
  EXPECT_THROW(sgld_step(state, pair_quadratic(), 0.1, 1.0, 0, noise), std::invalid_argument);
  EXPECT_THROW(sgld_step(state, pair_quadratic(), 0.1, 1.0, 3, noise), std::invalid_argument);
}

TEST(VrSgldStep, HandArithmeticCorrectionCancels) {
  const auto obj = pair_quadratic();
  auto state = ChainState::at(vec({1.0}));
  take_snapshot(state, obj);
  EXPECT_DOUBLE_EQ((*state.snapshot_grad)[0], 1.0);
  state.x = vec({0.0});
  StubNoise noise(vec({0.0}), {{1}});
  vr_sgld_step(state, obj, 0.1, 1.0, 1, noise);
  EXPECT_DOUBLE_EQ(state.x[0], 0.0);
}

TEST(VrSgldStep, AtSnapshotGradientIsSnapshotGradient) {
  const auto obj = benchmark_cosine_2d();
  std::mt19937_64 rng(4);
  const Vector x = gaussian_point(2, rng);
  auto state = ChainState::at(x);
  take_snapshot(state, obj);
  StepScratch scratch(2);
  Vector g(2);
  for (std::size_t i = 0; i + 3 <= obj.n(); ++i) {
    const std::vector<std::size_t> idx{i, i + 1, i + 2};
    semi_stochastic_gradient_into(obj, x, *state.snapshot, *state.snapshot_grad, idx, g, scratch);
    EXPECT_TRUE((g.array() == state.snapshot_grad->array()).all());
  }
}

TEST(VrSgldStep, FullBatchIsExactGradient) {
  const auto obj = benchmark_cosine_2d();
  std::mt19937_64 rng(5);
  auto state = ChainState::at(gaussian_point(2, rng));
  take_snapshot(state, obj);
  state.x = gaussian_point(2, rng);
  std::vector<std::size_t> all(obj.n());
  std::iota(all.begin(), all.end(), std::size_t{0});
  StepScratch scratch(2);
  Vector g(2);
  semi_stochastic_gradient_into(obj, state.x, *state.snapshot, *state.snapshot_grad, all, g, scratch);
  const Vector full = obj.full_gradient(state.x);
  EXPECT_TRUE((g.array() == full.array()).all());
}

TEST(VrSgldStep, RequiresSnapshot) {
  auto state = ChainState::at(vec({0.0}));
  StubNoise noise(vec({0.0}));
  EXPECT_THROW(vr_sgld_step(state, pair_quadratic(), 0.1, 1.0, 1, noise), std::logic_error);
}

TEST(TakeSnapshot, ChargesFullPass) {
  const auto obj = benchmark_quadratic_2d();
  auto state = ChainState::at(Vector::Zero(2));
  take_snapshot(state, obj);
  EXPECT_EQ(state.grad_evals, obj.n());
  EXPECT_TRUE((*state.snapshot_grad).isApprox(obj.full_gradient(Vector::Zero(2))));
  EXPECT_TRUE((*state.snapshot).isZero());
}

TEST(Unbiasedness, ExhaustiveSubsetAverages) {
  std::mt19937_64 rng(6);
  for (std::size_t n = 2; n <= 8; ++n) {
    const auto obj = langevin::testing::cosine_n(n, 2, 100 + n);
    const Vector x = gaussian_point(2, rng);
    const Vector snap = gaussian_point(2, rng);
    const Vector snap_grad = obj.full_gradient(snap);
    const Vector full = obj.full_gradient(x);
    StepScratch scratch(2);
    for (std::size_t batch = 1; batch <= n; ++batch) {
      Vector drift_sum = Vector::Zero(2), semi_sum = Vector::Zero(2), g(2), s(2);
      std::size_t count = 0;
      std::vector<bool> mask(n, false);
      std::fill(mask.begin(), mask.begin() + static_cast<long>(batch), true);
      do {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i)
          if (mask[i]) idx.push_back(i);
        obj.mean_gradient_into(idx, x, g, s);
        drift_sum += g;
        semi_stochastic_gradient_into(obj, x, snap, snap_grad, idx, g, scratch);
        semi_sum += g;
        ++count;
      } while (std::prev_permutation(mask.begin(), mask.end()));
      EXPECT_LT((drift_sum / static_cast<double>(count) - full).norm(), 1e-12);
      EXPECT_LT((semi_sum / static_cast<double>(count) - full).norm(), 1e-12);
    }
  }
}

TEST(Minibatch, FullSetIsForced) {
  SeededNoise noise(1);
  EXPECT_EQ(sample_minibatch(5, 5, noise), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Minibatch, RejectsOutOfRange) {
  SeededNoise noise(1);
  EXPECT_THROW(sample_minibatch(5, 0, noise), std::invalid_argument);
  EXPECT_THROW(sample_minibatch(5, 6, noise), std::invalid_argument);
}

TEST(Minibatch, SingleIndexFrequenciesWithinThreeSigma) {
  SeededNoise noise(2024);
  const int draws = 100000;
  std::vector<int> counts(4, 0);
  for (int t = 0; t < draws; ++t) ++counts[sample_minibatch(4, 1, noise)[0]];
  const double sigma = std::sqrt(draws * 0.25 * 0.75);
  for (int c : counts) EXPECT_LT(std::abs(c - draws * 0.25), 3.0 * sigma);
}

TEST(Minibatch, PairFrequenciesWithinThreeSigma) {
  SeededNoise noise(7);
  const int draws = 100000;
  std::map<std::vector<std::size_t>, int> counts;
  for (int t = 0; t < draws; ++t) {
    const auto s = sample_minibatch(5, 2, noise);
    ASSERT_TRUE(std::is_sorted(s.begin(), s.end()));
    ASSERT_LT(s[0], s[1]);
    ++counts[s];
  }
  ASSERT_EQ(counts.size(), 10u);
  const double sigma = std::sqrt(draws * 0.1 * 0.9);
  for (const auto& [subset, c] : counts) EXPECT_LT(std::abs(c - draws * 0.1), 3.0 * sigma);
}

TEST(SeededNoise, SameSeedSameStream) {
  SeededNoise a(99), b(99), c(100);
  Vector va(3), vb(3), vc(3);
  a.gaussian(va);
  b.gaussian(vb);
  c.gaussian(vc);
  EXPECT_TRUE((va.array() == vb.array()).all());
  EXPECT_FALSE((va.array() == vc.array()).all());
}

TEST(SeededNoise, GaussianStreamIndependentOfSubsetDraws) {
  SeededNoise a(5), b(5);
  Vector va(2), vb(2);
  std::vector<std::size_t> idx;
  for (int t = 0; t < 50; ++t) {
    a.gaussian(va);
    a.minibatch(10, 3, idx);
    b.gaussian(vb);
    EXPECT_TRUE((va.array() == vb.array()).all());
  }
}

TEST(Run, EmptyRun) {
  const auto r = run(config(Algorithm::gld, 0.1, 0), benchmark_quadratic_2d());
  EXPECT_TRUE(r.final_state.x.isZero());
  EXPECT_EQ(r.grad_evals, 0u);
}

TEST(Run, DegenerateSamplersReproduceGld) {
  for (const auto& obj : {benchmark_cosine_2d(), benchmark_quadratic_2d()}) {
    const std::size_t n = obj.n();
    const auto gld = trajectory(config(Algorithm::gld, 0.01, 1000), obj);
    EXPECT_TRUE(bitwise_equal(gld, trajectory(config(Algorithm::sgld, 0.01, 1000, n), obj)));
    EXPECT_TRUE(bitwise_equal(gld, trajectory(config(Algorithm::vrsgld, 0.01, 1000, n, 10), obj)));
    EXPECT_TRUE(bitwise_equal(gld, trajectory(config(Algorithm::vrsgld, 0.01, 1000, 3, 1), obj)));
    // A genuine minibatch does move off the GLD path.
    EXPECT_FALSE(bitwise_equal(gld, trajectory(config(Algorithm::sgld, 0.01, 1000, n / 2), obj)));
  }
}

TEST(Run, VrAccountingExample) {
  const auto obj = benchmark_quadratic_2d(10, 3);
  const auto r = run(config(Algorithm::vrsgld, 0.01, 10, 2, 5), obj);
  EXPECT_EQ(r.grad_evals, 40u);
}

TEST(Run, AccountingMatchesClosedForm) {
  std::mt19937_64 rng(11);
  const auto obj = benchmark_cosine_2d();
  for (int t = 0; t < 30; ++t) {
    const auto alg = static_cast<Algorithm>(rng() % 3);
    const std::size_t batch = 1 + rng() % obj.n();
    const std::size_t epoch = 1 + rng() % 7;
    const std::uint64_t steps = epoch * (1 + rng() % 20);
    const auto c = config(alg, 0.01, steps, batch, epoch, rng());
    EXPECT_EQ(run(c, obj).grad_evals, theory::gradient_complexity(alg, obj.n(), steps, batch, epoch));
  }
}

TEST(Run, DeterministicRecord) {
  const auto obj = benchmark_cosine_2d();
  const auto c = config(Algorithm::vrsgld, 0.02, 200, 4, 5, 123);
  EXPECT_EQ(run(c, obj).to_json(false).dump(), run(c, obj).to_json(false).dump());
}

TEST(Run, DefaultsToZeroStartAndHonoursOverride) {
  const auto obj = benchmark_quadratic_2d();
  auto c = config(Algorithm::gld, 0.1, 1);
  StubNoise zero(Vector::Zero(2));
  EXPECT_TRUE(run(c, obj, zero).final_state.x.isApprox(-0.1 * obj.full_gradient(Vector::Zero(2))));
  c.x0 = vec({1.0, -1.0});
  StubNoise zero2(Vector::Zero(2));
  const Vector x1 = *c.x0 - 0.1 * obj.full_gradient(*c.x0);
  EXPECT_TRUE(run(c, obj, zero2).final_state.x.isApprox(x1));
}

TEST(Config, ValidationCollectsEveryError) {
  SamplerConfig c = config(Algorithm::vrsgld, 0.0, 10, 7, 3);
  c.beta = -1.0;
  const auto errors = c.validate(6, 1);
  const auto has = [&](const std::string& needle) {
    return std::any_of(errors.begin(), errors.end(), [&](const std::string& e) { return e.find(needle) != std::string::npos; });
  };
  EXPECT_TRUE(has("batch = 7 exceeds n = 6"));
  EXPECT_TRUE(has("steps = 10 is not divisible by epoch_len = 3"));
  EXPECT_TRUE(has("eta"));
  EXPECT_TRUE(has("beta"));
  EXPECT_THROW(run(c, benchmark_quadratic_2d(6, 1)), ConfigError);
}

TEST(Config, IrrelevantFieldsIgnoredForGld) {
  SamplerConfig c = config(Algorithm::gld, 0.1, 10, 999, 7);
  EXPECT_TRUE(c.validate(4, 1).empty());
  EXPECT_FALSE(to_json(c).contains("batch"));
}

TEST(Config, AlgorithmNames) {
  EXPECT_EQ(parse_algorithm("vr-sgld"), Algorithm::vrsgld);
  EXPECT_EQ(parse_algorithm("SGLD"), Algorithm::sgld);
  EXPECT_EQ(to_string(Algorithm::vrsgld), "VRSGLD");
  EXPECT_THROW(parse_algorithm("adam"), std::invalid_argument);
}

TEST(Trackers, TraceCsvLayout) {
  TraceRecorder trace(5);
  Tracker* trackers[] = {&trace};
  run(config(Algorithm::sgld, 0.05, 20, 2), benchmark_quadratic_1d(), std::span<Tracker* const>(trackers));
  ASSERT_EQ(trace.rows().size(), 5u);
  EXPECT_EQ(trace.rows().front().k, 0u);
  EXPECT_EQ(trace.rows().back().k, 20u);
  EXPECT_EQ(trace.rows().back().grad_evals, 40u);
  std::ostringstream csv;
  trace.write_csv(csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "k,F_n,norm_sq,grad_evals");
}

TEST(Trackers, SampleCollectorBurnInAndThin) {
  SampleCollector samples(10, 3, 1000);
  Tracker* trackers[] = {&samples};
  run(config(Algorithm::gld, 0.05, 40), benchmark_quadratic_1d(), std::span<Tracker* const>(trackers));
  // k = 12, 15, ..., 39 after discarding k <= 10.
  EXPECT_EQ(samples.samples().size(), 10u);
}

TEST(Properties, MomentContainmentOnBothFamilies) {
  for (const auto& raw : {benchmark_quadratic_2d(), benchmark_cosine_2d()}) {
    const auto obj = raw.minimizer() ? raw : diagnostics::locate_minimizer(raw);
    const auto& cert = obj.certificate();
    auto c = config(Algorithm::sgld, theory::safe_step_size(cert.M, cert.m) / 2.0, 20000, obj.n() / 2);
    c.beta = 1.0;
    diagnostics::MomentTracker moments;
    Tracker* trackers[] = {&moments};
    run(c, obj, std::span<Tracker* const>(trackers));
    theory::TheoryParams p = theory::TheoryParams::from_objective(obj, 1.0);
    EXPECT_LE(moments.summarize().sup_running_mean_norm_sq, theory::gamma_bound(p));
  }
}
