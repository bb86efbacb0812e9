#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "langevin/objectives.hpp"

namespace langevin {

enum class Algorithm { gld, sgld, vrsgld };

std::string to_string(Algorithm algorithm);
/// Accepts "GLD", "SGLD", "VRSGLD" and "VR-SGLD" (case-insensitive).
Algorithm parse_algorithm(const std::string& text);

struct SamplerConfig {
  Algorithm algorithm = Algorithm::gld;
  double eta = 0.0;
  double beta = 1.0;
  std::size_t batch = 0;      // SGLD / VR-SGLD only
  std::size_t epoch_len = 0;  // VR-SGLD only
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  std::optional<Vector> x0;  // defaults to the zero vector

  /// Every violated constraint against an objective of shape (n, d).
  std::vector<std::string> validate(std::size_t n, std::size_t d) const;
};

nlohmann::json to_json(const SamplerConfig& config);

struct ChainState {
  Vector x;
  std::uint64_t k = 0;
  std::optional<Vector> snapshot;       // VR-SGLD anchor point
  std::optional<Vector> snapshot_grad;  // full gradient at the anchor
  std::uint64_t grad_evals = 0;         // component-gradient evaluations; a full pass costs n

  static ChainState at(Vector x0) {
    ChainState s;
    s.x = std::move(x0);
    return s;
  }
};

/// Randomness consumed by the samplers.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  /// Fills `out` with independent standard Gaussians.
  virtual void gaussian(Vector& out) = 0;
  /// Uniform B-subset of {0, ..., n-1}, without replacement, sorted ascending.
  virtual void minibatch(std::size_t n, std::size_t batch, std::vector<std::size_t>& out) = 0;
};

/// Seeded noise. Gaussian vectors and index subsets come from two independent
/// mt19937_64 streams derived from the seed, so the Gaussian sequence is the
/// same whether or not a sampler draws subsets. Each step draws its Gaussian
/// first, then its subset.
class SeededNoise final : public NoiseSource {
 public:
  explicit SeededNoise(std::uint64_t seed);

  void gaussian(Vector& out) override;
  /// Partial Fisher-Yates over a persistent permutation: O(B) swaps per draw.
  void minibatch(std::size_t n, std::size_t batch, std::vector<std::size_t>& out) override;

 private:
  std::mt19937_64 gaussian_engine_;
  std::mt19937_64 subset_engine_;
  std::normal_distribution<double> normal_;
  std::vector<std::size_t> permutation_;
};

std::vector<std::size_t> sample_minibatch(std::size_t n, std::size_t batch, NoiseSource& noise);

/// Buffers reused across steps so a chain does not allocate per iteration.
struct StepScratch {
  Vector gradient;
  Vector noise;
  Vector term;
  Vector term2;
  std::vector<std::size_t> batch;

  explicit StepScratch(std::size_t d = 0);
};

// One iteration each. Step functions accept eta = 0 (a no-op drift) so they
// can be exercised with stub noise; config validation rejects it.

/// x <- x - eta grad F_n(x) + sqrt(2 eta / beta) eps.
void gld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
              NoiseSource& noise, StepScratch& scratch);

/// x <- x - (eta / B) sum_{i in I} grad f_i(x) + sqrt(2 eta / beta) eps.
void sgld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
               std::size_t batch, NoiseSource& noise, StepScratch& scratch);

/// x <- x - eta g + sqrt(2 eta / beta) eps with the semi-stochastic gradient
/// g = W + (1/B) sum_{i in I} (grad f_i(x) - grad f_i(snapshot)).
/// Charges B gradient evaluations; the snapshot pass was charged separately.
void vr_sgld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
                  std::size_t batch, NoiseSource& noise, StepScratch& scratch);

/// snapshot <- x, snapshot_grad <- grad F_n(x), grad_evals += n.
void take_snapshot(ChainState& state, const FiniteSumObjective& obj, StepScratch& scratch);

/// Semi-stochastic gradient for the given index set, shared with the variance
/// probes. A full index set telescopes to the exact gradient at x.
void semi_stochastic_gradient_into(const FiniteSumObjective& obj, const Vector& x,
                                   const Vector& snapshot, const Vector& snapshot_grad,
                                   std::span<const std::size_t> indices, Vector& out,
                                   StepScratch& scratch);

// Convenience overloads that allocate their own scratch.
void gld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
              NoiseSource& noise);
void sgld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
               std::size_t batch, NoiseSource& noise);
void vr_sgld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
                  std::size_t batch, NoiseSource& noise);
void take_snapshot(ChainState& state, const FiniteSumObjective& obj);

/// Per-chain observer. start() sees the initial state, observe() every
/// post-step state. Trackers are chain-local.
class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual void start(const ChainState& /*state*/, const FiniteSumObjective& /*obj*/) {}
  virtual void observe(const ChainState& state, const FiniteSumObjective& obj) = 0;
  virtual std::string name() const = 0;
  virtual nlohmann::json summary() const = 0;
};

/// Strided (k, F_n, |x|^2, grad_evals) rows, including k = 0.
class TraceRecorder final : public Tracker {
 public:
  struct Row {
    std::uint64_t k;
    double value;
    double norm_sq;
    std::uint64_t grad_evals;
  };

  explicit TraceRecorder(std::uint64_t stride = 1);

  void start(const ChainState& state, const FiniteSumObjective& obj) override;
  void observe(const ChainState& state, const FiniteSumObjective& obj) override;
  std::string name() const override { return "trace"; }
  nlohmann::json summary() const override;

  const std::vector<Row>& rows() const { return rows_; }
  /// Header "k,F_n,norm_sq,grad_evals", doubles at round-trip precision.
  void write_csv(std::ostream& out) const;

 private:
  std::uint64_t stride_;
  std::vector<Row> rows_;
};

/// Keeps post-burn-in iterates, thinned by a fixed stride.
class SampleCollector final : public Tracker {
 public:
  SampleCollector(std::uint64_t burn_in, std::uint64_t thin, std::size_t max_samples);

  void observe(const ChainState& state, const FiniteSumObjective& obj) override;
  std::string name() const override { return "samples"; }
  nlohmann::json summary() const override;

  const std::vector<Vector>& samples() const { return samples_; }
  std::vector<Vector> take() { return std::move(samples_); }

 private:
  std::uint64_t burn_in_;
  std::uint64_t thin_;
  std::size_t max_samples_;
  std::vector<Vector> samples_;
};

struct RunResult {
  ChainState final_state;
  std::vector<nlohmann::json> tracker_summaries;
  std::uint64_t grad_evals = 0;
  double wall_seconds = 0.0;

  /// Everything except the wall time when `include_timing` is false.
  nlohmann::json to_json(bool include_timing = true) const;
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Drives `steps` iterations from x0 (zero by default). VR-SGLD snapshots at
/// the start of every epoch of length L. Throws ConfigError.
RunResult run(const SamplerConfig& config, const FiniteSumObjective& obj,
              std::span<Tracker* const> trackers = {});

/// Same, with an injected noise source.
RunResult run(const SamplerConfig& config, const FiniteSumObjective& obj, NoiseSource& noise,
              std::span<Tracker* const> trackers = {});

}  // namespace langevin
