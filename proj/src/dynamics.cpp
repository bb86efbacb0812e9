#include "langevin/dynamics.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace langevin {

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::gld:
      return "GLD";
    case Algorithm::sgld:
      return "SGLD";
    case Algorithm::vrsgld:
      return "VRSGLD";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& text) {
  std::string up;
  for (const char ch : text) {
    if (ch != '-' && ch != '_') up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  if (up == "GLD") return Algorithm::gld;
  if (up == "SGLD") return Algorithm::sgld;
  if (up == "VRSGLD") return Algorithm::vrsgld;
  throw std::invalid_argument("unknown algorithm '" + text + "'");
}

std::vector<std::string> SamplerConfig::validate(std::size_t n, std::size_t d) const {
  std::vector<std::string> errors;
  auto fail = [&](auto&&... parts) {
    std::ostringstream msg;
    (msg << ... << parts);
    errors.push_back(msg.str());
  };
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta = ", eta, " must be positive and finite");
  if (!(beta > 0.0) || !std::isfinite(beta)) fail("beta = ", beta, " must be positive and finite");
  if (algorithm != Algorithm::gld) {
    if (batch == 0) fail("batch = 0 must be at least 1");
    if (batch > n) fail("batch = ", batch, " exceeds n = ", n);
  }
  if (algorithm == Algorithm::vrsgld) {
    if (epoch_len == 0) {
      fail("epoch_len = 0 must be at least 1");
    } else if (steps % epoch_len != 0) {
      fail("steps = ", steps, " is not divisible by epoch_len = ", epoch_len);
    }
  }
  if (x0 && static_cast<std::size_t>(x0->size()) != d) {
    fail("x0 has dimension ", x0->size(), ", objective has dimension ", d);
  }
  return errors;
}

nlohmann::json to_json(const SamplerConfig& c) {
  nlohmann::json out = {{"algorithm", to_string(c.algorithm)},
                        {"eta", c.eta},
                        {"beta", c.beta},
                        {"steps", c.steps},
                        {"seed", c.seed}};
  if (c.algorithm != Algorithm::gld) out["batch"] = c.batch;
  if (c.algorithm == Algorithm::vrsgld) out["epoch_len"] = c.epoch_len;
  if (c.x0) out["x0"] = vector_to_json(*c.x0);
  return out;
}

StepScratch::StepScratch(std::size_t d)
    : gradient(Vector::Zero(static_cast<Eigen::Index>(d))),
      noise(Vector::Zero(static_cast<Eigen::Index>(d))),
      term(Vector::Zero(static_cast<Eigen::Index>(d))),
      term2(Vector::Zero(static_cast<Eigen::Index>(d))) {}

namespace {

void check_step_args(const ChainState& state, const FiniteSumObjective& obj, double eta,
                     double beta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("step size must be nonnegative");
  if (!(beta > 0.0)) throw std::invalid_argument("inverse temperature must be positive");
  obj.check_dimension(state.x);
}

void check_batch(const FiniteSumObjective& obj, std::size_t batch) {
  if (batch == 0 || batch > obj.n()) {
    throw std::invalid_argument("batch size " + std::to_string(batch) + " outside [1, " +
                                std::to_string(obj.n()) + "]");
  }
}

void ensure_size(StepScratch& scratch, std::size_t d) {
  const auto dim = static_cast<Eigen::Index>(d);
  if (scratch.gradient.size() != dim) scratch = StepScratch(d);
}

// Shared by all three samplers so the arithmetic is identical.
void langevin_update(ChainState& state, const Vector& drift, const Vector& eps, double eta,
                     double beta) {
  const double scale = std::sqrt(2.0 * eta / beta);
  state.x = state.x - eta * drift + scale * eps;
  ++state.k;
}

}  // namespace

void gld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
              NoiseSource& noise, StepScratch& scratch) {
  check_step_args(state, obj, eta, beta);
  ensure_size(scratch, obj.d());
  noise.gaussian(scratch.noise);
  obj.full_gradient_into(state.x, scratch.gradient, scratch.term);
  langevin_update(state, scratch.gradient, scratch.noise, eta, beta);
  state.grad_evals += obj.n();
}

void sgld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
               std::size_t batch, NoiseSource& noise, StepScratch& scratch) {
  check_step_args(state, obj, eta, beta);
  check_batch(obj, batch);
  ensure_size(scratch, obj.d());
  noise.gaussian(scratch.noise);
  noise.minibatch(obj.n(), batch, scratch.batch);
  obj.mean_gradient_into(scratch.batch, state.x, scratch.gradient, scratch.term);
  langevin_update(state, scratch.gradient, scratch.noise, eta, beta);
  state.grad_evals += batch;
}

void semi_stochastic_gradient_into(const FiniteSumObjective& obj, const Vector& x,
                                   const Vector& snapshot, const Vector& snapshot_grad,
                                   std::span<const std::size_t> indices, Vector& out,
                                   StepScratch& scratch) {
  ensure_size(scratch, obj.d());
  if (indices.size() == obj.n()) {
    // sum_i (grad f_i(x) - grad f_i(snapshot)) / n + grad F(snapshot) = grad F(x).
    obj.full_gradient_into(x, out, scratch.term);
    return;
  }
  out.setZero(static_cast<Eigen::Index>(obj.d()));
  for (const std::size_t i : indices) {
    obj.component_gradient_into(i, x, scratch.term);
    obj.component_gradient_into(i, snapshot, scratch.term2);
    out += scratch.term - scratch.term2;
  }
  out /= static_cast<double>(indices.size());
  out += snapshot_grad;
}

void vr_sgld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
                  std::size_t batch, NoiseSource& noise, StepScratch& scratch) {
  check_step_args(state, obj, eta, beta);
  check_batch(obj, batch);
  if (!state.snapshot || !state.snapshot_grad) {
    throw std::logic_error("VR-SGLD step requires a snapshot");
  }
  ensure_size(scratch, obj.d());
  noise.gaussian(scratch.noise);
  noise.minibatch(obj.n(), batch, scratch.batch);
  semi_stochastic_gradient_into(obj, state.x, *state.snapshot, *state.snapshot_grad,
                                scratch.batch, scratch.gradient, scratch);
  langevin_update(state, scratch.gradient, scratch.noise, eta, beta);
  state.grad_evals += batch;
}

void take_snapshot(ChainState& state, const FiniteSumObjective& obj, StepScratch& scratch) {
  obj.check_dimension(state.x);
  ensure_size(scratch, obj.d());
  state.snapshot = state.x;
  Vector grad(static_cast<Eigen::Index>(obj.d()));
  obj.full_gradient_into(state.x, grad, scratch.term);
  state.snapshot_grad = std::move(grad);
  state.grad_evals += obj.n();
}

void gld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
              NoiseSource& noise) {
  StepScratch scratch(obj.d());
  gld_step(state, obj, eta, beta, noise, scratch);
}

void sgld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
               std::size_t batch, NoiseSource& noise) {
  StepScratch scratch(obj.d());
  sgld_step(state, obj, eta, beta, batch, noise, scratch);
}

void vr_sgld_step(ChainState& state, const FiniteSumObjective& obj, double eta, double beta,
                  std::size_t batch, NoiseSource& noise) {
  StepScratch scratch(obj.d());
  vr_sgld_step(state, obj, eta, beta, batch, noise, scratch);
}

void take_snapshot(ChainState& state, const FiniteSumObjective& obj) {
  StepScratch scratch(obj.d());
  take_snapshot(state, obj, scratch);
}

TraceRecorder::TraceRecorder(std::uint64_t stride) : stride_(std::max<std::uint64_t>(stride, 1)) {}

void TraceRecorder::start(const ChainState& state, const FiniteSumObjective& obj) {
  rows_.clear();
  rows_.push_back({state.k, obj.value(state.x), state.x.squaredNorm(), state.grad_evals});
}

void TraceRecorder::observe(const ChainState& state, const FiniteSumObjective& obj) {
  if (state.k % stride_ != 0) return;
  rows_.push_back({state.k, obj.value(state.x), state.x.squaredNorm(), state.grad_evals});
}

nlohmann::json TraceRecorder::summary() const {
  return {{"stride", stride_}, {"rows", rows_.size()}};
}

void TraceRecorder::write_csv(std::ostream& out) const {
  out << "k,F_n,norm_sq,grad_evals\n";
  out << std::setprecision(17);
  for (const auto& row : rows_) {
    out << row.k << ',' << row.value << ',' << row.norm_sq << ',' << row.grad_evals << '\n';
  }
}

SampleCollector::SampleCollector(std::uint64_t burn_in, std::uint64_t thin, std::size_t max_samples)
    : burn_in_(burn_in), thin_(std::max<std::uint64_t>(thin, 1)), max_samples_(max_samples) {}

void SampleCollector::observe(const ChainState& state, const FiniteSumObjective&) {
  if (state.k <= burn_in_ || samples_.size() >= max_samples_) return;
  if ((state.k - burn_in_) % thin_ != 0) return;
  samples_.push_back(state.x);
}

nlohmann::json SampleCollector::summary() const {
  return {{"burn_in", burn_in_}, {"thin", thin_}, {"samples", samples_.size()}};
}

nlohmann::json RunResult::to_json(bool include_timing) const {
  nlohmann::json trackers = nlohmann::json::array();
  for (const auto& s : tracker_summaries) trackers.push_back(s);
  nlohmann::json out = {{"final_x", vector_to_json(final_state.x)},
                        {"k", final_state.k},
                        {"grad_evals", grad_evals},
                        {"trackers", trackers}};
  if (include_timing) out["wall_seconds"] = wall_seconds;
  return out;
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid sampler config";
  for (const auto& e : errors) out += "; " + e;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::invalid_argument(join_errors(errors)), errors_(std::move(errors)) {}

RunResult run(const SamplerConfig& config, const FiniteSumObjective& obj,
              std::span<Tracker* const> trackers) {
  SeededNoise noise(config.seed);
  return run(config, obj, noise, trackers);
}

RunResult run(const SamplerConfig& config, const FiniteSumObjective& obj, NoiseSource& noise,
              std::span<Tracker* const> trackers) {
  if (auto errors = config.validate(obj.n(), obj.d()); !errors.empty()) {
    throw ConfigError(std::move(errors));
  }
  const auto start_time = std::chrono::steady_clock::now();

  ChainState state =
      ChainState::at(config.x0 ? *config.x0 : Vector(Vector::Zero(static_cast<Eigen::Index>(obj.d()))));
  StepScratch scratch(obj.d());
  for (Tracker* t : trackers) t->start(state, obj);

  for (std::uint64_t k = 0; k < config.steps; ++k) {
    switch (config.algorithm) {
      case Algorithm::gld:
        gld_step(state, obj, config.eta, config.beta, noise, scratch);
        break;
      case Algorithm::sgld:
        sgld_step(state, obj, config.eta, config.beta, config.batch, noise, scratch);
        break;
      case Algorithm::vrsgld:
        if (k % config.epoch_len == 0) take_snapshot(state, obj, scratch);
        vr_sgld_step(state, obj, config.eta, config.beta, config.batch, noise, scratch);
        break;
    }
    for (Tracker* t : trackers) t->observe(state, obj);
  }

  RunResult result;
  result.grad_evals = state.grad_evals;
  result.final_state = std::move(state);
  for (Tracker* t : trackers) result.tracker_summaries.push_back({{"name", t->name()}, {"summary", t->summary()}});
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

}  // namespace langevin
