#include "langevin/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace langevin::theory {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

double variance_fraction(std::size_t n, std::size_t batch) {
  require(n >= 2, "minibatch bounds need n >= 2, got n = " + std::to_string(n));
  require(batch >= 1 && batch <= n, "batch size " + std::to_string(batch) + " outside [1, " +
                                        std::to_string(n) + "]");
  const double nd = static_cast<double>(n);
  const double bd = static_cast<double>(batch);
  return (nd - bd) / (bd * (nd - 1.0));
}

BoundTerms common_terms(const TheoryParams& p, double eta, std::uint64_t steps, double c_eta) {
  BoundTerms t;
  t.transient = theta(p, eta) * std::exp(-spectral_gap(p) * static_cast<double>(steps) * eta);
  t.discretization = c_eta * eta / p.beta;
  t.model = r_m(p);
  return t;
}

}  // namespace

void TheoryParams::validate() const {
  require(M > 0.0 && std::isfinite(M), "M must be positive");
  require(m > 0.0 && std::isfinite(m), "m must be positive");
  require(b >= 0.0 && std::isfinite(b), "b must be nonnegative");
  require(beta > 0.0 && std::isfinite(beta), "beta must be positive");
  require(d >= 1, "d must be at least 1");
  require(G >= 0.0 && std::isfinite(G), "G must be nonnegative");
  require(rho > 0.0 && rho <= 1.0, "rho must lie in (0, 1]");
  require(c0 > 0.0 && c1 > 0.0 && c2 > 0.0, "absolute constants C0, C1, C2 must be positive");
}

double TheoryParams::kappa() const {
  return 2.0 * M * (b * beta + m * beta + static_cast<double>(d)) / m;
}

TheoryParams TheoryParams::from_objective(const FiniteSumObjective& obj, double beta) {
  const auto& cert = obj.certificate();
  if (!cert.G) {
    throw std::invalid_argument("objective certificate has no G; attach a minimizer first");
  }
  TheoryParams p;
  p.M = cert.M;
  p.m = cert.m;
  p.b = cert.b;
  p.beta = beta;
  p.d = obj.d();
  p.G = *cert.G;
  p.validate();
  return p;
}

nlohmann::json to_json(const TheoryParams& p) {
  return {{"M", p.M},   {"m", p.m},     {"b", p.b},   {"beta", p.beta}, {"d", p.d},
          {"G", p.G},   {"rho", p.rho}, {"c0", p.c0}, {"c1", p.c1},     {"c2", p.c2}};
}

TheoryParams theory_params_from_json(const nlohmann::json& doc) {
  TheoryParams p;
  p.M = doc.at("M").get<double>();
  p.m = doc.at("m").get<double>();
  p.b = doc.at("b").get<double>();
  p.beta = doc.at("beta").get<double>();
  p.d = doc.at("d").get<std::size_t>();
  p.G = doc.value("G", 0.0);
  p.rho = doc.value("rho", p.rho);
  p.c0 = doc.value("c0", p.c0);
  p.c1 = doc.value("c1", p.c1);
  p.c2 = doc.value("c2", p.c2);
  p.validate();
  return p;
}

double spectral_gap(const TheoryParams& p) {
  const double k = p.kappa();
  require(k > 1.0, "kappa = " + std::to_string(k) + " must exceed 1 for a positive spectral gap");
  return 2.0 * p.m * std::pow(p.rho, static_cast<double>(p.d)) / std::log(k);
}

double theta(const TheoryParams& p, double eta) {
  require(eta >= 0.0, "step size must be nonnegative");
  const double s = p.b * p.beta + p.m * p.beta + static_cast<double>(p.d);
  return p.c0 * p.M * s * (p.m + std::exp(p.m * eta) * p.M * s) /
         (p.m * p.m * std::pow(p.rho, static_cast<double>(p.d) / 2.0));
}

double gamma_bound(const TheoryParams& p) {
  return 2.0 * (1.0 + 1.0 / p.m) * (p.b + 2.0 * p.G * p.G + static_cast<double>(p.d) / p.beta);
}

double g_constant(const FiniteSumObjective& obj, const Vector& x_star) {
  obj.check_dimension(x_star);
  const auto& cert = obj.certificate();
  double max_grad = 0.0;
  Vector g(static_cast<Eigen::Index>(obj.d()));
  for (std::size_t i = 0; i < obj.n(); ++i) {
    obj.component_gradient_into(i, x_star, g);
    max_grad = std::max(max_grad, g.norm());
  }
  const double ratio = cert.b / cert.m;
  return max_grad + cert.M * std::max(ratio, std::sqrt(ratio));
}

double r_m(const TheoryParams& p) {
  const double d = static_cast<double>(p.d);
  return d / (2.0 * p.beta) * std::log(std::numbers::e * p.M * (p.b * p.beta / d + 1.0) / p.m);
}

double r_m_slope_form(const TheoryParams& p) {
  const double d = static_cast<double>(p.d);
  return d / (2.0 * p.beta) * std::log(std::numbers::e * p.M * (p.m * p.beta / d + 1.0) / p.m);
}

nlohmann::json to_json(const BoundTerms& t) {
  return {{"stochastic", t.stochastic},
          {"transient", t.transient},
          {"discretization", t.discretization},
          {"model", t.model},
          {"total", t.total()}};
}

BoundTerms gld_bound(const TheoryParams& p, double eta, std::uint64_t steps) {
  require(eta > 0.0, "step size must be positive");
  return common_terms(p, eta, steps, p.c1);
}

BoundTerms sgld_bound(const TheoryParams& p, double eta, std::uint64_t steps, std::size_t n,
                      std::size_t batch) {
  require(eta > 0.0, "step size must be positive");
  const double frac = variance_fraction(n, batch);
  BoundTerms t = common_terms(p, eta, steps, p.c2);
  const double gam = gamma_bound(p);
  const double spread = p.M * std::sqrt(gam) + p.G;
  t.stochastic = p.c1 * gam * static_cast<double>(steps) * eta *
                 std::sqrt(p.beta * frac * spread * spread);
  return t;
}

BoundTerms vr_sgld_bound(const TheoryParams& p, double eta, std::uint64_t steps, std::size_t n,
                         std::size_t batch, std::size_t epoch_len) {
  require(eta > 0.0, "step size must be positive");
  require(epoch_len >= 1, "epoch length must be at least 1");
  const double frac = variance_fraction(n, batch);
  BoundTerms t = common_terms(p, eta, steps, p.c2);
  const double gam = gamma_bound(p);
  const double len = static_cast<double>(epoch_len);
  const double inner = 9.0 * eta * len * (p.M * p.M * gam + p.G * p.G) + static_cast<double>(p.d) / p.beta;
  const double bracket = len * p.beta * p.M * p.M * frac * inner;
  t.stochastic = p.c1 * gam * std::pow(static_cast<double>(steps), 0.75) * eta * std::pow(bracket, 0.25);
  return t;
}

StepSizeTooLarge::StepSizeTooLarge(double eta_in, double max_eta_in)
    : std::invalid_argument([&] {
        std::ostringstream msg;
        msg.precision(17);
        msg << "step size " << eta_in << " violates C1 eta / beta <= epsilon / 2; largest admissible eta is "
            << max_eta_in;
        return msg.str();
      }()),
      eta(eta_in),
      max_eta(max_eta_in) {}

std::uint64_t budget_steps(double theta_value, double lambda, double eta, double epsilon) {
  require(epsilon > 0.0, "epsilon must be positive");
  require(lambda > 0.0 && eta > 0.0, "lambda and eta must be positive");
  if (epsilon >= 2.0 * theta_value) return 0;
  const double target = 0.5 * epsilon;
  auto meets = [&](std::uint64_t k) {
    return theta_value * std::exp(-lambda * static_cast<double>(k) * eta) <= target;
  };
  auto k = static_cast<std::uint64_t>(std::ceil(std::log(2.0 * theta_value / epsilon) / (lambda * eta)));
  // The ceiling can sit one off after rounding in log/exp.
  while (!meets(k)) ++k;
  while (k > 0 && meets(k - 1)) --k;
  return k;
}

double max_budget_step(double epsilon, const TheoryParams& p) {
  return epsilon * p.beta / (2.0 * p.c1);
}

std::uint64_t budget_gld(double epsilon, const TheoryParams& p, double eta) {
  require(epsilon > 0.0, "epsilon must be positive");
  require(eta > 0.0, "step size must be positive");
  const double max_eta = max_budget_step(epsilon, p);
  if (p.c1 * eta / p.beta > 0.5 * epsilon) throw StepSizeTooLarge(eta, max_eta);
  return budget_steps(theta(p, eta), spectral_gap(p), eta, epsilon);
}

double safe_step_size(double M, double m) { return std::min(1.0, m / (2.0 * M * M)); }

BatchFloor sgld_batch_floor(double epsilon, std::size_t d, double lambda) {
  require(epsilon > 0.0 && epsilon < 1.0, "batch floor needs 0 < epsilon < 1");
  require(lambda > 0.0, "lambda must be positive");
  const double dd = static_cast<double>(d);
  const double log_term = std::log(1.0 / epsilon);
  BatchFloor out;
  out.value = std::pow(dd, 6) / (std::pow(lambda, 4) * std::pow(epsilon, 4)) * std::pow(log_term, 4);
  return out;
}

VrHyperparams vr_sgld_hyperparams(std::size_t n, double epsilon) {
  require(n >= 1, "n must be at least 1");
  require(epsilon > 0.0 && epsilon < 1.0, "hyperparameters need 0 < epsilon < 1");
  VrHyperparams h;
  const double root_n = std::sqrt(static_cast<double>(n));
  h.batch_raw = root_n * std::pow(epsilon, -1.5);
  h.epoch_raw = root_n * std::pow(epsilon, 1.5);

  const double b_round = std::round(h.batch_raw);
  const double b_clamped = std::clamp(b_round, 1.0, static_cast<double>(n));
  h.batch = static_cast<std::size_t>(b_clamped);
  h.batch_clamped = b_clamped != b_round;

  const double l_round = std::round(h.epoch_raw);
  h.epoch_len = static_cast<std::size_t>(std::max(1.0, l_round));
  h.epoch_clamped = l_round < 1.0;
  return h;
}

std::uint64_t gradient_complexity(Algorithm algorithm, std::size_t n, std::uint64_t steps,
                                  std::size_t batch, std::size_t epoch_len) {
  switch (algorithm) {
    case Algorithm::gld:
      return n * steps;
    case Algorithm::sgld:
      return batch * steps;
    case Algorithm::vrsgld: {
      require(epoch_len >= 1, "epoch length must be at least 1");
      const std::uint64_t epochs = (steps + epoch_len - 1) / epoch_len;
      return batch * steps + n * epochs;
    }
  }
  return 0;
}

std::vector<Suggestion> suggest(const TheoryParams& p, std::size_t n, double epsilon) {
  p.validate();
  const double eta = std::min(safe_step_size(p.M, p.m), max_budget_step(epsilon, p));
  const std::uint64_t steps = budget_gld(epsilon, p, eta);
  const double lambda = spectral_gap(p);

  std::vector<Suggestion> out;

  Suggestion gld;
  gld.algorithm = Algorithm::gld;
  gld.eta = eta;
  gld.steps = steps;
  gld.gradient_evaluations = gradient_complexity(Algorithm::gld, n, steps, 0, 0);
  gld.bound = gld_bound(p, eta, steps);
  out.push_back(gld);

  Suggestion sgld;
  sgld.algorithm = Algorithm::sgld;
  sgld.eta = eta;
  sgld.steps = steps;
  const double floor_value = sgld_batch_floor(epsilon, p.d, lambda).value;
  const double wanted = std::ceil(floor_value);
  sgld.batch = wanted >= static_cast<double>(n) ? n : std::max<std::size_t>(1, static_cast<std::size_t>(wanted));
  sgld.batch_clamped = wanted > static_cast<double>(n);
  sgld.gradient_evaluations = gradient_complexity(Algorithm::sgld, n, steps, sgld.batch, 0);
  sgld.bound = n >= 2 ? sgld_bound(p, eta, steps, n, sgld.batch) : gld_bound(p, eta, steps);
  out.push_back(sgld);

  Suggestion vr;
  vr.algorithm = Algorithm::vrsgld;
  vr.eta = eta;
  const VrHyperparams h = vr_sgld_hyperparams(n, epsilon);
  vr.batch = h.batch;
  vr.epoch_len = h.epoch_len;
  vr.batch_clamped = h.batch_clamped;
  vr.epoch_clamped = h.epoch_clamped;
  vr.steps = (steps + h.epoch_len - 1) / h.epoch_len * h.epoch_len;
  vr.gradient_evaluations = gradient_complexity(Algorithm::vrsgld, n, vr.steps, vr.batch, vr.epoch_len);
  vr.bound = n >= 2 ? vr_sgld_bound(p, eta, vr.steps, n, vr.batch, vr.epoch_len)
                    : gld_bound(p, eta, vr.steps);
  out.push_back(vr);
  return out;
}

SamplerConfig to_sampler_config(const Suggestion& s, double beta, std::uint64_t seed) {
  SamplerConfig c;
  c.algorithm = s.algorithm;
  c.eta = s.eta;
  c.beta = beta;
  c.batch = s.batch;
  c.epoch_len = s.epoch_len;
  c.steps = s.steps;
  c.seed = seed;
  return c;
}

nlohmann::json budget_report(const TheoryParams& p, std::size_t n, double epsilon) {
  const auto suggestions = suggest(p, n, epsilon);
  const double eta = suggestions.front().eta;
  const double lambda = spectral_gap(p);
  const auto floor = sgld_batch_floor(epsilon, p.d, lambda);

  nlohmann::json inputs = to_json(p);
  inputs["n"] = n;
  inputs["epsilon"] = epsilon;

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : suggestions) {
    nlohmann::json row = {{"algorithm", to_string(s.algorithm)},
                          {"eta", s.eta},
                          {"K", s.steps},
                          {"gradient_complexity", s.gradient_evaluations},
                          {"bound", to_json(s.bound)}};
    row["B"] = s.algorithm == Algorithm::gld ? nlohmann::json(nullptr) : nlohmann::json(s.batch);
    row["L"] = s.algorithm == Algorithm::vrsgld ? nlohmann::json(s.epoch_len) : nlohmann::json(nullptr);
    row["batch_clamped"] = s.batch_clamped;
    row["epoch_clamped"] = s.epoch_clamped;
    rows.push_back(row);
  }

  return {{"inputs", inputs},
          {"kappa", p.kappa()},
          {"lambda", lambda},
          {"theta", theta(p, eta)},
          {"gamma", gamma_bound(p)},
          {"G", p.G},
          {"R_M", r_m(p)},
          {"R_M_slope_form", r_m_slope_form(p)},
          {"safe_step_size", safe_step_size(p.M, p.m)},
          {"sgld_batch_floor", {{"value", floor.value}, {"up_to_constant", floor.up_to_constant}}},
          {"algorithms", rows}};
}

}  // namespace langevin::theory
