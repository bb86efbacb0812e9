#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include <json.hpp>

#include "langevin/dynamics.hpp"
#include "langevin/objectives.hpp"

// Closed-form constants, error bounds and budgets for GLD, SGLD and VR-SGLD.
//
// The absolute constants rho, C0, C1, C2 that the bounds carry are not known
// numerically; they are explicit inputs, and every report echoes them.
namespace langevin::theory {

struct TheoryParams {
  double M = 1.0;
  double m = 1.0;
  double b = 1.0;
  double beta = 1.0;
  std::size_t d = 1;
  double G = 0.0;
  double rho = 0.5;
  double c0 = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;

  /// Throws std::invalid_argument. rho = 1 is admitted as a limit case.
  void validate() const;
  double kappa() const;

  /// Pulls (M, m, b, G, d) from the objective's certificate. Throws when G is unset.
  static TheoryParams from_objective(const FiniteSumObjective& obj, double beta);
};

nlohmann::json to_json(const TheoryParams& p);
TheoryParams theory_params_from_json(const nlohmann::json& doc);

/// lambda = 2 m rho^d / log(kappa). Throws when kappa <= 1.
double spectral_gap(const TheoryParams& p);

/// Theta = C0 M s (m + e^{m eta} M s) / (m^2 rho^{d/2}), s = b beta + m beta + d.
double theta(const TheoryParams& p, double eta);

/// Gamma = 2 (1 + 1/m)(b + 2 G^2 + d/beta), the uniform L2 bound on the iterates.
double gamma_bound(const TheoryParams& p);

/// G = max_i |grad f_i(x*)| + M r*, where r* bounds |x*|.
///
/// The dissipativity inequality at a stationary point only gives
/// |x*| <= sqrt(b/m); r* = max(b/m, sqrt(b/m)) keeps the usual bM/m offset
/// whenever b >= m and stays a valid bound when b < m.
double g_constant(const FiniteSumObjective& obj, const Vector& x_star);

/// R_M = (d / 2 beta) log(e M (b beta / d + 1) / m).
double r_m(const TheoryParams& p);

/// Same shape with m beta / d in place of b beta / d.
double r_m_slope_form(const TheoryParams& p);

/// Each additive term of a bound, reported separately.
struct BoundTerms {
  double stochastic = 0.0;      // minibatch / variance-reduction term, 0 for GLD
  double transient = 0.0;       // Theta e^{-lambda K eta}
  double discretization = 0.0;  // C eta / beta
  double model = 0.0;           // R_M
  double total() const { return stochastic + transient + discretization + model; }
};

nlohmann::json to_json(const BoundTerms& terms);

BoundTerms gld_bound(const TheoryParams& p, double eta, std::uint64_t steps);

/// Requires n >= 2 and 1 <= B <= n; the stochastic term is exactly 0 at B = n.
BoundTerms sgld_bound(const TheoryParams& p, double eta, std::uint64_t steps, std::size_t n,
                      std::size_t batch);

BoundTerms vr_sgld_bound(const TheoryParams& p, double eta, std::uint64_t steps, std::size_t n,
                         std::size_t batch, std::size_t epoch_len);

class StepSizeTooLarge : public std::invalid_argument {
 public:
  StepSizeTooLarge(double eta, double max_eta);
  double eta;
  double max_eta;
};

/// Smallest K with theta e^{-lambda K eta} <= epsilon / 2 (0 when epsilon >= 2 theta).
std::uint64_t budget_steps(double theta_value, double lambda, double eta, double epsilon);

/// budget_steps with Theta and lambda taken from p. Throws StepSizeTooLarge
/// when C1 eta / beta > epsilon / 2.
std::uint64_t budget_gld(double epsilon, const TheoryParams& p, double eta);

/// Largest step size satisfying C1 eta / beta <= epsilon / 2.
double max_budget_step(double epsilon, const TheoryParams& p);

/// eta <= min{1, m / (2 M^2)}, the step-size region where the L2 bound applies.
double safe_step_size(double M, double m);

struct BatchFloor {
  double value = 0.0;
  bool up_to_constant = true;  // the floor holds up to an unknown absolute constant
};

/// d^6 / (lambda^4 eps^4) log^4(1/eps). Requires 0 < eps < 1.
BatchFloor sgld_batch_floor(double epsilon, std::size_t d, double lambda);

struct VrHyperparams {
  std::size_t batch = 1;
  std::size_t epoch_len = 1;
  double batch_raw = 1.0;  // sqrt(n) eps^{-3/2}
  double epoch_raw = 1.0;  // sqrt(n) eps^{3/2}
  bool batch_clamped = false;
  bool epoch_clamped = false;
};

/// B = round(sqrt(n) eps^{-3/2}) clamped to [1, n], L = max(1, round(sqrt(n) eps^{3/2})).
VrHyperparams vr_sgld_hyperparams(std::size_t n, double epsilon);

/// GLD n K; SGLD B K; VR-SGLD B K + n ceil(K / L).
std::uint64_t gradient_complexity(Algorithm algorithm, std::size_t n, std::uint64_t steps,
                                  std::size_t batch, std::size_t epoch_len);

/// Per-algorithm (eta, K, B, L) for target precision epsilon.
struct Suggestion {
  Algorithm algorithm = Algorithm::gld;
  double eta = 0.0;
  std::uint64_t steps = 0;
  std::size_t batch = 0;
  std::size_t epoch_len = 0;
  std::uint64_t gradient_evaluations = 0;
  BoundTerms bound;
  bool batch_clamped = false;
  bool epoch_clamped = false;
};

/// eta = min(safe_step_size, max_budget_step); K = budget_gld for every
/// algorithm (rounded up to a multiple of L for VR-SGLD); SGLD batch is the
/// batch floor clamped to n; VR-SGLD (B, L) from vr_sgld_hyperparams.
std::vector<Suggestion> suggest(const TheoryParams& p, std::size_t n, double epsilon);

SamplerConfig to_sampler_config(const Suggestion& s, double beta, std::uint64_t seed);

/// Inputs, lambda, Theta, Gamma, G, R_M and the per-algorithm table.
nlohmann::json budget_report(const TheoryParams& p, std::size_t n, double epsilon);

}  // namespace langevin::theory
