#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace langevin {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Analytic smoothness / dissipativity constants of a finite-sum objective.
///
/// M bounds the Lipschitz constant of every component gradient, (m, b) give
/// the dissipativity inequality <grad F_n(x), x> >= m|x|^2 - b, and G is the
/// offset in |grad f_i(x)| <= M|x| + G. G is only known once a global
/// minimizer has been located, so it is optional.
struct Certificate {
  double M = 0.0;
  double m = 0.0;
  double b = 0.0;
  std::optional<double> G;

  /// kappa = 2M(b*beta + m*beta + d)/m, the argument of the log in the spectral gap.
  double kappa(double beta, std::size_t d) const;
};

struct QuadraticParams {
  Matrix anchors;  // d x n, column i is a_i
};

struct CosineParams {
  double m0 = 1.0;
  double amplitude = 0.0;
  Matrix frequencies;  // d x n, column i is w_i
  Matrix offsets;      // d x n, column i is c_i
};

enum class Family { quadratic, cosine };

std::string to_string(Family family);
Family parse_family(const std::string& text);

/// F_n(x) = (1/n) sum_i f_i(x) over R^d.
///
/// Two families are supported:
///   quadratic  f_i(x) = |x - a_i|^2 / 2
///   cosine     f_i(x) = (m0/2)|x|^2 + A cos(<w_i, x>) + <c_i, x>
///
/// Instances are immutable; every evaluation method is const and safe to call
/// concurrently.
class FiniteSumObjective {
 public:
  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }
  Family family() const;
  const Certificate& certificate() const { return certificate_; }

  const QuadraticParams* quadratic() const { return std::get_if<QuadraticParams>(&params_); }
  const CosineParams* cosine() const { return std::get_if<CosineParams>(&params_); }

  /// Global minimizer, when one has been attached.
  const std::optional<Vector>& minimizer() const { return minimizer_; }

  double value(const Vector& x) const;
  double component_value(std::size_t i, const Vector& x) const;

  Vector component_gradient(std::size_t i, const Vector& x) const;
  Vector full_gradient(const Vector& x) const;

  // Allocation-free variants used by the samplers. `out` must have size d.
  void component_gradient_into(std::size_t i, const Vector& x, Vector& out) const;
  void full_gradient_into(const Vector& x, Vector& out, Vector& scratch) const;

  /// (1/|I|) sum_{i in I} grad f_i(x), summed in the order given. With
  /// I = {0, ..., n-1} this is bitwise identical to full_gradient_into.
  void mean_gradient_into(std::span<const std::size_t> indices, const Vector& x, Vector& out,
                          Vector& scratch) const;

  /// Copy with x* attached and G = g_constant(*this, x_star).
  FiniteSumObjective with_minimizer(const Vector& x_star) const;

  /// Copy with the certificate replaced. Only meant for falsification tests.
  FiniteSumObjective with_certificate(const Certificate& certificate) const;

  void check_dimension(const Vector& x) const;

 private:
  friend FiniteSumObjective make_quadratic(const std::vector<Vector>& anchors);
  friend FiniteSumObjective make_cosine(double m0, double amplitude, const std::vector<Vector>& w,
                                        const std::vector<Vector>& c);

  FiniteSumObjective() = default;

  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::variant<QuadraticParams, CosineParams> params_;
  Certificate certificate_;
  std::optional<Vector> minimizer_;
};

/// Quadratic family. Certificate M = 1, m = 1/2, b = max_i |a_i|^2, and the
/// minimizer mean(a_i) is attached immediately.
FiniteSumObjective make_quadratic(const std::vector<Vector>& anchors);

/// Quadratic-plus-cosine family. Certificate M = m0 + A max|w_i|^2, m = m0/2,
/// b = (A max|w_i| + |mean c_i|)^2 / (2 m0). G stays unset until a minimizer is
/// attached (see diagnostics::locate_minimizer).
FiniteSumObjective make_cosine(double m0, double amplitude, const std::vector<Vector>& w,
                               const std::vector<Vector>& c);

// Desk-scale benchmark instances shared by the tests, the acceptance suite and
// the shipped configs.
FiniteSumObjective benchmark_quadratic_1d();                // anchors {-2, -1, 1, 2}
FiniteSumObjective benchmark_cosine_1d();                   // m0 = 1, A = 0.5, w = (2), c = (0)
FiniteSumObjective benchmark_quadratic_2d(std::size_t n = 8, std::uint64_t seed = 7);
FiniteSumObjective benchmark_cosine_2d(std::size_t n = 16, std::uint64_t seed = 11);

struct CertificateReport {
  double radius = 0.0;
  std::size_t samples = 0;
  double max_smoothness_ratio = 0.0;            // max |grad f_i(x) - grad f_i(y)| / |x - y|
  double min_dissipativity_margin = 0.0;        // min <grad F(x), x> - (m|x|^2 - b)
  double max_gradient_bound_excess = 0.0;       // max |grad f_i(x)| - (M|x| + G)
  bool gradient_bound_checked = false;          // false when G is unknown
  std::size_t smoothness_violations = 0;
  std::size_t dissipativity_violations = 0;
  std::size_t gradient_bound_violations = 0;

  std::size_t violations() const {
    return smoothness_violations + dissipativity_violations + gradient_bound_violations;
  }
  bool certified() const { return violations() == 0; }
};

inline constexpr double kCertificateSlack = 1e-9;

/// Sampled falsification of the certificate within a ball of `radius`.
/// Half of the smoothness pairs are independent points, half are local
/// perturbations with log-uniform separation so curvature peaks are probed.
CertificateReport certify(const FiniteSumObjective& obj, double radius, std::size_t samples,
                          std::mt19937_64& rng);

nlohmann::json to_json(const CertificateReport& report);

// {family, n, d, parameters, certificate}. Doubles round-trip exactly.
nlohmann::json objective_to_json(const FiniteSumObjective& obj);
FiniteSumObjective objective_from_json(const nlohmann::json& doc);

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& doc);

}  // namespace langevin
