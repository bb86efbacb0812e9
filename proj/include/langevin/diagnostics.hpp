#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "langevin/dynamics.hpp"
#include "langevin/objectives.hpp"

namespace langevin::diagnostics {

struct Box {
  Vector lo;
  Vector hi;

  static Box cube(std::size_t d, double half_width);
  std::size_t dim() const { return static_cast<std::size_t>(lo.size()); }
};

/// Axis-aligned lattice with `points` nodes per axis, endpoints included.
/// Flat index runs over axis 0 fastest.
struct Grid {
  Box box;
  std::size_t points = 0;

  std::size_t dim() const { return box.dim(); }
  std::size_t size() const;
  double spacing(std::size_t axis) const;
  double cell_volume() const;
  Vector node(std::size_t flat) const;
  /// Product of per-axis trapezoid weights (h, or h/2 at the endpoints).
  double trapezoid_weight(std::size_t flat) const;
  /// Cell centred on the nearest node; nullopt outside the half-cell margin.
  std::optional<std::size_t> cell_of(const Vector& x) const;

  bool same_as(const Grid& other) const;
};

/// Values per node, interpreted as a density (mass per unit cell volume).
struct GridDensity {
  Grid grid;
  std::vector<double> values;
  double outside_fraction = 0.0;
  std::vector<std::string> warnings;

  double mass() const;
  /// "x[,y],density" rows.
  void write_csv(std::ostream& out) const;
};

class BoxTooSmall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// pi(x) = exp(-beta F_n(x)) / Q on a d <= 2 lattice.
struct GibbsTable {
  Grid grid;
  double beta = 1.0;
  std::vector<double> log_density;  // -beta F_n at each node (unnormalized)
  double log_Q = 0.0;
  double Q = 0.0;
  std::vector<double> density;      // normalized, trapezoid-weighted sum is 1
  double boundary_ratio = 0.0;      // max boundary density / peak density

  GridDensity as_density() const;
};

inline constexpr double kBoundaryTolerance = 1e-10;

/// Trapezoid quadrature. Throws BoxTooSmall when the boundary density exceeds
/// 1e-10 of the peak; std::invalid_argument for d > 2 or fewer than 16 points.
GibbsTable gibbs_quadrature(const FiniteSumObjective& obj, double beta, const Box& box,
                            std::size_t points_per_axis);

/// Starts from [-3 sqrt(Gamma), 3 sqrt(Gamma)] per axis (or a dissipativity
/// ball when G is unknown), widening by 1.5x until the boundary check passes.
GibbsTable gibbs_quadrature_auto(const FiniteSumObjective& obj, double beta,
                                 std::size_t points_per_axis);

/// Trapezoid-weighted E_pi[g].
double gibbs_expectation(const GibbsTable& table, const std::function<double(const Vector&)>& g);

/// Histogram over the table's cells, normalized by the total sample count
/// (mass outside the lattice is lost and reported). Needs >= 10^4 samples.
GridDensity empirical_density(const std::vector<Vector>& samples, const Grid& grid);

inline constexpr std::size_t kMinHistogramSamples = 10000;

/// (1/2) sum |p - q| cellvol. Throws on grid mismatch.
double total_variation(const GridDensity& p, const GridDensity& q);

struct MinimizerResult {
  Vector x_star;
  double f_star = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
};

class MinimizerNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMinimizerGradTolerance = 1e-8;

/// Coarse lattice scan over `box` followed by gradient descent (step 1/M) from
/// the best few nodes. Throws MinimizerNotFound when no refinement reaches
/// |grad F_n| <= 1e-8 within `refine_iters`.
MinimizerResult find_global_min(const FiniteSumObjective& obj, const Box& box,
                                std::size_t coarse_points, std::size_t refine_iters = 100000);

/// Scans the dissipativity ball |x| <= sqrt(b/m) (padded) and attaches x*.
FiniteSumObjective locate_minimizer(const FiniteSumObjective& obj, std::size_t coarse_points = 0);

enum class ProbeMode { exhaustive, montecarlo };

ProbeMode parse_probe_mode(const std::string& text);
std::string to_string(ProbeMode mode);

class CombinatorialBlowup : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kMaxExhaustiveSubsets = 1e6;

/// C(n, k) as a double (exact below 2^53).
double binomial(std::size_t n, std::size_t k);

struct MinibatchProbeReport {
  ProbeMode mode = ProbeMode::exhaustive;
  std::size_t n = 0;
  std::size_t batch = 0;
  std::size_t subsets = 0;      // subsets enumerated or drawn
  double measured = 0.0;        // E |mean_I grad f_i(x) - grad F_n(x)|^2
  double standard_error = 0.0;  // Monte Carlo only
  double predicted = 0.0;       // (n - B) / (B (n - 1)) * mean_i |u_i(x)|^2
  double ratio = 1.0;           // measured / predicted (1 when both vanish)
  double upper_bound = 0.0;     // 4 (n - B) (M |x| + G)^2 / (B (n - 1)); NaN without G
};

MinibatchProbeReport minibatch_variance_probe(const FiniteSumObjective& obj, const Vector& x,
                                              std::size_t batch, ProbeMode mode,
                                              std::size_t draws = 0, std::uint64_t seed = 0);

struct VrProbeReport {
  ProbeMode mode = ProbeMode::exhaustive;
  std::size_t n = 0;
  std::size_t batch = 0;
  std::size_t subsets = 0;
  double measured = 0.0;               // E |g_semi - grad F_n(z)|^2
  double standard_error = 0.0;
  double upper_bound = 0.0;            // M^2 (n - B) / (B (n - 1)) |z - z_snap|^2
  double unbiasedness_residual = 0.0;  // |mean g_semi - grad F_n(z)|
};

VrProbeReport vr_variance_probe(const FiniteSumObjective& obj, const Vector& z,
                                const Vector& z_snapshot, std::size_t batch, ProbeMode mode,
                                std::size_t draws = 0, std::uint64_t seed = 0);

nlohmann::json to_json(const MinibatchProbeReport& r);
nlohmann::json to_json(const VrProbeReport& r);

/// Parameters of the reference line |X_0|^2 + (2 beta (b + G^2) + 2d)/(beta - 4 eta) k eta.
struct ExpMomentReference {
  double beta = 1.0;
  double eta = 0.0;
  double b = 0.0;
  double G = 0.0;
  std::size_t d = 1;
};

struct MomentTrace {
  struct Record {
    std::uint64_t k;
    double value;
    double norm_sq;
    double mean_value;
    double mean_norm_sq;
  };

  std::vector<Record> records;  // strided
  std::uint64_t count = 0;
  double mean_norm_sq = 0.0;
  double mean_value = 0.0;
  double sup_mean_norm_sq = 0.0;
  double sup_mean_value = -std::numeric_limits<double>::infinity();
  double initial_norm_sq = 0.0;
  std::uint64_t last_k = 0;
  // log mean exp(|X_k|^2), kept as shift + log(sum exp(q - shift)).
  double lse_shift = -std::numeric_limits<double>::infinity();
  double lse_sum = 0.0;

  void push(std::uint64_t k, double value, double norm_sq, std::uint64_t stride);
  double log_mean_exp_norm_sq() const;
};

struct MomentSummary {
  std::uint64_t steps = 0;
  double sup_running_mean_norm_sq = 0.0;
  double sup_running_mean_value = 0.0;
  double final_mean_norm_sq = 0.0;
  double final_mean_value = 0.0;
  double log_mean_exp_norm_sq = 0.0;
  std::optional<double> reference_log_exp_moment;
};

MomentSummary summarize(const MomentTrace& trace,
                        const std::optional<ExpMomentReference>& reference = std::nullopt);
nlohmann::json to_json(const MomentSummary& s);

/// Running means of F_n and |x|^2 over post-step iterates.
class MomentTracker final : public Tracker {
 public:
  explicit MomentTracker(std::optional<ExpMomentReference> reference = std::nullopt,
                         std::uint64_t record_stride = 0);

  void start(const ChainState& state, const FiniteSumObjective& obj) override;
  void observe(const ChainState& state, const FiniteSumObjective& obj) override;
  std::string name() const override { return "moments"; }
  nlohmann::json summary() const override;

  /// Feed a value directly; used when the chain is not driven by run().
  void push(std::uint64_t k, double value, double norm_sq);
  const MomentTrace& trace() const { return trace_; }
  MomentSummary summarize() const;

 private:
  std::optional<ExpMomentReference> reference_;
  std::uint64_t stride_;
  MomentTrace trace_;
};

/// Stationary variance (2 eta / beta) / (1 - (1 - eta)^2) = 1 / (beta (1 - eta/2))
/// of GLD on a unit-curvature quadratic.
double ar1_stationary_variance(double eta, double beta);

}  // namespace langevin::diagnostics
