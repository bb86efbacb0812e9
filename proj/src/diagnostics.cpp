#include "langevin/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "langevin/theory.hpp"

namespace langevin::diagnostics {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) out *= base;
  return out;
}

void check_box(const Box& box) {
  require(box.lo.size() == box.hi.size() && box.lo.size() > 0, "box bounds must have equal, nonzero dimension");
  for (Eigen::Index a = 0; a < box.lo.size(); ++a) {
    require(std::isfinite(box.lo[a]) && std::isfinite(box.hi[a]) && box.lo[a] < box.hi[a],
            "box must satisfy lo < hi on every axis");
  }
}

// Every B-subset of {0..n-1} in lexicographic order.
template <typename Visit>
void for_each_subset(std::size_t n, std::size_t batch, Visit&& visit) {
  std::vector<std::size_t> idx(batch);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  while (true) {
    visit(std::span<const std::size_t>(idx));
    std::size_t pos = batch;
    while (pos > 0 && idx[pos - 1] == n - batch + pos - 1) --pos;
    if (pos == 0) return;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < batch; ++j) idx[j] = idx[j - 1] + 1;
  }
}

std::size_t resolve_subset_count(ProbeMode mode, std::size_t n, std::size_t batch, std::size_t draws) {
  if (mode == ProbeMode::exhaustive) {
    const double count = binomial(n, batch);
    if (count > kMaxExhaustiveSubsets) {
      std::ostringstream msg;
      msg << "exhaustive probe needs C(" << n << ", " << batch << ") = " << count
          << " subsets, above the cap of " << kMaxExhaustiveSubsets << "; use montecarlo mode";
      throw CombinatorialBlowup(msg.str());
    }
    return static_cast<std::size_t>(count);
  }
  require(draws >= 2, "montecarlo probe needs at least 2 draws");
  return draws;
}

template <typename Visit>
void visit_subsets(ProbeMode mode, std::size_t n, std::size_t batch, std::size_t draws,
                   std::uint64_t seed, Visit&& visit) {
  if (mode == ProbeMode::exhaustive) {
    for_each_subset(n, batch, visit);
    return;
  }
  SeededNoise noise(seed);
  std::vector<std::size_t> idx;
  for (std::size_t t = 0; t < draws; ++t) {
    noise.minibatch(n, batch, idx);
    visit(std::span<const std::size_t>(idx));
  }
}

double variance_fraction(std::size_t n, std::size_t batch) {
  if (n <= 1) return 0.0;
  return static_cast<double>(n - batch) / (static_cast<double>(batch) * static_cast<double>(n - 1));
}

// Streaming mean and second moment of a scalar sequence.
struct Accumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double standard_error() const {
    if (count < 2) return 0.0;
    const double c = static_cast<double>(count);
    const double var = std::max(0.0, (sum_sq - sum * sum / c) / (c - 1.0));
    return std::sqrt(var / c);
  }
};

}  // namespace

Box Box::cube(std::size_t d, double half_width) {
  require(d >= 1 && half_width > 0.0, "cube needs d >= 1 and a positive half width");
  return Box{Vector::Constant(static_cast<Eigen::Index>(d), -half_width),
             Vector::Constant(static_cast<Eigen::Index>(d), half_width)};
}

std::size_t Grid::size() const { return ipow(points, dim()); }

double Grid::spacing(std::size_t axis) const {
  const auto a = static_cast<Eigen::Index>(axis);
  return (box.hi[a] - box.lo[a]) / static_cast<double>(points - 1);
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (std::size_t a = 0; a < dim(); ++a) v *= spacing(a);
  return v;
}

Vector Grid::node(std::size_t flat) const {
  Vector x(static_cast<Eigen::Index>(dim()));
  for (std::size_t a = 0; a < dim(); ++a) {
    const std::size_t j = flat % points;
    flat /= points;
    x[static_cast<Eigen::Index>(a)] = box.lo[static_cast<Eigen::Index>(a)] + static_cast<double>(j) * spacing(a);
  }
  return x;
}

double Grid::trapezoid_weight(std::size_t flat) const {
  double w = 1.0;
  for (std::size_t a = 0; a < dim(); ++a) {
    const std::size_t j = flat % points;
    flat /= points;
    const double h = spacing(a);
    w *= (j == 0 || j == points - 1) ? 0.5 * h : h;
  }
  return w;
}

std::optional<std::size_t> Grid::cell_of(const Vector& x) const {
  std::size_t flat = 0;
  std::size_t stride = 1;
  for (std::size_t a = 0; a < dim(); ++a) {
    const double t = (x[static_cast<Eigen::Index>(a)] - box.lo[static_cast<Eigen::Index>(a)]) / spacing(a);
    const double j = std::floor(t + 0.5);
    if (!(j >= 0.0 && j < static_cast<double>(points))) return std::nullopt;
    flat += static_cast<std::size_t>(j) * stride;
    stride *= points;
  }
  return flat;
}

bool Grid::same_as(const Grid& other) const {
  return points == other.points && box.lo.size() == other.box.lo.size() && box.lo == other.box.lo &&
         box.hi == other.box.hi;
}

double GridDensity::mass() const {
  const double vol = grid.cell_volume();
  double total = 0.0;
  for (double v : values) total += v * vol;
  return total;
}

void GridDensity::write_csv(std::ostream& out) const {
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  out << (grid.dim() == 1 ? "x,density\n" : "x,y,density\n");
  for (std::size_t j = 0; j < values.size(); ++j) {
    const Vector x = grid.node(j);
    for (Eigen::Index a = 0; a < x.size(); ++a) out << x[a] << ',';
    out << values[j] << '\n';
  }
  out.precision(old_precision);
}

GridDensity GibbsTable::as_density() const { return GridDensity{grid, density, 0.0, {}}; }

GibbsTable gibbs_quadrature(const FiniteSumObjective& obj, double beta, const Box& box,
                            std::size_t points_per_axis) {
  if (obj.d() > 2) {
    throw std::invalid_argument("Gibbs quadrature supports d <= 2, got d = " + std::to_string(obj.d()));
  }
  require(points_per_axis >= 16, "Gibbs quadrature needs at least 16 points per axis");
  require(std::isfinite(beta) && beta > 0.0, "beta must be positive and finite");
  check_box(box);
  require(box.dim() == obj.d(), "box dimension does not match the objective");

  GibbsTable t;
  t.grid = Grid{box, points_per_axis};
  t.beta = beta;
  const std::size_t total = t.grid.size();
  t.log_density.resize(total);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < total; ++j) {
    t.log_density[j] = -beta * obj.value(t.grid.node(j));
    peak = std::max(peak, t.log_density[j]);
  }

  double boundary = 0.0;
  for (std::size_t j = 0; j < total; ++j) {
    std::size_t rest = j;
    bool on_edge = false;
    for (std::size_t a = 0; a < t.grid.dim(); ++a) {
      const std::size_t i = rest % points_per_axis;
      rest /= points_per_axis;
      on_edge = on_edge || i == 0 || i == points_per_axis - 1;
    }
    if (on_edge) boundary = std::max(boundary, std::exp(t.log_density[j] - peak));
  }
  t.boundary_ratio = boundary;
  if (!(boundary < kBoundaryTolerance)) {
    std::ostringstream msg;
    msg << "box too small: boundary density is " << boundary << " of the peak (limit "
        << kBoundaryTolerance << ")";
    throw BoxTooSmall(msg.str());
  }

  double scaled = 0.0;
  for (std::size_t j = 0; j < total; ++j) {
    scaled += t.grid.trapezoid_weight(j) * std::exp(t.log_density[j] - peak);
  }
  t.log_Q = peak + std::log(scaled);
  t.Q = std::exp(t.log_Q);
  t.density.resize(total);
  for (std::size_t j = 0; j < total; ++j) t.density[j] = std::exp(t.log_density[j] - t.log_Q);
  return t;
}

GibbsTable gibbs_quadrature_auto(const FiniteSumObjective& obj, double beta,
                                 std::size_t points_per_axis) {
  const auto& cert = obj.certificate();
  const double d = static_cast<double>(obj.d());
  const double g = cert.G.value_or(0.0);
  const double gamma = 2.0 * (1.0 + 1.0 / cert.m) * (cert.b + 2.0 * g * g + d / beta);
  const Vector centre = obj.minimizer().value_or(Vector::Zero(static_cast<Eigen::Index>(obj.d())));
  double half = 3.0 * std::sqrt(gamma);
  for (int attempt = 0; attempt < 40; ++attempt) {
    const Vector offset = Vector::Constant(static_cast<Eigen::Index>(obj.d()), half);
    try {
      return gibbs_quadrature(obj, beta, Box{centre - offset, centre + offset}, points_per_axis);
    } catch (const BoxTooSmall&) {
      half *= 1.5;
    }
  }
  throw BoxTooSmall("automatic box widening did not pass the boundary check");
}

double gibbs_expectation(const GibbsTable& table, const std::function<double(const Vector&)>& g) {
  double total = 0.0;
  for (std::size_t j = 0; j < table.density.size(); ++j) {
    if (table.density[j] == 0.0) continue;
    total += table.grid.trapezoid_weight(j) * table.density[j] * g(table.grid.node(j));
  }
  return total;
}

GridDensity empirical_density(const std::vector<Vector>& samples, const Grid& grid) {
  require(grid.dim() <= 2, "empirical density supports d <= 2");
  require(grid.points >= 2, "grid needs at least 2 points per axis");
  if (samples.size() < kMinHistogramSamples) {
    throw std::invalid_argument("empirical density needs at least " + std::to_string(kMinHistogramSamples) +
                                " samples, got " + std::to_string(samples.size()));
  }
  GridDensity out{grid, std::vector<double>(grid.size(), 0.0), 0.0, {}};
  std::size_t outside = 0;
  for (const Vector& x : samples) {
    require(static_cast<std::size_t>(x.size()) == grid.dim(), "sample dimension does not match the grid");
    if (const auto cell = grid.cell_of(x)) {
      out.values[*cell] += 1.0;
    } else {
      ++outside;
    }
  }
  const double n = static_cast<double>(samples.size());
  const double scale = 1.0 / (n * grid.cell_volume());
  for (double& v : out.values) v *= scale;
  out.outside_fraction = static_cast<double>(outside) / n;
  if (out.outside_fraction > 0.01) {
    std::ostringstream msg;
    msg << "fraction " << out.outside_fraction << " of samples fell outside the grid";
    out.warnings.push_back(msg.str());
  }
  return out;
}

double total_variation(const GridDensity& p, const GridDensity& q) {
  if (!p.grid.same_as(q.grid) || p.values.size() != q.values.size()) {
    throw std::invalid_argument("total variation needs densities on the same grid");
  }
  const double vol = p.grid.cell_volume();
  double total = 0.0;
  for (std::size_t j = 0; j < p.values.size(); ++j) total += std::abs(p.values[j] - q.values[j]);
  return std::min(1.0, 0.5 * total * vol);
}

MinimizerResult find_global_min(const FiniteSumObjective& obj, const Box& box,
                                std::size_t coarse_points, std::size_t refine_iters) {
  check_box(box);
  require(box.dim() == obj.d(), "box dimension does not match the objective");
  require(coarse_points >= 2, "coarse scan needs at least 2 points per axis");
  const double nodes = std::pow(static_cast<double>(coarse_points), static_cast<double>(obj.d()));
  require(nodes <= 1e7, "coarse scan would visit more than 10^7 nodes");

  const Grid grid{box, coarse_points};
  const std::size_t total = grid.size();
  std::vector<double> values(total);
  for (std::size_t j = 0; j < total; ++j) values[j] = obj.value(grid.node(j));

  // Lattice local minima along every axis, best first.
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < total; ++j) {
    bool local = true;
    std::size_t stride = 1;
    std::size_t rest = j;
    for (std::size_t a = 0; a < grid.dim() && local; ++a) {
      const std::size_t i = rest % coarse_points;
      rest /= coarse_points;
      if (i > 0 && values[j - stride] < values[j]) local = false;
      if (i + 1 < coarse_points && values[j + stride] < values[j]) local = false;
      stride *= coarse_points;
    }
    if (local) candidates.push_back(j);
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  constexpr std::size_t kMaxCandidates = 8;
  if (candidates.size() > kMaxCandidates) candidates.resize(kMaxCandidates);

  const double step = 1.0 / obj.certificate().M;
  Vector grad(static_cast<Eigen::Index>(obj.d()));
  Vector scratch(static_cast<Eigen::Index>(obj.d()));
  std::optional<MinimizerResult> best;
  double best_grad_seen = std::numeric_limits<double>::infinity();
  for (const std::size_t start : candidates) {
    MinimizerResult r;
    r.x_star = grid.node(start);
    obj.full_gradient_into(r.x_star, grad, scratch);
    while (r.iterations < refine_iters && grad.norm() > 1e-13) {
      r.x_star -= step * grad;
      obj.full_gradient_into(r.x_star, grad, scratch);
      ++r.iterations;
    }
    r.grad_norm = grad.norm();
    r.f_star = obj.value(r.x_star);
    best_grad_seen = std::min(best_grad_seen, r.grad_norm);
    if (r.grad_norm > kMinimizerGradTolerance) continue;
    if (!best || r.f_star < best->f_star) best = std::move(r);
  }
  if (!best) {
    std::ostringstream msg;
    msg << "minimizer refinement stalled at |grad| = " << best_grad_seen << " (tolerance "
        << kMinimizerGradTolerance << ")";
    throw MinimizerNotFound(msg.str());
  }
  return *best;
}

FiniteSumObjective locate_minimizer(const FiniteSumObjective& obj, std::size_t coarse_points) {
  const auto& cert = obj.certificate();
  const double ratio = cert.b / cert.m;
  const double radius = 1.1 * std::max(ratio, std::sqrt(ratio)) + 1e-3;
  if (coarse_points == 0) {
    switch (obj.d()) {
      case 1: coarse_points = 4001; break;
      case 2: coarse_points = 401; break;
      default:
        coarse_points = std::max<std::size_t>(
            3, static_cast<std::size_t>(std::floor(std::pow(1e6, 1.0 / static_cast<double>(obj.d())))));
    }
  }
  const MinimizerResult r = find_global_min(obj, Box::cube(obj.d(), radius), coarse_points);
  return obj.with_minimizer(r.x_star);
}

ProbeMode parse_probe_mode(const std::string& text) {
  if (text == "exhaustive") return ProbeMode::exhaustive;
  if (text == "montecarlo" || text == "monte-carlo") return ProbeMode::montecarlo;
  throw std::invalid_argument("unknown probe mode '" + text + "' (expected exhaustive or montecarlo)");
}

std::string to_string(ProbeMode mode) {
  return mode == ProbeMode::exhaustive ? "exhaustive" : "montecarlo";
}

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double out = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    out = out * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::round(out);
}

MinibatchProbeReport minibatch_variance_probe(const FiniteSumObjective& obj, const Vector& x,
                                              std::size_t batch, ProbeMode mode, std::size_t draws,
                                              std::uint64_t seed) {
  obj.check_dimension(x);
  const std::size_t n = obj.n();
  require(batch >= 1 && batch <= n, "batch must lie in [1, n]");
  MinibatchProbeReport r;
  r.mode = mode;
  r.n = n;
  r.batch = batch;
  r.subsets = resolve_subset_count(mode, n, batch, draws);

  const Vector full = obj.full_gradient(x);
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_sq += (obj.component_gradient(i, x) - full).squaredNorm();
  mean_sq /= static_cast<double>(n);

  // Through the sampler's own minibatch mean, so B = n gives exactly zero.
  Accumulator acc;
  Vector s(static_cast<Eigen::Index>(obj.d()));
  Vector scratch(static_cast<Eigen::Index>(obj.d()));
  visit_subsets(mode, n, batch, draws, seed, [&](std::span<const std::size_t> idx) {
    obj.mean_gradient_into(idx, x, s, scratch);
    acc.add((s - full).squaredNorm());
  });
  r.measured = acc.mean();
  r.standard_error = mode == ProbeMode::montecarlo ? acc.standard_error() : 0.0;
  r.predicted = variance_fraction(n, batch) * mean_sq;
  if (r.predicted == 0.0) {
    r.ratio = r.measured == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  } else {
    r.ratio = r.measured / r.predicted;
  }
  const auto& cert = obj.certificate();
  if (cert.G) {
    const double spread = cert.M * x.norm() + *cert.G;
    r.upper_bound = 4.0 * variance_fraction(n, batch) * spread * spread;
  } else {
    r.upper_bound = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

VrProbeReport vr_variance_probe(const FiniteSumObjective& obj, const Vector& z,
                                const Vector& z_snapshot, std::size_t batch, ProbeMode mode,
                                std::size_t draws, std::uint64_t seed) {
  obj.check_dimension(z);
  obj.check_dimension(z_snapshot);
  const std::size_t n = obj.n();
  require(batch >= 1 && batch <= n, "batch must lie in [1, n]");
  VrProbeReport r;
  r.mode = mode;
  r.n = n;
  r.batch = batch;
  r.subsets = resolve_subset_count(mode, n, batch, draws);

  StepScratch scratch(obj.d());
  Vector full(static_cast<Eigen::Index>(obj.d()));
  Vector snapshot_grad(static_cast<Eigen::Index>(obj.d()));
  obj.full_gradient_into(z, full, scratch.term);
  obj.full_gradient_into(z_snapshot, snapshot_grad, scratch.term);

  Accumulator acc;
  Vector g(static_cast<Eigen::Index>(obj.d()));
  Vector g_sum = Vector::Zero(static_cast<Eigen::Index>(obj.d()));
  visit_subsets(mode, n, batch, draws, seed, [&](std::span<const std::size_t> idx) {
    semi_stochastic_gradient_into(obj, z, z_snapshot, snapshot_grad, idx, g, scratch);
    g_sum += g;
    acc.add((g - full).squaredNorm());
  });
  r.measured = acc.mean();
  r.standard_error = mode == ProbeMode::montecarlo ? acc.standard_error() : 0.0;
  r.unbiasedness_residual = (g_sum / static_cast<double>(acc.count) - full).norm();
  const double M = obj.certificate().M;
  r.upper_bound = M * M * variance_fraction(n, batch) * (z - z_snapshot).squaredNorm();
  return r;
}

namespace {

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const MinibatchProbeReport& r) {
  return {{"probe", "minibatch"},
          {"mode", to_string(r.mode)},
          {"n", r.n},
          {"batch", r.batch},
          {"subsets", r.subsets},
          {"measured", r.measured},
          {"standard_error", r.standard_error},
          {"predicted", r.predicted},
          {"ratio", finite_or_null(r.ratio)},
          {"upper_bound", finite_or_null(r.upper_bound)},
          {"within_bound", std::isfinite(r.upper_bound) ? nlohmann::json(r.measured <= r.upper_bound)
                                                        : nlohmann::json(nullptr)}};
}

nlohmann::json to_json(const VrProbeReport& r) {
  return {{"probe", "vr"},
          {"mode", to_string(r.mode)},
          {"n", r.n},
          {"batch", r.batch},
          {"subsets", r.subsets},
          {"measured", r.measured},
          {"standard_error", r.standard_error},
          {"upper_bound", r.upper_bound},
          {"within_bound", r.measured <= r.upper_bound},
          {"unbiasedness_residual", r.unbiasedness_residual}};
}

void MomentTrace::push(std::uint64_t k, double value, double norm_sq, std::uint64_t stride) {
  ++count;
  const double c = static_cast<double>(count);
  // Welford-style prefix means; exact up to rounding.
  mean_norm_sq += (norm_sq - mean_norm_sq) / c;
  mean_value += (value - mean_value) / c;
  sup_mean_norm_sq = std::max(sup_mean_norm_sq, mean_norm_sq);
  sup_mean_value = std::max(sup_mean_value, mean_value);
  last_k = k;
  if (norm_sq > lse_shift) {
    lse_sum = lse_sum * std::exp(lse_shift - norm_sq) + 1.0;
    lse_shift = norm_sq;
  } else {
    lse_sum += std::exp(norm_sq - lse_shift);
  }
  if (stride > 0 && k % stride == 0) {
    records.push_back(Record{k, value, norm_sq, mean_value, mean_norm_sq});
  }
}

double MomentTrace::log_mean_exp_norm_sq() const {
  if (count == 0) return -std::numeric_limits<double>::infinity();
  return lse_shift + std::log(lse_sum) - std::log(static_cast<double>(count));
}

MomentSummary summarize(const MomentTrace& trace, const std::optional<ExpMomentReference>& reference) {
  MomentSummary s;
  s.steps = trace.count;
  s.sup_running_mean_norm_sq = trace.sup_mean_norm_sq;
  s.sup_running_mean_value = trace.count ? trace.sup_mean_value : 0.0;
  s.final_mean_norm_sq = trace.mean_norm_sq;
  s.final_mean_value = trace.mean_value;
  s.log_mean_exp_norm_sq = trace.count ? trace.log_mean_exp_norm_sq() : 0.0;
  if (reference && reference->beta > 4.0 * reference->eta) {
    const auto& ref = *reference;
    const double slope = (2.0 * ref.beta * (ref.b + ref.G * ref.G) + 2.0 * static_cast<double>(ref.d)) /
                         (ref.beta - 4.0 * ref.eta);
    s.reference_log_exp_moment =
        trace.initial_norm_sq + slope * static_cast<double>(trace.last_k) * ref.eta;
  }
  return s;
}

nlohmann::json to_json(const MomentSummary& s) {
  nlohmann::json out{{"steps", s.steps},
                     {"sup_running_mean_norm_sq", s.sup_running_mean_norm_sq},
                     {"sup_running_mean_F_n", s.sup_running_mean_value},
                     {"final_mean_norm_sq", s.final_mean_norm_sq},
                     {"final_mean_F_n", s.final_mean_value},
                     {"log_mean_exp_norm_sq", finite_or_null(s.log_mean_exp_norm_sq)}};
  out["reference_log_exp_moment"] =
      s.reference_log_exp_moment ? nlohmann::json(*s.reference_log_exp_moment) : nlohmann::json(nullptr);
  return out;
}

MomentTracker::MomentTracker(std::optional<ExpMomentReference> reference, std::uint64_t record_stride)
    : reference_(reference), stride_(record_stride) {}

void MomentTracker::start(const ChainState& state, const FiniteSumObjective& /*obj*/) {
  trace_ = MomentTrace{};
  trace_.initial_norm_sq = state.x.squaredNorm();
  trace_.last_k = state.k;
}

void MomentTracker::observe(const ChainState& state, const FiniteSumObjective& obj) {
  push(state.k, obj.value(state.x), state.x.squaredNorm());
}

void MomentTracker::push(std::uint64_t k, double value, double norm_sq) {
  trace_.push(k, value, norm_sq, stride_);
}

MomentSummary MomentTracker::summarize() const { return diagnostics::summarize(trace_, reference_); }

nlohmann::json MomentTracker::summary() const {
  nlohmann::json out = to_json(summarize());
  out["tracker"] = name();
  return out;
}

double ar1_stationary_variance(double eta, double beta) {
  require(eta > 0.0 && eta < 2.0 && beta > 0.0, "AR(1) variance needs 0 < eta < 2 and beta > 0");
  const double contraction = 1.0 - eta;
  return (2.0 * eta / beta) / (1.0 - contraction * contraction);
}

}  // namespace langevin::diagnostics
