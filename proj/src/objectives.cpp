#include "langevin/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "langevin/theory.hpp"

namespace langevin {

namespace {

Matrix columns_from(const std::vector<Vector>& vectors, std::size_t d, const char* what) {
  Matrix out(d, vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (static_cast<std::size_t>(vectors[i].size()) != d) {
      std::ostringstream msg;
      msg << what << "[" << i << "] has dimension " << vectors[i].size() << ", expected " << d;
      throw DimensionError(msg.str());
    }
    out.col(static_cast<Eigen::Index>(i)) = vectors[i];
  }
  return out;
}

double max_column_norm(const Matrix& columns) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < columns.cols(); ++i) best = std::max(best, columns.col(i).norm());
  return best;
}

nlohmann::json matrix_columns_to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.cols(); ++i) out.push_back(vector_to_json(m.col(i)));
  return out;
}

std::vector<Vector> vectors_from_json(const nlohmann::json& doc, const char* field) {
  if (!doc.is_array()) throw std::invalid_argument(std::string(field) + " must be an array of vectors");
  std::vector<Vector> out;
  for (const auto& item : doc) out.push_back(vector_from_json(item));
  return out;
}

void expect_close(const nlohmann::json& cert, const char* key, double analytic) {
  if (!cert.contains(key) || cert.at(key).is_null()) return;
  const double stored = cert.at(key).get<double>();
  const double scale = std::max(1.0, std::abs(analytic));
  if (std::abs(stored - analytic) > 1e-12 * scale) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "certificate " << key << " = " << stored << " does not match the analytic value "
        << analytic;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

double Certificate::kappa(double beta, std::size_t d) const {
  return 2.0 * M * (b * beta + m * beta + static_cast<double>(d)) / m;
}

std::string to_string(Family family) {
  return family == Family::quadratic ? "quadratic" : "cosine";
}

Family parse_family(const std::string& text) {
  if (text == "quadratic") return Family::quadratic;
  if (text == "cosine") return Family::cosine;
  throw std::invalid_argument("unknown objective family '" + text + "'");
}

Family FiniteSumObjective::family() const {
  return std::holds_alternative<QuadraticParams>(params_) ? Family::quadratic : Family::cosine;
}

void FiniteSumObjective::check_dimension(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != d_) {
    std::ostringstream msg;
    msg << "point has dimension " << x.size() << ", objective has dimension " << d_;
    throw DimensionError(msg.str());
  }
}

double FiniteSumObjective::component_value(std::size_t i, const Vector& x) const {
  if (i >= n_) throw std::out_of_range("component index " + std::to_string(i) + " out of range");
  check_dimension(x);
  const auto col = static_cast<Eigen::Index>(i);
  if (const auto* q = quadratic()) return 0.5 * (x - q->anchors.col(col)).squaredNorm();
  const auto& c = std::get<CosineParams>(params_);
  return 0.5 * c.m0 * x.squaredNorm() + c.amplitude * std::cos(c.frequencies.col(col).dot(x)) +
         c.offsets.col(col).dot(x);
}

double FiniteSumObjective::value(const Vector& x) const {
  check_dimension(x);
  double sum = 0.0;
  for (std::size_t i = 0; i < n_; ++i) sum += component_value(i, x);
  return sum / static_cast<double>(n_);
}

void FiniteSumObjective::component_gradient_into(std::size_t i, const Vector& x,
                                                 Vector& out) const {
  const auto col = static_cast<Eigen::Index>(i);
  if (const auto* q = quadratic()) {
    out = x - q->anchors.col(col);
    return;
  }
  const auto& c = std::get<CosineParams>(params_);
  const double s = c.amplitude * std::sin(c.frequencies.col(col).dot(x));
  out = c.m0 * x - s * c.frequencies.col(col) + c.offsets.col(col);
}

Vector FiniteSumObjective::component_gradient(std::size_t i, const Vector& x) const {
  if (i >= n_) throw std::out_of_range("component index " + std::to_string(i) + " out of range");
  check_dimension(x);
  Vector out(static_cast<Eigen::Index>(d_));
  component_gradient_into(i, x, out);
  return out;
}

void FiniteSumObjective::mean_gradient_into(std::span<const std::size_t> indices, const Vector& x,
                                            Vector& out, Vector& scratch) const {
  out.setZero(static_cast<Eigen::Index>(d_));
  for (const std::size_t i : indices) {
    component_gradient_into(i, x, scratch);
    out += scratch;
  }
  out /= static_cast<double>(indices.size());
}

void FiniteSumObjective::full_gradient_into(const Vector& x, Vector& out, Vector& scratch) const {
  out.setZero(static_cast<Eigen::Index>(d_));
  for (std::size_t i = 0; i < n_; ++i) {
    component_gradient_into(i, x, scratch);
    out += scratch;
  }
  out /= static_cast<double>(n_);
}

Vector FiniteSumObjective::full_gradient(const Vector& x) const {
  check_dimension(x);
  Vector out(static_cast<Eigen::Index>(d_));
  Vector scratch(static_cast<Eigen::Index>(d_));
  full_gradient_into(x, out, scratch);
  return out;
}

FiniteSumObjective FiniteSumObjective::with_minimizer(const Vector& x_star) const {
  check_dimension(x_star);
  FiniteSumObjective copy = *this;
  copy.minimizer_ = x_star;
  copy.certificate_.G = theory::g_constant(*this, x_star);
  return copy;
}

FiniteSumObjective FiniteSumObjective::with_certificate(const Certificate& certificate) const {
  FiniteSumObjective copy = *this;
  copy.certificate_ = certificate;
  return copy;
}

FiniteSumObjective make_quadratic(const std::vector<Vector>& anchors) {
  if (anchors.empty()) throw std::invalid_argument("quadratic objective needs at least one anchor");
  const auto d = static_cast<std::size_t>(anchors.front().size());
  if (d == 0) throw DimensionError("anchors must have positive dimension");

  FiniteSumObjective obj;
  obj.n_ = anchors.size();
  obj.d_ = d;
  QuadraticParams params{columns_from(anchors, d, "anchor")};
  const double max_norm = max_column_norm(params.anchors);
  const Vector mean = params.anchors.rowwise().mean();
  obj.params_ = std::move(params);
  // <x - mean, x> >= |x|^2/2 - |mean|^2/2, and |mean| <= max |a_i|.
  obj.certificate_ = Certificate{1.0, 0.5, max_norm * max_norm, std::nullopt};
  return obj.with_minimizer(mean);
}

FiniteSumObjective make_cosine(double m0, double amplitude, const std::vector<Vector>& w,
                               const std::vector<Vector>& c) {
  if (!(m0 > 0.0)) throw std::invalid_argument("cosine objective needs m0 > 0");
  if (!(amplitude >= 0.0)) throw std::invalid_argument("cosine objective needs amplitude >= 0");
  if (w.empty()) throw std::invalid_argument("cosine objective needs at least one component");
  if (w.size() != c.size()) {
    throw std::invalid_argument("cosine objective has " + std::to_string(w.size()) +
                                " frequencies but " + std::to_string(c.size()) + " offsets");
  }
  const auto d = static_cast<std::size_t>(w.front().size());
  if (d == 0) throw DimensionError("frequencies must have positive dimension");

  FiniteSumObjective obj;
  obj.n_ = w.size();
  obj.d_ = d;
  CosineParams params{m0, amplitude, columns_from(w, d, "w"), columns_from(c, d, "c")};
  const double max_w = max_column_norm(params.frequencies);
  const double mean_c = params.offsets.rowwise().mean().norm();
  const double slope = amplitude * max_w + mean_c;
  obj.certificate_ = Certificate{m0 + amplitude * max_w * max_w, 0.5 * m0,
                                 slope * slope / (2.0 * m0), std::nullopt};
  obj.params_ = std::move(params);
  return obj;
}

FiniteSumObjective benchmark_quadratic_1d() {
  std::vector<Vector> anchors;
  for (const double a : {-2.0, -1.0, 1.0, 2.0}) anchors.push_back(Vector::Constant(1, a));
  return make_quadratic(anchors);
}

FiniteSumObjective benchmark_cosine_1d() {
  return make_cosine(1.0, 0.5, {Vector::Constant(1, 2.0)}, {Vector::Zero(1)});
}

FiniteSumObjective benchmark_quadratic_2d(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vector> anchors;
  for (std::size_t i = 0; i < n; ++i) anchors.push_back(Vector{{normal(rng), normal(rng)}});
  return make_quadratic(anchors);
}

FiniteSumObjective benchmark_cosine_2d(std::size_t n, std::uint64_t seed) {
  // Frequencies alternate between the two axes, so F_n carries
  // 0.5 cos(2 x1) + 0.5 cos(2 x2): four wells, negative curvature at the origin.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> offset(0.0, 0.25);
  std::vector<Vector> w;
  std::vector<Vector> c;
  for (std::size_t i = 0; i < n; ++i) {
    w.push_back(i % 2 == 0 ? Vector{{2.0, 0.0}} : Vector{{0.0, 2.0}});
    c.push_back(Vector{{offset(rng), offset(rng)}});
  }
  return make_cosine(1.0, 1.0, w, c);
}

CertificateReport certify(const FiniteSumObjective& obj, double radius, std::size_t samples,
                          std::mt19937_64& rng) {
  if (!(radius > 0.0)) throw std::invalid_argument("certify needs a positive radius");
  if (samples == 0) throw std::invalid_argument("certify needs at least one sample");

  const auto& cert = obj.certificate();
  const auto d = static_cast<Eigen::Index>(obj.d());
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  auto draw_in_ball = [&]() {
    Vector dir(d);
    for (Eigen::Index j = 0; j < d; ++j) dir(j) = normal(rng);
    const double r = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(d));
    const double len = dir.norm();
    return len > 0.0 ? Vector(dir * (r / len)) : Vector(Vector::Zero(d));
  };

  CertificateReport report;
  report.radius = radius;
  report.samples = samples;
  report.min_dissipativity_margin = std::numeric_limits<double>::infinity();
  report.max_gradient_bound_excess = -std::numeric_limits<double>::infinity();
  report.gradient_bound_checked = cert.G.has_value();

  Vector gx(d), gy(d);
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector x = draw_in_ball();
    Vector y;
    if (s % 2 == 0) {
      y = draw_in_ball();
    } else {
      Vector dir(d);
      for (Eigen::Index j = 0; j < d; ++j) dir(j) = normal(rng);
      const double scale = radius * std::pow(10.0, -4.0 * uniform(rng));
      y = x + dir.normalized() * scale;
    }
    const double dist = (x - y).norm();

    for (std::size_t i = 0; i < obj.n(); ++i) {
      obj.component_gradient_into(i, x, gx);
      if (dist > 0.0) {
        obj.component_gradient_into(i, y, gy);
        const double ratio = (gx - gy).norm() / dist;
        report.max_smoothness_ratio = std::max(report.max_smoothness_ratio, ratio);
        if (ratio - cert.M > kCertificateSlack) ++report.smoothness_violations;
      }
      if (cert.G) {
        const double excess = gx.norm() - (cert.M * x.norm() + *cert.G);
        report.max_gradient_bound_excess = std::max(report.max_gradient_bound_excess, excess);
        if (excess > kCertificateSlack) ++report.gradient_bound_violations;
      }
    }

    const double margin = obj.full_gradient(x).dot(x) - (cert.m * x.squaredNorm() - cert.b);
    report.min_dissipativity_margin = std::min(report.min_dissipativity_margin, margin);
    if (margin < -kCertificateSlack) ++report.dissipativity_violations;
  }
  if (!cert.G) report.max_gradient_bound_excess = 0.0;
  return report;
}

nlohmann::json to_json(const CertificateReport& r) {
  return {
      {"radius", r.radius},
      {"samples", r.samples},
      {"max_smoothness_ratio", r.max_smoothness_ratio},
      {"min_dissipativity_margin", r.min_dissipativity_margin},
      {"max_gradient_bound_excess", r.max_gradient_bound_excess},
      {"gradient_bound_checked", r.gradient_bound_checked},
      {"smoothness_violations", r.smoothness_violations},
      {"dissipativity_violations", r.dissipativity_violations},
      {"gradient_bound_violations", r.gradient_bound_violations},
      {"certified", r.certified()},
  };
}

nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const nlohmann::json& doc) {
  if (doc.is_number()) return Vector::Constant(1, doc.get<double>());
  if (!doc.is_array()) throw std::invalid_argument("expected a number array");
  Vector out(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number()) throw std::invalid_argument("expected a number array");
    out(static_cast<Eigen::Index>(i)) = doc[i].get<double>();
  }
  return out;
}

nlohmann::json objective_to_json(const FiniteSumObjective& obj) {
  nlohmann::json params;
  if (const auto* q = obj.quadratic()) {
    params["anchors"] = matrix_columns_to_json(q->anchors);
  } else {
    const auto* c = obj.cosine();
    params["m0"] = c->m0;
    params["amplitude"] = c->amplitude;
    params["w"] = matrix_columns_to_json(c->frequencies);
    params["c"] = matrix_columns_to_json(c->offsets);
  }
  const auto& cert = obj.certificate();
  nlohmann::json certificate = {{"M", cert.M}, {"m", cert.m}, {"b", cert.b}};
  certificate["G"] = cert.G ? nlohmann::json(*cert.G) : nlohmann::json(nullptr);
  certificate["x_star"] =
      obj.minimizer() ? vector_to_json(*obj.minimizer()) : nlohmann::json(nullptr);
  return {{"family", to_string(obj.family())},
          {"n", obj.n()},
          {"d", obj.d()},
          {"parameters", params},
          {"certificate", certificate}};
}

FiniteSumObjective objective_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("objective must be a JSON object");
  const Family family = parse_family(doc.at("family").get<std::string>());
  const auto& params = doc.at("parameters");

  FiniteSumObjective obj = family == Family::quadratic
                               ? make_quadratic(vectors_from_json(params.at("anchors"), "anchors"))
                               : make_cosine(params.at("m0").get<double>(),
                                             params.at("amplitude").get<double>(),
                                             vectors_from_json(params.at("w"), "w"),
                                             vectors_from_json(params.at("c"), "c"));

  if (doc.contains("n") && doc.at("n").get<std::size_t>() != obj.n()) {
    throw std::invalid_argument("declared n = " + doc.at("n").dump() + " but parameters give " +
                                std::to_string(obj.n()));
  }
  if (doc.contains("d") && doc.at("d").get<std::size_t>() != obj.d()) {
    throw std::invalid_argument("declared d = " + doc.at("d").dump() + " but parameters give " +
                                std::to_string(obj.d()));
  }

  if (!doc.contains("certificate") || doc.at("certificate").is_null()) return obj;
  const auto& cert = doc.at("certificate");
  expect_close(cert, "M", obj.certificate().M);
  expect_close(cert, "m", obj.certificate().m);
  expect_close(cert, "b", obj.certificate().b);

  if (cert.contains("x_star") && !cert.at("x_star").is_null()) {
    obj = obj.with_minimizer(vector_from_json(cert.at("x_star")));
    expect_close(cert, "G", *obj.certificate().G);
  } else if (cert.contains("G") && !cert.at("G").is_null()) {
    Certificate c = obj.certificate();
    c.G = cert.at("G").get<double>();
    obj = obj.with_certificate(c);
  }
  return obj;
}

}  // namespace langevin
