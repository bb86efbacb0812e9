#include "langevin/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "langevin/theory.hpp"

namespace langevin::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& errors) {
  std::string out = "invalid experiment plan";
  for (const auto& e : errors) out += "; " + e;
  return out;
}

// Typed field access that records a message instead of throwing.
class Reader {
 public:
  Reader(const json& doc, std::string where, std::vector<std::string>& errors)
      : doc_(doc), where_(std::move(where)), errors_(errors) {}

  bool is_object() const { return doc_.is_object(); }
  bool has(const char* key) const { return doc_.is_object() && doc_.contains(key) && !doc_.at(key).is_null(); }
  const json& raw(const char* key) const { return doc_.at(key); }
  std::string at(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void fail(const std::string& msg) { errors_.push_back(msg); }

  std::optional<double> number(const char* key, bool required) {
    if (!has(key)) return missing<double>(key, required);
    const json& v = doc_.at(key);
    if (!v.is_number()) return wrong<double>(key, "a number");
    return v.get<double>();
  }

  std::optional<std::uint64_t> unsigned_int(const char* key, bool required) {
    if (!has(key)) return missing<std::uint64_t>(key, required);
    const json& v = doc_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      if (v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
      fail(at(key) + " = " + v.dump() + " must be nonnegative");
      return std::nullopt;
    }
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    return wrong<std::uint64_t>(key, "a nonnegative integer");
  }

  std::optional<std::string> string(const char* key, bool required) {
    if (!has(key)) return missing<std::string>(key, required);
    const json& v = doc_.at(key);
    if (!v.is_string()) return wrong<std::string>(key, "a string");
    return v.get<std::string>();
  }

  std::optional<bool> boolean(const char* key, bool required) {
    if (!has(key)) return missing<bool>(key, required);
    const json& v = doc_.at(key);
    if (!v.is_boolean()) return wrong<bool>(key, "a boolean");
    return v.get<bool>();
  }

  std::optional<Vector> vector(const char* key, bool required, std::size_t d) {
    if (!has(key)) return missing<Vector>(key, required);
    try {
      Vector v = vector_from_json(doc_.at(key));
      if (static_cast<std::size_t>(v.size()) != d) {
        fail(at(key) + " has dimension " + std::to_string(v.size()) + ", objective has d = " + std::to_string(d));
        return std::nullopt;
      }
      return v;
    } catch (const std::exception&) {
      return wrong<Vector>(key, "an array of numbers");
    }
  }

  void reject_unknown(std::initializer_list<const char*> known) {
    if (!doc_.is_object()) {
      fail((where_.empty() ? std::string("plan") : where_) + " must be an object");
      return;
    }
    for (const auto& [key, value] : doc_.items()) {
      if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
        fail(at(key.c_str()) + " is not a recognised field");
      }
    }
  }

 private:
  template <typename T>
  std::optional<T> missing(const char* key, bool required) {
    if (required) fail(at(key) + " is required");
    return std::nullopt;
  }
  template <typename T>
  std::optional<T> wrong(const char* key, const char* expected) {
    fail(at(key) + " must be " + expected + ", got " + doc_.at(key).dump());
    return std::nullopt;
  }

  const json& doc_;
  std::string where_;
  std::vector<std::string>& errors_;
};

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string number_tag(double v) {
  std::ostringstream s;
  s << v;
  std::string out = s.str();
  std::replace(out.begin(), out.end(), '.', 'p');
  std::replace(out.begin(), out.end(), '-', 'm');
  std::replace(out.begin(), out.end(), '+', '_');
  return out;
}

std::string safe_name(const std::string& name) {
  std::string out = name;
  for (char& ch : out) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_')) ch = '_';
  }
  return out;
}

json sampler_to_json(const SamplerSpec& s) {
  json out = langevin::to_json(s.config);
  out.erase("seed");
  out["name"] = s.name;
  return out;
}

json probe_to_json(const ProbeRequest& p) {
  json out{{"kind", p.kind == ProbeRequest::Kind::minibatch ? "minibatch" : "vr"},
           {"batch", p.batch},
           {"mode", diagnostics::to_string(p.mode)},
           {"draws", p.draws},
           {"seed", p.seed},
           {"x", vector_to_json(p.x)}};
  if (p.kind == ProbeRequest::Kind::vr) out["z_snapshot"] = vector_to_json(p.z_snapshot);
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

PlanValidationError::PlanValidationError(std::vector<std::string> errors)
    : std::invalid_argument(join(errors)), errors_(std::move(errors)) {}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(digest[i]);
  return out.str();
}

FiniteSumObjective benchmark_by_name(const std::string& name) {
  if (name == "quadratic_1d") return benchmark_quadratic_1d();
  if (name == "cosine_1d") return benchmark_cosine_1d();
  if (name == "quadratic_2d") return benchmark_quadratic_2d();
  if (name == "cosine_2d") return benchmark_cosine_2d();
  throw std::invalid_argument("unknown benchmark '" + name +
                              "' (expected quadratic_1d, cosine_1d, quadratic_2d or cosine_2d)");
}

FiniteSumObjective objective_from_spec(const json& doc) {
  if (doc.is_object() && doc.contains("benchmark")) {
    if (!doc.at("benchmark").is_string()) throw std::invalid_argument("benchmark must be a string");
    return benchmark_by_name(doc.at("benchmark").get<std::string>());
  }
  return objective_from_json(doc);
}

FiniteSumObjective random_objective(Family family, std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n == 0 || d == 0) throw std::invalid_argument("random objective needs n >= 1 and d >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](double scale) {
    Vector v(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = scale * normal(rng);
    return v;
  };
  if (family == Family::quadratic) {
    std::vector<Vector> anchors;
    for (std::size_t i = 0; i < n; ++i) anchors.push_back(gaussian(1.0));
    return make_quadratic(anchors);
  }
  std::vector<Vector> w;
  std::vector<Vector> c;
  for (std::size_t i = 0; i < n; ++i) {
    Vector dir = gaussian(1.0);
    while (dir.norm() < 1e-8) dir = gaussian(1.0);
    w.push_back(2.0 * dir / dir.norm());
    c.push_back(gaussian(0.25));
  }
  return make_cosine(1.0, 0.5, w, c);
}

ExperimentPlan parse_plan(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw PlanValidationError({std::string("plan is not valid JSON: ") + e.what()});
  }
  return parse_plan(doc);
}

ExperimentPlan load_plan(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open plan file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_plan(buf.str());
}

ExperimentPlan parse_plan(const json& doc) {
  std::vector<std::string> errors;
  ExperimentPlan plan;
  if (!doc.is_object()) throw PlanValidationError({"plan must be a JSON object"});
  Reader top(doc, "", errors);
  top.reject_unknown({"schema_version", "objective", "samplers", "replications", "trackers",
                      "diagnostics", "output_dir"});

  if (auto v = top.unsigned_int("schema_version", true)) {
    if (*v != static_cast<std::uint64_t>(kSchemaVersion)) {
      errors.push_back("schema_version = " + std::to_string(*v) + " is not supported (expected " +
                       std::to_string(kSchemaVersion) + ")");
    }
    plan.schema_version = static_cast<int>(*v);
  }

  if (!top.has("objective")) {
    errors.push_back("objective is required");
  } else {
    try {
      plan.objective = std::make_shared<const FiniteSumObjective>(objective_from_spec(doc.at("objective")));
    } catch (const std::exception& e) {
      errors.push_back(std::string("objective: ") + e.what());
    }
  }
  const std::size_t n = plan.objective ? plan.objective->n() : 0;
  const std::size_t d = plan.objective ? plan.objective->d() : 0;

  if (!top.has("samplers") || !doc.at("samplers").is_array() || doc.at("samplers").empty()) {
    errors.push_back("samplers must be a non-empty array");
  } else {
    std::set<std::string> names;
    const json& list = doc.at("samplers");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "samplers[" + std::to_string(i) + "]";
      if (!list[i].is_object()) {
        errors.push_back(where + " must be an object");
        continue;
      }
      Reader r(list[i], where, errors);
      r.reject_unknown({"name", "algorithm", "eta", "beta", "steps", "batch", "epoch_len", "x0"});
      SamplerSpec spec;
      bool ok = true;
      if (auto a = r.string("algorithm", true)) {
        try {
          spec.config.algorithm = parse_algorithm(*a);
        } catch (const std::exception& e) {
          errors.push_back(r.at("algorithm") + ": " + e.what());
          ok = false;
        }
      } else {
        ok = false;
      }
      if (auto v = r.number("eta", true)) spec.config.eta = *v; else ok = false;
      if (auto v = r.number("beta", true)) spec.config.beta = *v; else ok = false;
      if (auto v = r.unsigned_int("steps", true)) spec.config.steps = *v; else ok = false;
      const bool stochastic = ok && spec.config.algorithm != Algorithm::gld;
      if (auto v = r.unsigned_int("batch", stochastic)) spec.config.batch = static_cast<std::size_t>(*v);
      else if (stochastic) ok = false;
      const bool vr = ok && spec.config.algorithm == Algorithm::vrsgld;
      if (auto v = r.unsigned_int("epoch_len", vr)) spec.config.epoch_len = static_cast<std::size_t>(*v);
      else if (vr) ok = false;
      if (plan.objective && r.has("x0")) {
        if (auto v = r.vector("x0", false, d)) spec.config.x0 = *v; else ok = false;
      }
      spec.name = r.string("name", false).value_or(to_string(spec.config.algorithm) + "_" + std::to_string(i));
      if (!names.insert(spec.name).second) {
        errors.push_back(where + ".name '" + spec.name + "' is used by another sampler");
      }
      if (ok && plan.objective) {
        for (const auto& e : spec.config.validate(n, d)) errors.push_back(where + " (" + spec.name + "): " + e);
      }
      plan.samplers.push_back(std::move(spec));
    }
  }

  if (top.has("replications")) {
    Reader r(doc.at("replications"), "replications", errors);
    if (!r.is_object()) {
      errors.push_back("replications must be an object");
    } else {
      r.reject_unknown({"count", "base_seed"});
      if (auto v = r.unsigned_int("count", false)) plan.replications.count = static_cast<std::size_t>(*v);
      if (auto v = r.unsigned_int("base_seed", false)) plan.replications.base_seed = *v;
      if (plan.replications.count == 0) errors.push_back("replications.count must be at least 1");
      if (plan.replications.count > 0 &&
          plan.replications.base_seed > UINT64_MAX - (plan.replications.count - 1)) {
        errors.push_back("replications.base_seed + count overflows, replica seeds would collide");
      }
    }
  }

  if (top.has("trackers")) {
    Reader r(doc.at("trackers"), "trackers", errors);
    if (!r.is_object()) {
      errors.push_back("trackers must be an object");
    } else {
      r.reject_unknown({"moments", "trace"});
      plan.trackers.moments = r.boolean("moments", false).value_or(false);
      if (r.has("trace")) {
        Reader t(r.raw("trace"), "trackers.trace", errors);
        t.reject_unknown({"stride"});
        const auto stride = t.unsigned_int("stride", false).value_or(1);
        if (stride == 0) errors.push_back("trackers.trace.stride must be at least 1");
        plan.trackers.trace_stride = stride;
      }
    }
  }

  if (top.has("diagnostics")) {
    const json& diag = doc.at("diagnostics");
    Reader r(diag, "diagnostics", errors);
    r.reject_unknown({"gibbs", "probes", "budget"});
    if (r.has("gibbs")) {
      Reader g(diag.at("gibbs"), "diagnostics.gibbs", errors);
      g.reject_unknown({"betas", "points"});
      GibbsRequest req;
      if (g.has("betas")) {
        const json& betas = diag.at("gibbs").at("betas");
        if (!betas.is_array()) errors.push_back("diagnostics.gibbs.betas must be an array");
        else
          for (const auto& b : betas) {
            if (!b.is_number() || !(b.get<double>() > 0.0)) {
              errors.push_back("diagnostics.gibbs.betas entries must be positive numbers, got " + b.dump());
            } else {
              req.betas.push_back(b.get<double>());
            }
          }
      }
      if (auto v = g.unsigned_int("points", false)) req.points = static_cast<std::size_t>(*v);
      if (req.points < 16) errors.push_back("diagnostics.gibbs.points must be at least 16");
      if (plan.objective && d > 2) errors.push_back("diagnostics.gibbs needs d <= 2, objective has d = " + std::to_string(d));
      plan.diagnostics.gibbs = req;
    }
    if (r.has("probes")) {
      const json& probes = diag.at("probes");
      if (!probes.is_array()) errors.push_back("diagnostics.probes must be an array");
      else
        for (std::size_t i = 0; i < probes.size(); ++i) {
          const std::string where = "diagnostics.probes[" + std::to_string(i) + "]";
          Reader p(probes[i], where, errors);
          p.reject_unknown({"kind", "batch", "mode", "draws", "seed", "x", "z_snapshot"});
          ProbeRequest req;
          const std::string kind = p.string("kind", false).value_or("minibatch");
          if (kind == "minibatch") req.kind = ProbeRequest::Kind::minibatch;
          else if (kind == "vr") req.kind = ProbeRequest::Kind::vr;
          else errors.push_back(where + ".kind must be minibatch or vr, got '" + kind + "'");
          if (auto v = p.unsigned_int("batch", true)) req.batch = static_cast<std::size_t>(*v);
          if (plan.objective && (req.batch == 0 || req.batch > n)) {
            errors.push_back(where + ".batch = " + std::to_string(req.batch) + " outside [1, n = " + std::to_string(n) + "]");
          }
          try {
            req.mode = diagnostics::parse_probe_mode(p.string("mode", false).value_or("exhaustive"));
          } catch (const std::exception& e) {
            errors.push_back(where + ".mode: " + e.what());
          }
          req.draws = static_cast<std::size_t>(p.unsigned_int("draws", false).value_or(0));
          if (req.mode == diagnostics::ProbeMode::montecarlo && req.draws < 2) {
            errors.push_back(where + ".draws must be at least 2 in montecarlo mode");
          }
          req.seed = p.unsigned_int("seed", false).value_or(0);
          if (plan.objective) {
            if (auto v = p.vector("x", true, d)) req.x = *v;
            if (req.kind == ProbeRequest::Kind::vr) {
              if (auto v = p.vector("z_snapshot", true, d)) req.z_snapshot = *v;
            }
          }
          plan.diagnostics.probes.push_back(std::move(req));
        }
    }
    if (r.has("budget")) {
      Reader b(diag.at("budget"), "diagnostics.budget", errors);
      b.reject_unknown({"epsilon", "beta", "rho", "c0", "c1", "c2"});
      BudgetRequest req;
      if (auto v = b.number("epsilon", true)) req.epsilon = *v;
      if (!(req.epsilon > 0.0)) errors.push_back("diagnostics.budget.epsilon must be positive");
      req.beta = b.number("beta", false);
      req.rho = b.number("rho", false).value_or(req.rho);
      req.c0 = b.number("c0", false).value_or(req.c0);
      req.c1 = b.number("c1", false).value_or(req.c1);
      req.c2 = b.number("c2", false).value_or(req.c2);
      plan.diagnostics.budget = req;
    }
  }

  plan.output_dir = top.string("output_dir", false).value_or("");
  if (!errors.empty()) throw PlanValidationError(std::move(errors));
  return plan;
}

json ExperimentPlan::to_json(bool include_output_dir) const {
  json samplers_doc = json::array();
  for (const auto& s : samplers) samplers_doc.push_back(sampler_to_json(s));
  json trackers_doc{{"moments", trackers.moments}};
  trackers_doc["trace"] = trackers.trace_stride ? json{{"stride", *trackers.trace_stride}} : json(nullptr);

  json diag = json::object();
  diag["gibbs"] = diagnostics.gibbs ? json{{"betas", diagnostics.gibbs->betas}, {"points", diagnostics.gibbs->points}}
                                    : json(nullptr);
  json probes = json::array();
  for (const auto& p : diagnostics.probes) probes.push_back(probe_to_json(p));
  diag["probes"] = probes;
  if (diagnostics.budget) {
    const auto& b = *diagnostics.budget;
    diag["budget"] = {{"epsilon", b.epsilon}, {"beta", optional_number(b.beta)}, {"rho", b.rho},
                      {"c0", b.c0},           {"c1", b.c1},                     {"c2", b.c2}};
  } else {
    diag["budget"] = nullptr;
  }

  json out{{"schema_version", schema_version},
           {"objective", objective ? objective_to_json(*objective) : json(nullptr)},
           {"samplers", samplers_doc},
           {"replications", {{"count", replications.count}, {"base_seed", replications.base_seed}}},
           {"trackers", trackers_doc},
           {"diagnostics", diag}};
  if (include_output_dir && !output_dir.empty()) out["output_dir"] = output_dir;
  return out;
}

std::string ExperimentPlan::fingerprint() const { return sha256_hex(to_json(false).dump()); }

fs::path resolve_output_dir(const ExperimentPlan& plan, const std::optional<std::string>& override_dir) {
  if (override_dir && !override_dir->empty()) return *override_dir;
  if (!plan.output_dir.empty()) return plan.output_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "langevin_out";
}

void aggregate(ConfigResult& result) {
  double sum = 0.0;
  std::size_t ok = 0;
  result.failures = 0;
  for (const auto& r : result.replicas) {
    if (r.gap) {
      sum += *r.gap;
      ++ok;
    } else {
      ++result.failures;
    }
  }
  result.mean_gap = ok ? sum / static_cast<double>(ok) : 0.0;
  double sq = 0.0;
  for (const auto& r : result.replicas) {
    if (r.gap) sq += (*r.gap - result.mean_gap) * (*r.gap - result.mean_gap);
  }
  result.std_gap = ok > 1 ? std::sqrt(sq / static_cast<double>(ok - 1)) : 0.0;
}

namespace {

std::optional<std::uint64_t> config_grad_evals(const ConfigResult& c) {
  for (const auto& r : c.replicas) {
    if (!r.error) return r.grad_evals;
  }
  return std::nullopt;
}

json diagnostics_gibbs(const FiniteSumObjective& obj, const std::optional<double>& f_star,
                       const GibbsRequest& req, const std::vector<SamplerSpec>& samplers,
                       const std::optional<fs::path>& out_dir) {
  std::vector<double> betas = req.betas;
  if (betas.empty()) {
    for (const auto& s : samplers) {
      if (std::find(betas.begin(), betas.end(), s.config.beta) == betas.end()) betas.push_back(s.config.beta);
    }
  }
  json entries = json::array();
  for (const double beta : betas) {
    json entry{{"beta", beta}};
    try {
      const auto table = diagnostics::gibbs_quadrature_auto(obj, beta, req.points);
      const double mean_f = diagnostics::gibbs_expectation(table, [&](const Vector& x) { return obj.value(x); });
      theory::TheoryParams p;
      p.M = obj.certificate().M;
      p.m = obj.certificate().m;
      p.b = obj.certificate().b;
      p.beta = beta;
      p.d = obj.d();
      entry["points"] = req.points;
      entry["box_lo"] = vector_to_json(table.grid.box.lo);
      entry["box_hi"] = vector_to_json(table.grid.box.hi);
      entry["Q"] = table.Q;
      entry["log_Q"] = table.log_Q;
      entry["boundary_ratio"] = table.boundary_ratio;
      entry["expected_F_n"] = mean_f;
      entry["expected_gap"] = f_star ? json(mean_f - *f_star) : json(nullptr);
      entry["R_M"] = theory::r_m(p);
      if (out_dir) {
        const std::string file = "gibbs_beta_" + number_tag(beta) + ".csv";
        std::ostringstream csv;
        table.as_density().write_csv(csv);
        write_file_atomic(*out_dir / file, csv.str());
        entry["density_csv"] = file;
      }
    } catch (const std::exception& e) {
      entry["error"] = e.what();
    }
    entries.push_back(entry);
  }
  return entries;
}

json diagnostics_probe(const FiniteSumObjective& obj, const ProbeRequest& p) {
  json out{{"request", probe_to_json(p)}};
  try {
    if (p.kind == ProbeRequest::Kind::minibatch) {
      out["report"] = diagnostics::to_json(
          diagnostics::minibatch_variance_probe(obj, p.x, p.batch, p.mode, p.draws, p.seed));
    } else {
      out["report"] = diagnostics::to_json(
          diagnostics::vr_variance_probe(obj, p.x, p.z_snapshot, p.batch, p.mode, p.draws, p.seed));
    }
  } catch (const std::exception& e) {
    out["error"] = e.what();
  }
  return out;
}

json diagnostics_budget(const FiniteSumObjective& obj, const BudgetRequest& req,
                        const std::vector<SamplerSpec>& samplers) {
  try {
    const double beta = req.beta.value_or(samplers.front().config.beta);
    theory::TheoryParams p = theory::TheoryParams::from_objective(obj, beta);
    p.rho = req.rho;
    p.c0 = req.c0;
    p.c1 = req.c1;
    p.c2 = req.c2;
    return theory::budget_report(p, obj.n(), req.epsilon);
  } catch (const std::exception& e) {
    return json{{"error", e.what()}};
  }
}

}  // namespace

RunRecord run_plan(const ExperimentPlan& plan, const RunOptions& options) {
  if (!plan.objective) throw std::invalid_argument("plan has no objective");
  std::optional<fs::path> out_dir;
  if (options.write_outputs) {
    out_dir = resolve_output_dir(plan, std::nullopt);
    fs::create_directories(*out_dir / "runs");
  }

  RunRecord record;
  record.fingerprint = plan.fingerprint();
  record.objective = objective_to_json(*plan.objective);

  // x* is needed for every gap; a cosine objective may not carry one yet.
  std::shared_ptr<const FiniteSumObjective> obj = plan.objective;
  if (!obj->minimizer()) {
    try {
      obj = std::make_shared<const FiniteSumObjective>(diagnostics::locate_minimizer(*obj));
    } catch (const std::exception& e) {
      record.errors.push_back(std::string("minimizer location failed: ") + e.what());
    }
  }
  if (obj->minimizer()) {
    record.x_star = *obj->minimizer();
    record.f_star = obj->value(*record.x_star);
  }

  for (const auto& spec : plan.samplers) {
    ConfigResult result;
    result.spec = spec;
    for (std::size_t r = 0; r < plan.replications.count; ++r) {
      ReplicaResult rep;
      rep.replica = r;
      rep.seed = plan.replications.seed(r);
      try {
        SamplerConfig config = spec.config;
        config.seed = rep.seed;
        std::optional<TraceRecorder> trace;
        std::optional<diagnostics::MomentTracker> moments;
        std::vector<Tracker*> trackers;
        if (plan.trackers.trace_stride) {
          trace.emplace(*plan.trackers.trace_stride);
          trackers.push_back(&*trace);
        }
        if (plan.trackers.moments) {
          std::optional<diagnostics::ExpMomentReference> ref;
          if (obj->certificate().G) {
            ref = diagnostics::ExpMomentReference{config.beta, config.eta, obj->certificate().b,
                                                  *obj->certificate().G, obj->d()};
          }
          moments.emplace(ref);
          trackers.push_back(&*moments);
        }
        const RunResult run_result = run(config, *obj, std::span<Tracker* const>(trackers));
        rep.final_value = obj->value(run_result.final_state.x);
        rep.grad_evals = run_result.grad_evals;
        rep.wall_seconds = run_result.wall_seconds;
        rep.trackers = run_result.tracker_summaries;
        if (record.f_star) {
          rep.gap = rep.final_value - *record.f_star;
        } else {
          rep.error = "no minimizer available for the gap";
        }
        if (trace && out_dir) {
          const std::string file = "runs/" + safe_name(spec.name) + "_r" + std::to_string(r) + ".csv";
          std::ostringstream csv;
          trace->write_csv(csv);
          write_file_atomic(*out_dir / file, csv.str());
          rep.trace_csv = file;
        }
      } catch (const std::exception& e) {
        rep.gap.reset();
        rep.error = e.what();
      }
      result.replicas.push_back(std::move(rep));
    }
    aggregate(result);
    record.configs.push_back(std::move(result));
  }

  const auto& diag = plan.diagnostics;
  if (diag.gibbs) {
    record.diagnostics["gibbs"] = diagnostics_gibbs(*obj, record.f_star, *diag.gibbs, plan.samplers, out_dir);
  }
  if (!diag.probes.empty()) {
    json probes = json::array();
    for (const auto& p : diag.probes) probes.push_back(diagnostics_probe(*obj, p));
    record.diagnostics["probes"] = probes;
  }
  if (diag.budget) record.diagnostics["budget"] = diagnostics_budget(*obj, *diag.budget, plan.samplers);

  if (out_dir) {
    write_file_atomic(*out_dir / "record.json", record.to_json().dump(2) + "\n");
    write_file_atomic(*out_dir / "timing.json", record.timing_json().dump(2) + "\n");
  }
  return record;
}

json RunRecord::to_json() const {
  json configs_doc = json::array();
  for (const auto& c : configs) {
    json reps = json::array();
    for (const auto& r : c.replicas) {
      json trackers = json::array();
      for (const auto& t : r.trackers) trackers.push_back(t);
      reps.push_back({{"replica", r.replica},
                      {"seed", r.seed},
                      {"gap", optional_number(r.gap)},
                      {"final_F_n", r.final_value},
                      {"grad_evals", r.grad_evals},
                      {"trackers", trackers},
                      {"trace_csv", r.trace_csv ? json(*r.trace_csv) : json(nullptr)},
                      {"error", r.error ? json(*r.error) : json(nullptr)}});
    }
    const std::size_t ok = c.replicas.size() - c.failures;
    const auto evals = config_grad_evals(c);
    configs_doc.push_back({{"name", c.spec.name},
                           {"config", sampler_to_json(c.spec)},
                           {"grad_evals", evals ? json(*evals) : json(nullptr)},
                           {"replicas", reps},
                           {"aggregate",
                            {{"mean_gap", ok ? json(c.mean_gap) : json(nullptr)},
                             {"std_gap", ok ? json(c.std_gap) : json(nullptr)},
                             {"successes", ok},
                             {"failures", c.failures}}}});
  }
  return {{"schema_version", kSchemaVersion},
          {"fingerprint", fingerprint},
          {"objective", objective},
          {"x_star", x_star ? vector_to_json(*x_star) : json(nullptr)},
          {"f_star", optional_number(f_star)},
          {"errors", errors},
          {"configs", configs_doc},
          {"diagnostics", diagnostics}};
}

json RunRecord::timing_json() const {
  json out = json::array();
  for (const auto& c : configs) {
    json reps = json::array();
    for (const auto& r : c.replicas) reps.push_back({{"replica", r.replica}, {"wall_seconds", r.wall_seconds}});
    out.push_back({{"name", c.spec.name}, {"replicas", reps}});
  }
  return {{"fingerprint", fingerprint}, {"configs", out}};
}

std::vector<ComparisonRow> compare_algorithms(const RunRecord& record) {
  std::vector<ComparisonRow> rows;
  for (const auto& c : record.configs) {
    ComparisonRow row;
    row.name = c.spec.name;
    row.algorithm = c.spec.config.algorithm;
    row.batch = c.spec.config.batch;
    row.epoch_len = c.spec.config.epoch_len;
    row.steps = c.spec.config.steps;
    row.grad_evals = config_grad_evals(c).value_or(0);
    row.replicas = c.replicas.size();
    row.failures = c.failures;
    if (row.failures < row.replicas) {
      row.mean_gap = c.mean_gap;
      row.std_gap = c.std_gap;
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<ComparisonRow> compare_algorithms(const ExperimentPlan& plan) {
  if (plan.samplers.size() < 2) throw std::invalid_argument("comparison needs at least two sampler configs");
  return compare_algorithms(run_plan(plan, RunOptions{false}));
}

std::vector<ComparisonRow> compare_records(const std::vector<json>& records) {
  if (records.empty()) throw std::invalid_argument("no records to compare");
  std::vector<ComparisonRow> rows;
  const json& objective = records.front().at("objective");
  for (std::size_t k = 0; k < records.size(); ++k) {
    const json& rec = records[k];
    if (rec.at("objective") != objective) {
      throw std::invalid_argument("record " + std::to_string(k) + " was produced on a different objective");
    }
    for (const auto& c : rec.at("configs")) {
      ComparisonRow row;
      const json& cfg = c.at("config");
      row.name = c.at("name").get<std::string>();
      row.algorithm = parse_algorithm(cfg.at("algorithm").get<std::string>());
      row.batch = cfg.value("batch", std::size_t{0});
      row.epoch_len = cfg.value("epoch_len", std::size_t{0});
      row.steps = cfg.at("steps").get<std::uint64_t>();
      row.grad_evals = c.at("grad_evals").is_null() ? 0 : c.at("grad_evals").get<std::uint64_t>();
      const json& agg = c.at("aggregate");
      row.failures = agg.at("failures").get<std::size_t>();
      row.replicas = row.failures + agg.at("successes").get<std::size_t>();
      if (!agg.at("mean_gap").is_null()) {
        row.mean_gap = agg.at("mean_gap").get<double>();
        row.std_gap = agg.at("std_gap").get<double>();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

json to_json(const std::vector<ComparisonRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"name", r.name},
                   {"algorithm", to_string(r.algorithm)},
                   {"B", r.algorithm == Algorithm::gld ? json(nullptr) : json(r.batch)},
                   {"L", r.algorithm == Algorithm::vrsgld ? json(r.epoch_len) : json(nullptr)},
                   {"K", r.steps},
                   {"grad_evals", r.grad_evals},
                   {"mean_gap", optional_number(r.mean_gap)},
                   {"std_gap", r.mean_gap ? json(r.std_gap) : json(nullptr)},
                   {"replicas", r.replicas},
                   {"failures", r.failures}});
  }
  return out;
}

}  // namespace langevin::harness
