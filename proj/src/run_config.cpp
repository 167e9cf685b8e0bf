#include "lfm/run_config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lfm/log.hpp"
#include "lfm/version.hpp"

namespace lfm {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

void check_keys(const json& j, const std::set<std::string>& known,
                const std::string& where) {
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      fail("unknown key '" + item.key() + "'" +
           (where.empty() ? "" : " in " + where));
}

double number_or_inf(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  fail("expected number or \"inf\"/\"-inf\" in " + where);
}

Eigen::VectorXd parse_vector(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where + " must be an array");
  Eigen::VectorXd out(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    out(static_cast<int>(i)) = number_or_inf(v[i], where);
  return out;
}

Eigen::MatrixXd parse_matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty() || !v[0].is_array())
    fail(where + " must be an array of arrays");
  const size_t rows = v.size(), cols = v[0].size();
  Eigen::MatrixXd out(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!v[r].is_array() || v[r].size() != cols)
      fail(where + " rows must have equal length");
    for (size_t c = 0; c < cols; ++c)
      out(static_cast<int>(r), static_cast<int>(c)) =
          v[r][c].get<double>();
  }
  return out;
}

WeightSpec parse_weight(const json& v, const std::string& where) {
  WeightSpec spec;
  if (v.is_number()) {
    spec.kind = WeightSpec::kScalar;
    spec.scalar = v.get<double>();
  } else if (v.is_array() && !v.empty() && v[0].is_array()) {
    spec.kind = WeightSpec::kFull;
    spec.full = parse_matrix(v, where);
  } else if (v.is_array()) {
    spec.kind = WeightSpec::kDiag;
    spec.diag = parse_vector(v, where);
  } else {
    fail(where + " must be a number, array, or matrix");
  }
  return spec;
}

GpPrior parse_prior(const json& v) {
  check_keys(v, {"matern_order", "length_scale", "signal_variance"}, "prior");
  GpPrior prior;
  if (v.contains("matern_order")) prior.matern_order = v["matern_order"].get<int>();
  if (v.contains("length_scale")) prior.length_scale = v["length_scale"].get<double>();
  if (v.contains("signal_variance"))
    prior.signal_variance = v["signal_variance"].get<double>();
  prior.validate();
  return prior;
}

LatentProfile parse_profile(const json& v) {
  check_keys(v, {"amplitude", "center", "width"}, "profile");
  LatentProfile p;
  for (double a : v.at("amplitude")) p.amplitude.push_back(a);
  for (double c : v.at("center")) p.center.push_back(c);
  for (double w : v.at("width")) p.width.push_back(w);
  if (p.amplitude.size() != p.center.size() ||
      p.amplitude.size() != p.width.size())
    fail("profile arrays must have equal length");
  return p;
}

void parse_constraints(const json& v, ConstraintSet& c) {
  check_keys(v,
             {"state_lo", "state_hi", "w_lo", "w_hi", "y_lo", "y_hi", "v_lo",
              "v_hi", "x0_lo", "x0_hi"},
             "constraints");
  auto get = [&](const char* key, Eigen::VectorXd& field) {
    if (v.contains(key)) field = parse_vector(v[key], key);
  };
  get("state_lo", c.state_lo);
  get("state_hi", c.state_hi);
  get("w_lo", c.w_lo);
  get("w_hi", c.w_hi);
  get("y_lo", c.y_lo);
  get("y_hi", c.y_hi);
  get("v_lo", c.v_lo);
  get("v_hi", c.v_hi);
  get("x0_lo", c.x0_lo);
  get("x0_hi", c.x0_hi);
}

void parse_tolerances(const json& v, SolveTolerances& t) {
  check_keys(v,
             {"eps_opt", "eps_feas", "max_inner", "max_outer", "rho0",
              "rho_growth", "lbfgs_memory", "armijo_c"},
             "tolerances");
  if (v.contains("eps_opt")) t.eps_opt = v["eps_opt"].get<double>();
  if (v.contains("eps_feas")) t.eps_feas = v["eps_feas"].get<double>();
  if (v.contains("max_inner")) t.max_inner = v["max_inner"].get<int>();
  if (v.contains("max_outer")) t.max_outer = v["max_outer"].get<int>();
  if (v.contains("rho0")) t.rho0 = v["rho0"].get<double>();
  if (v.contains("rho_growth")) t.rho_growth = v["rho_growth"].get<double>();
  if (v.contains("lbfgs_memory")) t.lbfgs_memory = v["lbfgs_memory"].get<int>();
  if (v.contains("armijo_c")) t.armijo_c = v["armijo_c"].get<double>();
}

TranscriptionParams transcription_params(const json* overrides) {
  TranscriptionParams p;
  if (!overrides) return p;
  const json& o = *overrides;
  check_keys(o,
             {"S", "D", "sigma_w", "sigma_v", "delta", "n_samples", "x0",
              "profile", "prior"},
             "scenario_overrides");
  if (o.contains("S")) p.S = o["S"].get<double>();
  if (o.contains("D")) p.D = o["D"].get<double>();
  if (o.contains("sigma_w")) p.sigma_w = o["sigma_w"].get<double>();
  if (o.contains("sigma_v")) p.sigma_v = o["sigma_v"].get<double>();
  if (o.contains("delta")) p.delta = o["delta"].get<double>();
  if (o.contains("n_samples")) p.n_samples = o["n_samples"].get<int>();
  if (o.contains("x0")) p.x0 = o["x0"].get<double>();
  if (o.contains("profile")) p.ell = parse_profile(o["profile"]);
  if (o.contains("prior")) p.prior = parse_prior(o["prior"]);
  return p;
}

BallisticParams ballistic_params(const json* overrides) {
  BallisticParams p;
  if (!overrides) return p;
  const json& o = *overrides;
  check_keys(o,
             {"alpha", "gamma", "g", "s_x", "s_y", "x0", "prior_mean", "delta",
              "T", "w_var", "v_var", "profile", "prior"},
             "scenario_overrides");
  if (o.contains("alpha")) p.alpha = o["alpha"].get<double>();
  if (o.contains("gamma")) p.gamma = o["gamma"].get<double>();
  if (o.contains("g")) p.g = o["g"].get<double>();
  if (o.contains("s_x")) p.s_x = o["s_x"].get<double>();
  if (o.contains("s_y")) p.s_y = o["s_y"].get<double>();
  if (o.contains("x0")) p.x0 = parse_vector(o["x0"], "x0");
  if (o.contains("prior_mean"))
    p.prior_mean = parse_vector(o["prior_mean"], "prior_mean");
  if (o.contains("delta")) p.delta = o["delta"].get<double>();
  if (o.contains("T")) p.T = o["T"].get<double>();
  if (o.contains("w_var")) p.w_var = parse_vector(o["w_var"], "w_var");
  if (o.contains("v_var")) p.v_var = o["v_var"].get<double>();
  if (o.contains("profile")) p.ell = parse_profile(o["profile"]);
  if (o.contains("prior")) p.prior = parse_prior(o["prior"]);
  return p;
}

} // namespace

Eigen::MatrixXd WeightSpec::materialize(int dim) const {
  switch (kind) {
    case kScalar:
      return scalar * Eigen::MatrixXd::Identity(dim, dim);
    case kDiag:
      if (diag.size() != dim) fail("diagonal weight has wrong length");
      return Eigen::MatrixXd(diag.asDiagonal());
    case kFull:
      if (full.rows() != dim || full.cols() != dim)
        fail("weight matrix has wrong shape");
      return full;
    case kNone:
      break;
  }
  fail("missing weight matrix");
}

uint64_t fnv1a_hash(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash_hex(const RunConfig& cfg) {
  std::ostringstream os;
  os << std::hex << fnv1a_hash(cfg.canonical);
  return os.str();
}

RunConfig parse_run_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str());
}

RunConfig parse_run_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  static const std::set<std::string> known = {
      "method",        "scenario",        "seed",
      "q",             "r",               "p",
      "delta",         "horizon",         "learn_samples",
      "substeps",      "central_differences", "tolerances",
      "constraints",   "hyperparameter_mode", "theta_initial",
      "theta_lo",      "theta_hi",        "theta_q_weight",
      "theta_p_weight", "prior",          "prior_mean",
      "A",             "B",               "G",
      "E",             "C",               "sigma_w_sq",
      "sigma_v_sq",    "kappa",           "lengthscale_bounds",
      "ml_grid_points", "gp_weight_mode", "scenario_overrides"};
  check_keys(j, known, "");

  RunConfig cfg;
  cfg.canonical = j.dump();
  if (j.contains("scenario")) cfg.scenario = j["scenario"].get<std::string>();
  if (j.contains("method")) cfg.method = j["method"].get<std::string>();
  if (cfg.method != "fie" && cfg.method != "dmhe" && cfg.method != "kfrts")
    fail("method must be fie, dmhe, or kfrts");
  if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();

  const json* overrides = nullptr;
  if (j.contains("scenario_overrides")) {
    overrides = &j["scenario_overrides"];
    cfg.overrides_json = overrides->dump();
  }

  // Scenario defaults first, explicit keys layered on top.
  if (cfg.scenario == "transcription") {
    const TranscriptionParams p = transcription_params(overrides);
    cfg.est = default_weights("transcription");
    cfg.est.delta = p.delta;
    cfg.prior = p.prior;
    cfg.hyperparameter_mode = "learn_then_freeze";
    cfg.sigma_w_sq = Eigen::VectorXd::Constant(1, p.sigma_w * p.sigma_w);
    cfg.sigma_v_sq = p.sigma_v * p.sigma_v;
  } else if (cfg.scenario == "ballistic") {
    const BallisticParams p = ballistic_params(overrides);
    cfg.est = default_weights("ballistic");
    cfg.est.delta = p.delta;
    cfg.prior = p.prior;
    cfg.hyperparameter_mode = "augmented";
    cfg.prior_mean = p.prior_mean;
    cfg.sigma_w_sq = p.w_var;
    cfg.sigma_v_sq = p.v_var;
  } else if (!cfg.scenario.empty()) {
    fail("unknown scenario: " + cfg.scenario);
  } else {
    cfg.hyperparameter_mode = "fixed";
  }

  if (j.contains("q")) cfg.q_spec = parse_weight(j["q"], "q");
  if (j.contains("r")) cfg.r_spec = parse_weight(j["r"], "r");
  if (j.contains("p")) cfg.p_spec = parse_weight(j["p"], "p");
  if (j.contains("delta")) cfg.est.delta = j["delta"].get<double>();
  if (j.contains("horizon")) cfg.est.horizon = j["horizon"].get<double>();
  if (j.contains("learn_samples"))
    cfg.est.learn_samples = j["learn_samples"].get<int>();
  if (j.contains("substeps")) cfg.est.substeps = j["substeps"].get<int>();
  if (j.contains("central_differences"))
    cfg.est.central_differences = j["central_differences"].get<bool>();
  if (j.contains("tolerances")) parse_tolerances(j["tolerances"], cfg.est.tol);
  if (j.contains("constraints")) {
    if (cfg.est.constraints.empty() && !cfg.scenario.empty())
      cfg.est.constraints = ConstraintSet();
    parse_constraints(j["constraints"], cfg.est.constraints);
  }
  if (j.contains("hyperparameter_mode")) {
    cfg.hyperparameter_mode = j["hyperparameter_mode"].get<std::string>();
    if (cfg.hyperparameter_mode != "fixed" &&
        cfg.hyperparameter_mode != "learn_then_freeze" &&
        cfg.hyperparameter_mode != "augmented")
      fail("hyperparameter_mode must be fixed, learn_then_freeze, or augmented");
  }
  if (j.contains("theta_initial"))
    cfg.est.theta_initial = j["theta_initial"].get<double>();
  if (j.contains("theta_lo")) cfg.est.theta_lo = j["theta_lo"].get<double>();
  if (j.contains("theta_hi")) cfg.est.theta_hi = j["theta_hi"].get<double>();
  if (j.contains("theta_q_weight"))
    cfg.est.theta_q_weight = j["theta_q_weight"].get<double>();
  if (j.contains("theta_p_weight"))
    cfg.est.theta_p_weight = j["theta_p_weight"].get<double>();
  if (j.contains("prior")) {
    cfg.prior = parse_prior(j["prior"]);
    cfg.prior_given = true;
  }
  if (j.contains("prior_mean"))
    cfg.prior_mean = parse_vector(j["prior_mean"], "prior_mean");

  if (j.contains("A")) {
    for (const char* key : {"A", "G", "E", "C"})
      if (!j.contains(key)) fail("external model needs A, G, E, C");
    cfg.A = parse_matrix(j["A"], "A");
    cfg.B = j.contains("B") ? parse_matrix(j["B"], "B")
                            : Eigen::MatrixXd(cfg.A.rows(), 0);
    cfg.G = parse_matrix(j["G"], "G");
    cfg.E = parse_matrix(j["E"], "E");
    cfg.C = parse_matrix(j["C"], "C");
    cfg.has_model = true;
  }
  if (j.contains("sigma_w_sq")) {
    if (j["sigma_w_sq"].is_number())
      cfg.sigma_w_sq =
          Eigen::VectorXd::Constant(1, j["sigma_w_sq"].get<double>());
    else
      cfg.sigma_w_sq = parse_vector(j["sigma_w_sq"], "sigma_w_sq");
  }
  if (j.contains("sigma_v_sq")) cfg.sigma_v_sq = j["sigma_v_sq"].get<double>();
  if (j.contains("kappa")) cfg.kappa = j["kappa"].get<double>();
  if (j.contains("lengthscale_bounds")) {
    const Eigen::VectorXd b =
        parse_vector(j["lengthscale_bounds"], "lengthscale_bounds");
    if (b.size() != 2 || !(b(0) > 0) || !(b(1) > b(0)))
      fail("lengthscale_bounds must be [lo, hi] with 0 < lo < hi");
    cfg.search.lo = b(0);
    cfg.search.hi = b(1);
  }
  if (j.contains("ml_grid_points"))
    cfg.search.grid_points = j["ml_grid_points"].get<int>();
  if (j.contains("gp_weight_mode")) {
    cfg.gp_weight_mode = j["gp_weight_mode"].get<std::string>();
    if (cfg.gp_weight_mode != "auto" && cfg.gp_weight_mode != "fixed")
      fail("gp_weight_mode must be auto or fixed");
  }
  if (cfg.scenario.empty() && !cfg.has_model)
    fail("either scenario or model matrices A, G, E, C are required");
  return cfg;
}

Dataset make_dataset(const RunConfig& cfg) {
  const json* overrides = nullptr;
  json parsed;
  if (!cfg.overrides_json.empty()) {
    parsed = json::parse(cfg.overrides_json);
    overrides = &parsed;
  }
  if (cfg.scenario == "transcription")
    return transcription_scenario(cfg.seed, transcription_params(overrides));
  if (cfg.scenario == "ballistic")
    return ballistic_scenario(cfg.seed, ballistic_params(overrides));
  throw std::invalid_argument("unknown scenario: " + cfg.scenario);
}

namespace {

std::vector<std::string> dataset_comments(const Dataset& data,
                                          const std::string& hash) {
  return {std::string("lfm ") + kVersion,
          "scenario: " + data.scenario,
          "seed: " + std::to_string(data.seed),
          "config_hash: " + hash,
          "rng: " + data.rng_id,
          "profile: " + data.profile};
}

} // namespace

CsvTable measurements_table(const Dataset& data, const std::string& hash) {
  CsvTable t;
  t.comments = dataset_comments(data, hash);
  const int p = static_cast<int>(data.y.front().size());
  t.columns.push_back("t");
  for (int j = 0; j < p; ++j) t.columns.push_back("y" + std::to_string(j + 1));
  t.data.assign(t.columns.size(), {});
  for (int k = 0; k < data.grid.nodes(); ++k) {
    t.data[0].push_back(data.grid.node(k));
    for (int j = 0; j < p; ++j) t.data[1 + j].push_back(data.y[k](j));
  }
  return t;
}

CsvTable truth_table(const Dataset& data, const std::string& hash) {
  CsvTable t;
  t.comments = dataset_comments(data, hash);
  const int n = static_cast<int>(data.x_true.front().size());
  t.columns.push_back("t");
  for (int j = 0; j < n; ++j) t.columns.push_back("x" + std::to_string(j + 1));
  t.columns.push_back("ell");
  t.data.assign(t.columns.size(), {});
  for (int k = 0; k < data.grid.nodes(); ++k) {
    t.data[0].push_back(data.grid.node(k));
    for (int j = 0; j < n; ++j) t.data[1 + j].push_back(data.x_true[k](j));
    t.data[1 + n].push_back(data.ell_true[k]);
  }
  return t;
}

MeasurementSeries measurements_from_table(const CsvTable& table) {
  MeasurementSeries s;
  s.t = table.col("t");
  if (s.t.size() < 2) throw std::runtime_error("need at least two samples");
  int p = 0;
  std::vector<const std::vector<double>*> ycols;
  for (;; ++p) {
    const std::string name = "y" + std::to_string(p + 1);
    bool found = false;
    for (size_t c = 0; c < table.columns.size(); ++c)
      if (table.columns[c] == name) {
        ycols.push_back(&table.data[c]);
        found = true;
        break;
      }
    if (!found) break;
  }
  if (p == 0) throw std::runtime_error("missing column 'y1'");

  s.delta = s.t[1] - s.t[0];
  for (size_t k = 1; k < s.t.size(); ++k)
    if (std::abs(s.t[k] - s.t[k - 1] - s.delta) >
        1e-9 * std::max(1.0, std::abs(s.t[k])))
      throw std::runtime_error("measurements are not equidistant");

  s.y.resize(s.t.size());
  for (size_t k = 0; k < s.t.size(); ++k) {
    s.y[k].resize(p);
    for (int j = 0; j < p; ++j) s.y[k](j) = (*ycols[j])[k];
  }
  return s;
}

CsvTable estimates_table(const EstimateResult& result,
                         const std::vector<double>& t,
                         const std::vector<std::string>& header_comments) {
  CsvTable out;
  out.comments = header_comments;
  const int n_a = static_cast<int>(result.x_hat.front().size());
  out.columns.push_back("t");
  for (int j = 0; j < n_a; ++j)
    out.columns.push_back("xhat" + std::to_string(j + 1));
  out.columns.push_back("ell_hat");
  out.data.assign(out.columns.size(), {});
  for (size_t k = 0; k < result.x_hat.size(); ++k) {
    out.data[0].push_back(t[k]);
    for (int j = 0; j < n_a; ++j)
      out.data[1 + j].push_back(result.x_hat[k](j));
    out.data[1 + n_a].push_back(result.latent_force[k]);
  }
  return out;
}

namespace {

Eigen::VectorXd resolve_prior_mean(const RunConfig& cfg, int n_phys, int n_a,
                                   bool hyper) {
  Eigen::VectorXd prior = Eigen::VectorXd::Zero(n_a);
  if (hyper) prior(n_a - 1) = cfg.est.theta_initial;
  if (cfg.prior_mean.size() == 0) return prior;
  if (cfg.prior_mean.size() == n_a) return cfg.prior_mean;
  if (hyper && cfg.prior_mean.size() == n_a - 1) {
    prior.head(n_a - 1) = cfg.prior_mean;
    return prior;
  }
  if (cfg.prior_mean.size() == n_phys) {
    prior.head(n_phys) = cfg.prior_mean;
    return prior;
  }
  fail("prior_mean dimension");
}

void extend_for_hyper(EstimationConfig& est, int n_w, int n_a) {
  if (est.Q.rows() == n_w) {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n_w + 1, n_w + 1);
    Q.topLeftCorner(n_w, n_w) = est.Q;
    Q(n_w, n_w) = est.theta_q_weight;
    est.Q = Q;
  }
  if (est.P.rows() == n_a) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n_a + 1, n_a + 1);
    P.topLeftCorner(n_a, n_a) = est.P;
    P(n_a, n_a) = est.theta_p_weight;
    est.P = P;
  }
  if (!est.constraints.empty() &&
      est.constraints.state_lo.size() == n_a) {
    auto extend = [](Eigen::VectorXd& v, double fill) {
      v.conservativeResize(v.size() + 1);
      v(v.size() - 1) = fill;
    };
    ConstraintSet& b = est.constraints;
    extend(b.state_lo, -kInf);
    extend(b.state_hi, kInf);
    extend(b.x0_lo, -kInf);
    extend(b.x0_hi, kInf);
    extend(b.w_lo, -kInf);
    extend(b.w_hi, kInf);
  }
}

double max_state_bound_violation(const ConstraintSet& bounds,
                                 const std::vector<Eigen::VectorXd>& xs) {
  if (bounds.empty()) return 0.0;
  double v = 0.0;
  for (const auto& x : xs)
    for (int i = 0; i < x.size() && i < bounds.state_lo.size(); ++i) {
      v = std::max(v, bounds.state_lo(i) - x(i));
      v = std::max(v, x(i) - bounds.state_hi(i));
    }
  return v;
}

} // namespace

PipelineResult run_estimation(const RunConfig& cfg,
                              const MeasurementSeries& series) {
  PipelineResult out;

  // Base model.
  const json* overrides = nullptr;
  json parsed;
  if (!cfg.overrides_json.empty()) {
    parsed = json::parse(cfg.overrides_json);
    overrides = &parsed;
  }
  ContinuousModel base;
  GpPrior prior = cfg.prior;
  if (cfg.scenario == "transcription") {
    const TranscriptionParams p = transcription_params(overrides);
    base = transcription_model(p);
    if (!cfg.prior_given) prior = p.prior;
  } else if (cfg.scenario == "ballistic") {
    const BallisticParams p = ballistic_params(overrides);
    base = ballistic_model(p);
    if (!cfg.prior_given) prior = p.prior;
  } else {
    base = linear_model(cfg.A, cfg.B, cfg.G, cfg.E, cfg.C);
  }
  out.n_physical = base.n;

  EstimationConfig est = cfg.est;
  if (est.delta > 0.0 &&
      std::abs(est.delta - series.delta) > 1e-9 * std::max(1.0, est.delta))
    throw std::invalid_argument(
        "measurement grid spacing differs from configured delta");
  est.delta = series.delta;

  if (cfg.method == "kfrts") {
    if (!base.linear)
      throw std::invalid_argument("kfrts requires a linear model");
    if (cfg.sigma_w_sq.size() != base.q || !(cfg.sigma_v_sq > 0.0))
      throw std::invalid_argument("kfrts needs sigma_w_sq and sigma_v_sq");

    const int na = base.n + matern_ssm(prior).dim();
    Eigen::VectorXd m0 = Eigen::VectorXd::Zero(na);
    if (cfg.prior_mean.size() == na)
      m0 = cfg.prior_mean;
    else if (cfg.prior_mean.size() == base.n)
      m0.head(base.n) = cfg.prior_mean;

    const auto model_for = [&](double ell) {
      GpPrior p2 = prior;
      p2.length_scale = ell;
      return lfm_discrete_model(base, p2, cfg.sigma_w_sq, cfg.sigma_v_sq,
                                est.delta, cfg.kappa, m0);
    };

    double ell = prior.length_scale;
    if (est.learn_samples >= 2 &&
        est.learn_samples <= static_cast<int>(series.y.size())) {
      const std::vector<Eigen::VectorXd> learn(
          series.y.begin(), series.y.begin() + est.learn_samples);
      ell = optimize_lengthscale_ml(model_for, learn, cfg.search);
      log::info("kfrts learned length scale %.6g", ell);
    }
    out.frozen_length_scale = ell;

    const DiscreteLinearModel dm = model_for(ell);
    const SmoothingResult sm = rts_smoother(dm, kalman_filter(dm, series.y));

    EstimateResult& res = out.estimate;
    res.t = series.t;
    res.x_hat = sm.smoothed_mean;
    res.latent_force.resize(res.x_hat.size());
    for (size_t k = 0; k < res.x_hat.size(); ++k)
      res.latent_force[k] = res.x_hat[k](base.n);
    res.all_converged = true;
    res.objective = sm.log_likelihood;
    out.metrics.max_constraint_violation =
        max_state_bound_violation(est.constraints, res.x_hat);
    return out;
  }

  // Optimal state estimation paths.
  AugmentedModel model = augment(base, prior);
  const std::string mode = cfg.hyperparameter_mode;

  auto materialize_weights = [&](const AugmentedModel& m) {
    if (cfg.q_spec.given()) est.Q = cfg.q_spec.materialize(m.n_w());
    if (cfg.r_spec.given()) est.R = cfg.r_spec.materialize(m.base.p);
    if (cfg.p_spec.given()) est.P = cfg.p_spec.materialize(m.n_a());
    if (est.Q.size() == 0 || est.R.size() == 0 || est.P.size() == 0)
      throw std::invalid_argument("config: q, r, p are required");
  };

  if (mode == "learn_then_freeze") {
    materialize_weights(model);
    const Eigen::VectorXd prior_mean =
        resolve_prior_mean(cfg, base.n, model.n_a(), false);
    const HyperLearnResult hl = learn_then_freeze_hyperparameter(
        model, series.y, PiecewiseSignal{}, est, prior_mean);
    out.frozen_length_scale = hl.frozen_length_scale;
    out.low_confidence = hl.low_confidence;
    log::info("frozen length scale %.6g%s", hl.frozen_length_scale,
              hl.low_confidence ? " (low confidence)" : "");
    model = hl.frozen_model;
    if (cfg.gp_weight_mode == "auto" && !cfg.q_spec.given()) {
      // GP driving-noise weight from the frozen prior: delta / q_gp.
      est.Q(model.n_w() - 1, model.n_w() - 1) = est.delta / model.gp.q;
    }
  } else if (mode == "augmented") {
    model = augment_hyperparameter(model);
    materialize_weights(model);
    extend_for_hyper(est, model.n_w() - 1, model.n_a() - 1);
  } else {
    materialize_weights(model);
  }

  const Eigen::VectorXd prior_mean =
      resolve_prior_mean(cfg, base.n, model.n_a(), model.hyper_augmented);

  EstimateResult res;
  if (cfg.method == "dmhe")
    res = estimate_dmhe(model, series.y, PiecewiseSignal{}, est, prior_mean);
  else
    res = estimate_fie(model, series.y, PiecewiseSignal{}, est, prior_mean);

  for (size_t k = 0; k < res.t.size(); ++k) res.t[k] = series.t[k];
  for (const SolveReport& r : res.window_reports) {
    out.metrics.max_constraint_violation =
        std::max(out.metrics.max_constraint_violation, r.max_violation);
    out.metrics.solver_iterations += r.inner_iterations;
  }
  out.estimate = std::move(res);
  return out;
}

} // namespace lfm
