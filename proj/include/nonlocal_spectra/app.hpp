#pragma once

// Command dispatch for the nlspec tool: config -> problem -> module call -> CSV/SVG + manifest.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nonlocal_spectra/config.hpp"
#include "nonlocal_spectra/expression.hpp"
#include "nonlocal_spectra/io.hpp"
#include "nonlocal_spectra/kernel_analysis.hpp"
#include "nonlocal_spectra/max_principle.hpp"
#include "nonlocal_spectra/semilinear.hpp"
#include "nonlocal_spectra/stochastic.hpp"
#include "nonlocal_spectra/sweep.hpp"

#ifndef NONLOCAL_SPECTRA_VERSION
#define NONLOCAL_SPECTRA_VERSION "0.0.0"
#endif

namespace nls::app {

namespace fs = std::filesystem;

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"eig", "sweep", "exterior", "mp",     "semilinear",
                                                 "harnack", "classify", "oracle", "compare"};
  return names;
}

struct RunOptions {
  /// Config file; ignored when `config_text` is set.
  fs::path config_path;
  std::optional<std::string> config_text;
  std::vector<std::string> overrides;
  std::optional<fs::path> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<bool> plot;
};

struct RunResult {
  int exit_code = 0;
  std::string message;
  fs::path out_dir;
  std::vector<std::string> artifacts;
};

/// 64-bit FNV-1a; stable across platforms, used for config and artifact fingerprints.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Thread count: explicit value, else NONLOCAL_SPECTRA_THREADS, else 1.
inline unsigned resolve_threads(std::optional<unsigned> requested) {
  if (requested) return std::max(1u, *requested);
  if (const char* env = std::getenv("NONLOCAL_SPECTRA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    fail(ErrorCode::ConfigParse, std::string("NONLOCAL_SPECTRA_THREADS='") + env + "' is not a positive integer");
  }
  return 1;
}

/// Config text plus overrides, with --seed/--out/--plot folded in as overrides.
inline Config load_config(const RunOptions& opt) {
  Config cfg = Config::parse(opt.config_text ? *opt.config_text : io::read_file(opt.config_path));
  for (const auto& o : opt.overrides) cfg.set(o);
  if (opt.seed) cfg.set("seed=" + std::to_string(*opt.seed));
  if (opt.out_dir) cfg.set("output.dir=\"" + opt.out_dir->generic_string() + "\"");
  if (opt.plot) cfg.set(std::string("output.plot=") + (*opt.plot ? "true" : "false"));
  return cfg;
}

// ---------------------------------------------------------------------------
// Problem construction

namespace detail {

inline const std::set<std::string> kPosition = {"x", "x1", "x2", "r"};
inline const std::set<std::string> kOffset = {"z", "z1", "z2", "rz"};
inline const std::set<std::string> kJoint = {"x", "x1", "x2", "r", "z", "z1", "z2", "rz"};
inline const std::set<std::string> kNonlinear = {"x", "x1", "x2", "r", "u"};

inline Expression expr(const Config& cfg, const std::string& key, const std::set<std::string>& vars) {
  return Expression::parse(cfg.expression_text(key), vars, cfg.location(key).str() + " ('" + key + "')");
}

inline Expression expr(const Config& cfg, const std::string& key, const std::set<std::string>& vars,
                       const std::string& fallback) {
  if (!cfg.has(key)) return Expression::parse(fallback, vars, key);
  return expr(cfg, key, vars);
}

inline std::function<double(const Point&)> field(Expression e, int dim) {
  return [e = std::move(e), dim](const Point& x) {
    ExprEnv env;
    env.x = x;
    env.dim = dim;
    return e(env);
  };
}

inline Point point_of(const std::vector<double>& v, int dim, const std::string& key) {
  if (static_cast<int>(v.size()) != dim)
    fail(ErrorCode::ConfigParse, "'" + key + "' needs " + std::to_string(dim) + " component(s)");
  return dim == 1 ? Point(v[0], 0.0) : Point(v[0], v[1]);
}

inline int problem_dim(const Config& cfg) {
  if (cfg.has_section("domain") && cfg.has("domain.shape")) {
    const std::string shape = cfg.string("domain.shape");
    if (shape == "interval") return 1;
    if (shape == "box") return static_cast<int>(cfg.numbers("domain.lo").size());
  }
  // Commands that sweep their own domains still read the dimension from [domain].
  const long d = cfg.integer("domain.dim", 1);
  if (d != 1 && d != 2) fail(ErrorCode::ConfigParse, cfg.location("domain.dim").str() + ": dim must be 1 or 2");
  return static_cast<int>(d);
}

inline Domain build_domain(const Config& cfg, int dim) {
  const std::string shape = cfg.string("domain.shape");
  if (shape == "interval") return Domain::interval(cfg.number("domain.left"), cfg.number("domain.right"));
  if (shape == "ball") {
    const Point c = cfg.has("domain.center") ? point_of(cfg.numbers("domain.center"), dim, "domain.center")
                                             : Point::Zero();
    return Domain::ball(dim, cfg.number("domain.radius"), c);
  }
  if (shape == "box")
    return Domain::box(point_of(cfg.numbers("domain.lo"), dim, "domain.lo"),
                       point_of(cfg.numbers("domain.hi"), dim, "domain.hi"));
  if (shape == "annulus") {
    const Point c = cfg.has("domain.center") ? point_of(cfg.numbers("domain.center"), dim, "domain.center")
                                             : Point::Zero();
    return Domain::annulus(dim, cfg.number("domain.inner"), cfg.number("domain.outer"), c);
  }
  fail(ErrorCode::ConfigParse, cfg.location("domain.shape").str() + ": unknown domain shape '" + shape +
                                   "' (interval, ball, box, annulus)");
}

inline Coefficients build_coefficients(const Config& cfg, int dim) {
  Coefficients co;
  if (dim == 1) {
    auto a = field(expr(cfg, "coefficients.a", kPosition, "1"), 1);
    auto b = field(expr(cfg, "coefficients.b", kPosition, "0"), 1);
    co.a = [a](const Point& x) {
      Matrix2 m = Matrix2::Zero();
      m(0, 0) = a(x);
      return m;
    };
    co.b = [b](const Point& x) { return Vector2(b(x), 0.0); };
  } else {
    const bool iso = cfg.has("coefficients.a");
    auto a11 = field(expr(cfg, iso ? "coefficients.a" : "coefficients.a11", kPosition, "1"), 2);
    auto a22 = iso ? a11 : field(expr(cfg, "coefficients.a22", kPosition, "1"), 2);
    auto a12 = field(expr(cfg, "coefficients.a12", kPosition, "0"), 2);
    auto b1 = field(expr(cfg, "coefficients.b1", kPosition, "0"), 2);
    auto b2 = field(expr(cfg, "coefficients.b2", kPosition, "0"), 2);
    co.a = [a11, a12, a22](const Point& x) {
      Matrix2 m;
      m << a11(x), a12(x), a12(x), a22(x);
      return m;
    };
    co.b = [b1, b2](const Point& x) { return Vector2(b1(x), b2(x)); };
  }
  co.c = field(expr(cfg, "coefficients.c", kPosition, "0"), dim);
  if (cfg.has("coefficients.kappa")) co.kappa = cfg.number("coefficients.kappa");
  return co;
}

inline JumpKernel build_kernel(const Config& cfg, int dim) {
  const std::string variant = cfg.string("kernel.variant");
  if (variant == "none") return JumpKernel::none();
  if (variant == "atomic") {
    const ConfigValue& offs = cfg.at("kernel.offsets");
    const std::vector<double> w = cfg.numbers("kernel.weights");
    if (offs.kind != ConfigValue::Kind::Array || offs.items.size() != w.size())
      fail(ErrorCode::ConfigParse, offs.loc.str() + ": kernel.offsets must be an array with one entry per weight");
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const ConfigValue& it = offs.items[i];
      std::vector<double> z;
      if (it.kind == ConfigValue::Kind::Number) z = {it.number};
      else
        for (const ConfigValue& c : it.items) {
          if (c.kind != ConfigValue::Kind::Number) fail(ErrorCode::ConfigParse, c.loc.str() + ": offset must be numeric");
          z.push_back(c.number);
        }
      atoms.push_back({point_of(z, dim, "kernel.offsets"), w[i]});
    }
    return JumpKernel::atomic(std::move(atoms));
  }
  if (variant == "density") {
    Expression g = expr(cfg, "kernel.g", kJoint);
    auto radius = field(expr(cfg, "kernel.radius", kPosition), dim);
    return JumpKernel::density(
        [g, dim](const Point& x, const Point& z) {
          ExprEnv env;
          env.x = x;
          env.z = z;
          env.dim = dim;
          return g(env);
        },
        radius);
  }
  if (variant == "translation_invariant") {
    Expression g = expr(cfg, "kernel.g", kOffset);
    return JumpKernel::translation_invariant(
        [g, dim](const Point& z) {
          ExprEnv env;
          env.z = z;
          env.dim = dim;
          return g(env);
        },
        cfg.number("kernel.radius"));
  }
  fail(ErrorCode::ConfigParse, cfg.location("kernel.variant").str() + ": unknown kernel variant '" + variant +
                                   "' (none, atomic, density, translation_invariant)");
}

inline Problem build_problem(const Config& cfg) {
  const int dim = problem_dim(cfg);
  Problem p = Problem::make(dim, build_coefficients(cfg, dim), build_kernel(cfg, dim), cfg.number("grid.h"));
  const std::string op = cfg.string("grid.operator", "full");
  if (op == "full") p.variant = OperatorVariant::FullI;
  else if (op == "local") p.variant = OperatorVariant::LocalA;
  else fail(ErrorCode::ConfigParse, cfg.location("grid.operator").str() + ": grid.operator must be full or local");
  p.eig.tol = cfg.number("command.tol", p.eig.tol);
  p.eig.max_iter = static_cast<int>(cfg.integer("command.max_iter", p.eig.max_iter));
  return p;
}

// ---------------------------------------------------------------------------
// Artifacts

class Artifacts {
 public:
  Artifacts(fs::path dir, bool plot) : dir_(std::move(dir)), plot_(plot) {}

  const fs::path& dir() const { return dir_; }
  bool plot() const { return plot_; }
  const std::vector<std::string>& files() const { return files_; }

  void csv(const std::string& name, const io::CsvTable& t) {
    t.write(dir_ / name);
    files_.push_back(name);
  }

  void svg(const std::string& csv_name, io::PlotKind kind) {
    if (!plot_) return;
    const std::string name = fs::path(csv_name).replace_extension(".svg").string();
    io::plot(dir_ / csv_name, kind, dir_ / name);
    files_.push_back(name);
  }

 private:
  fs::path dir_;
  bool plot_;
  std::vector<std::string> files_;
};

/// Two-column key/value table for heterogeneous summaries.
class Summary {
 public:
  Summary& add(const std::string& k, double v) { return add(k, io::format_double(v)); }
  Summary& add(const std::string& k, const std::string& v) {
    table_.add_row(std::vector<std::string>{k, v});
    return *this;
  }
  Summary& flag(const std::string& k, bool v) { return add(k, std::string(v ? "true" : "false")); }
  const io::CsvTable& table() const { return table_; }

 private:
  io::CsvTable table_{{"quantity", "value"}};
};

inline io::CsvTable node_table(const SpatialGrid& g, const std::vector<std::pair<std::string, const Vector*>>& cols) {
  std::vector<std::string> header = g.dim() == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x1", "x2"};
  for (const auto& c : cols) header.push_back(c.first);
  io::CsvTable t(header);
  for (std::size_t p = 0; p < g.num_interior(); ++p) {
    const Point& x = g.interior_point(p);
    std::vector<double> row{x[0]};
    if (g.dim() == 2) row.push_back(x[1]);
    for (const auto& c : cols) row.push_back((*c.second)[static_cast<Eigen::Index>(p)]);
    t.add_row(row);
  }
  return t;
}

inline Vector sample(const SpatialGrid& g, const std::function<double(const Point&)>& f) {
  Vector v(static_cast<Eigen::Index>(g.num_interior()));
  for (std::size_t p = 0; p < g.num_interior(); ++p) v[static_cast<Eigen::Index>(p)] = f(g.interior_point(p));
  return v;
}

inline io::CsvTable sweep_table(const SweepResult& s) {
  io::CsvTable t({"radius", "lambda", "residual", "lower", "upper", "unknowns"});
  for (const auto& e : s.entries)
    t.add_row(std::vector<double>{e.radius, e.lambda, e.residual, e.lower, e.upper, static_cast<double>(e.unknowns)});
  return t;
}

inline FeasibilityEngine engine_of(const Config& cfg) {
  const std::string e = cfg.string("command.engine", "auto");
  if (e == "auto") return FeasibilityEngine::Auto;
  if (e == "complementarity") return FeasibilityEngine::Complementarity;
  if (e == "simplex") return FeasibilityEngine::Simplex;
  fail(ErrorCode::ConfigParse, cfg.location("command.engine").str() + ": engine must be auto, complementarity or simplex");
}

struct Context {
  const Config& cfg;
  Problem problem;
  std::uint64_t seed;
  unsigned threads;
  Artifacts& out;
};

// ---------------------------------------------------------------------------
// Commands

inline void cmd_eig(Context& cx) {
  const Domain D = build_domain(cx.cfg, cx.problem.dim);
  const DiscreteOperator op = cx.problem.on(D, cx.cfg.number("grid.halo", 0.0));
  const EigenResult e = principal_eig(op, cx.problem.eig);
  Summary s;
  s.add("lambda", e.lambda).add("residual", e.residual).add("lower", e.lower).add("upper", e.upper);
  s.add("iterations", static_cast<double>(e.iterations)).add("unknowns", static_cast<double>(op.size()));
  s.add("components", static_cast<double>(e.components)).flag("monotone_scheme", op.is_monotone_scheme);
  if (cx.cfg.boolean("command.simplicity", false)) {
    const SimplicityReport r = check_simplicity(op, e);
    s.add("geometric_multiplicity", static_cast<double>(r.geometric_multiplicity)).add("spectral_gap", r.spectral_gap);
  }
  cx.out.csv("summary.csv", s.table());
  cx.out.csv("eigenfunction.csv", node_table(*op.grid, {{"psi", &e.psi}}));
  cx.out.svg("eigenfunction.csv", io::PlotKind::Profile);
}

inline SweepOptions sweep_options(const Config& cfg) {
  SweepOptions o;
  o.cauchy_tol = cfg.number("command.cauchy_tol", o.cauchy_tol);
  o.strict = cfg.boolean("command.strict", false);
  return o;
}

inline void write_sweep(Context& cx, const SweepResult& s, const std::string& name) {
  cx.out.csv(name + ".csv", sweep_table(s));
  Summary sum;
  sum.add("limit", s.limit.value).flag("converged", s.limit.converged).flag("non_monotone", s.limit.non_monotone);
  sum.add("violations", static_cast<double>(s.violations.size()));
  if (cx.cfg.has("command.window")) {
    const StabilityReport st = eigenfunction_stability(s, cx.cfg.number("command.window"));
    for (std::size_t i = 0; i < st.deviations.size(); ++i)
      sum.add("deviation_" + std::to_string(i + 1), st.deviations[i]);
    sum.flag("blow_up", st.blow_up);
  }
  cx.out.csv("summary.csv", sum.table());
  cx.out.svg(name + ".csv", io::PlotKind::Line);
}

inline void cmd_sweep(Context& cx) {
  write_sweep(cx, sweep(cx.problem, cx.cfg.numbers("command.radii"), sweep_options(cx.cfg)), "sweep");
}

inline void cmd_exterior(Context& cx) {
  write_sweep(cx,
              exterior_sweep(cx.problem, cx.cfg.number("command.inner"), cx.cfg.numbers("command.radii"),
                             sweep_options(cx.cfg)),
              "exterior");
}

inline void cmd_mp(Context& cx) {
  const Domain D = build_domain(cx.cfg, cx.problem.dim);
  const DiscreteOperator op = cx.problem.on(D, cx.cfg.number("grid.halo", 0.0));
  BisectionOptions bo;
  bo.phi_max = cx.cfg.number("command.phi_max", bo.phi_max);
  bo.bisect_tol = cx.cfg.number("command.bisect_tol", bo.bisect_tol);
  bo.engine = engine_of(cx.cfg);
  const EigenResult e = principal_eig(op, cx.problem.eig);
  const BisectionResult lp = lambda_prime(op, bo);
  const BisectionResult lpp = lambda_double_prime(op, bo);
  Summary s;
  s.add("lambda_dirichlet", e.lambda).add("residual", e.residual);
  s.add("lambda_prime", lp.lambda).add("lambda_double_prime", lpp.lambda).add("neg_max_c", 0.0 - op.max_c() + 0.0);
  s.add("phi_max", bo.phi_max).add("bisect_tol", bo.bisect_tol);
  for (const auto& [phi, val] : lpp.sensitivity) s.add("lambda_double_prime@phi_max=" + io::format_double(phi), val);
  if (cx.cfg.has("command.f")) {
    const Vector f = sample(*op.grid, field(expr(cx.cfg, "command.f", kPosition), cx.problem.dim));
    const MpCheck mc = refined_mp_check(op, f);
    s.add("mp_verdict", std::string(mc.verdict == MpVerdict::Pass ? "PASS" : "FAIL"));
    s.add("witness_min", mc.witness.minCoeff()).add("witness_max", mc.witness.maxCoeff());
    cx.out.csv("witness.csv", node_table(*op.grid, {{"u", &mc.witness}}));
  }
  cx.out.csv("summary.csv", s.table());
}

inline void cmd_semilinear(Context& cx) {
  const Domain D = build_domain(cx.cfg, cx.problem.dim);
  const DiscreteOperator op = cx.problem.on(D, cx.cfg.number("grid.halo", 0.0));
  const int dim = cx.problem.dim;
  auto nonlinear = [dim](Expression e) -> Nonlinearity {
    return [e = std::move(e), dim](const Point& x, double u) {
      ExprEnv env;
      env.x = x;
      env.u = u;
      env.dim = dim;
      return e(env);
    };
  };
  const Nonlinearity f = nonlinear(expr(cx.cfg, "command.f", kNonlinear));
  const Vector sub = sample(*op.grid, field(expr(cx.cfg, "command.sub", kPosition, "0"), dim));
  const Vector super = sample(*op.grid, field(expr(cx.cfg, "command.super", kPosition), dim));
  MonotoneOptions mo;
  if (cx.cfg.has("command.theta")) mo.theta = cx.cfg.number("command.theta");
  mo.tol = cx.cfg.number("command.tol", 1e-8);
  mo.max_iter = static_cast<int>(cx.cfg.integer("command.max_iter", mo.max_iter));
  mo.keep_iterates = false;
  const MonotoneSolution sol = monotone_iterate(op, f, sub, super, mo);
  Summary s;
  s.add("iterations", static_cast<double>(sol.trace.residuals.size() - 1)).add("theta", sol.trace.theta);
  s.add("final_residual", sol.trace.residuals.back()).add("reason", sol.trace.reason);
  std::vector<std::pair<std::string, const Vector*>> cols{{"u", &sol.u}};
  Vector newton;
  if (cx.cfg.has("command.dfdu")) {
    newton = newton_solve(op, f, nonlinear(expr(cx.cfg, "command.dfdu", kNonlinear)), sol.u);
    s.add("newton_difference", (newton - sol.u).lpNorm<Eigen::Infinity>());
    cols.emplace_back("newton", &newton);
  }
  io::CsvTable iters({"iteration", "residual"});
  for (std::size_t i = 0; i < sol.trace.residuals.size(); ++i)
    iters.add_row(std::vector<double>{static_cast<double>(i), sol.trace.residuals[i]});
  cx.out.csv("summary.csv", s.table());
  cx.out.csv("solution.csv", node_table(*op.grid, cols));
  cx.out.csv("iterations.csv", iters);
  cx.out.svg("iterations.csv", io::PlotKind::Line);
}

inline void cmd_harnack(Context& cx) {
  HarnackOptions ho;
  ho.samples = static_cast<int>(cx.cfg.integer("command.samples", ho.samples));
  ho.seed = cx.seed;
  ho.hs = cx.cfg.numbers("command.hs", ho.hs);
  ho.stable_drift = cx.cfg.number("command.stable_drift", ho.stable_drift);
  ho.fail_growth = cx.cfg.number("command.fail_growth", ho.fail_growth);
  ho.worst_case = cx.cfg.boolean("command.worst_case", ho.worst_case);
  const HarnackReport r = harnack_ratio(cx.problem, cx.cfg.number("command.R"), ho);
  io::CsvTable t({"h", "max_ratio", "worst_ratio"});
  for (const auto& l : r.levels) t.add_row(std::vector<double>{l.h, l.max_ratio, l.worst_ratio});
  Summary s;
  s.add("R", r.R).add("gamma_breve", r.gamma_breve).add("ambient_radius", r.ambient_radius);
  s.add("drift", r.drift).add("growth", r.growth).add("worst_growth", r.worst_growth);
  s.add("verdict", std::string(r.verdict == HarnackVerdict::Stable ? "STABLE"
                               : r.verdict == HarnackVerdict::Fail ? "FAIL"
                                                                   : "INCONCLUSIVE"));
  cx.out.csv("harnack.csv", t);
  cx.out.csv("summary.csv", s.table());
}

inline void cmd_classify(Context& cx) {
  ClassifyOptions co;
  co.radii = cx.cfg.numbers("command.radii", co.radii);
  co.alpha = cx.cfg.number("command.alpha", co.alpha);
  co.h = cx.cfg.number("command.h", co.h);
  co.decay_radii = cx.cfg.numbers("command.decay_radii", co.decay_radii);
  if (cx.cfg.has("domain.shape")) co.inward_domains.push_back(build_domain(cx.cfg, cx.problem.dim));
  const KernelClassReport r = kernel_classify(cx.problem.kernel, cx.problem.dim, co);
  io::CsvTable t({"R", "gamma", "eh1a", "M1", "M2", "argmin_x1", "argmin_x2", "h1"});
  for (const auto& row : r.rows)
    t.add_row(std::vector<double>{row.R, row.gamma, row.eh1a ? 1.0 : 0.0, row.M1, row.M2, row.argmin[0],
                                  row.argmin[1], row.h1 ? 1.0 : 0.0});
  io::CsvTable d({"rho", "value"});
  for (const auto& row : r.decay) d.add_row(std::vector<double>{row.rho, row.value});
  Summary s;
  s.flag("h1", r.h1).flag("h2", r.h2).add("alpha", r.alpha);
  for (const auto& in : r.inwards)
    s.flag("points_inwards " + in.domain, in.holds).add("inward_violations " + in.domain,
                                                        static_cast<double>(in.violations));
  cx.out.csv("classify.csv", t);
  cx.out.csv("decay.csv", d);
  cx.out.csv("summary.csv", s.table());
}

inline FkEstimate run_oracle(Context& cx, const Domain& D) {
  const int dim = cx.problem.dim;
  const Point x0 = cx.cfg.has("command.x_start") ? point_of(cx.cfg.numbers("command.x_start"), dim, "command.x_start")
                                                 : D.center();
  SimulationOptions so;
  so.threads = cx.threads;
  so.kernel_h = cx.cfg.number("command.kernel_h", so.kernel_h);
  if (cx.cfg.has("command.thinning_bound")) so.thinning_bound = cx.cfg.number("command.thinning_bound");
  const long n = cx.cfg.integer("command.N");
  if (n < 1) fail(ErrorCode::InvalidParameter, "command.N must be >= 1");
  const PathEnsemble ens =
      simulate_paths(cx.problem, D, x0, cx.cfg.number("command.T"), cx.cfg.number("command.dt"),
                     static_cast<std::size_t>(n), cx.seed, so);
  return fk_estimate(ens, static_cast<int>(cx.cfg.integer("command.bootstrap", 200)));
}

inline void cmd_oracle(Context& cx) {
  const Domain D = build_domain(cx.cfg, cx.problem.dim);
  const FkEstimate e = run_oracle(cx, D);
  Summary s;
  s.add("lambda_mc", e.lambda).add("stderr", e.stderr_).add("lambda_mc_half", e.lambda_half);
  s.add("stderr_half", e.stderr_half).add("lambda_plain", e.lambda_plain).add("survival", e.survival);
  cx.out.csv("oracle.csv", s.table());
}

inline void cmd_compare(Context& cx) {
  const Domain D = build_domain(cx.cfg, cx.problem.dim);
  const FkEstimate mc = run_oracle(cx, D);
  const EigenResult e = principal_eig(cx.problem.on(D, cx.cfg.number("grid.halo", 0.0)), cx.problem.eig);
  const double diff = std::abs(mc.lambda - e.lambda);
  const double allowed = std::max(0.1 * std::abs(e.lambda), 3.0 * mc.stderr_);
  Summary s;
  s.add("lambda_mc", mc.lambda).add("stderr", mc.stderr_).add("lambda_mc_half", mc.lambda_half);
  s.add("lambda_eig", e.lambda).add("residual", e.residual).add("abs_difference", diff).add("allowed", allowed);
  s.flag("agree", diff <= allowed);
  cx.out.csv("compare.csv", s.table());
}

}  // namespace detail

/// Runs one config end to end. Errors are returned as exit codes, never thrown.
inline RunResult run(const RunOptions& opt) {
  RunResult res;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Config cfg = load_config(opt);
    const std::string command = cfg.string("command.name");
    if (std::find(command_names().begin(), command_names().end(), command) == command_names().end())
      fail(ErrorCode::UnknownCommand, cfg.location("command.name").str() + ": unknown command '" + command + "'");
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.integer("seed", 1));
    const unsigned threads = resolve_threads(opt.threads);
    const fs::path dir = cfg.string("output.dir", "out");
    const bool plot = cfg.boolean("output.plot", false);
    detail::Artifacts artifacts(dir, plot);
    detail::Context cx{cfg, detail::build_problem(cfg), seed, threads, artifacts};
    static const std::map<std::string, void (*)(detail::Context&)> table = {
        {"eig", detail::cmd_eig},         {"sweep", detail::cmd_sweep},     {"exterior", detail::cmd_exterior},
        {"mp", detail::cmd_mp},           {"semilinear", detail::cmd_semilinear},
        {"harnack", detail::cmd_harnack}, {"classify", detail::cmd_classify},
        {"oracle", detail::cmd_oracle},   {"compare", detail::cmd_compare}};
    table.at(command)(cx);
    cfg.reject_unused();

    nlohmann::ordered_json m;
    m["tool"] = "nlspec";
    m["version"] = NONLOCAL_SPECTRA_VERSION;
    m["versions"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"compiler", __VERSION__}};
    m["command"] = command;
    const std::string canonical = cfg.canonical();
    m["config_hash"] = "fnv1a64:" + fnv1a_hex(canonical);
    m["config"] = canonical;
    m["seed"] = seed;
    m["threads"] = threads;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& f : cx.out.files())
      files.push_back({{"file", f}, {"fnv1a64", fnv1a_hex(io::read_file(dir / f))}});
    m["artifacts"] = files;
    m["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    io::write_atomic(dir / "manifest.json", m.dump(2) + "\n");
    res.out_dir = dir;
    res.artifacts = cx.out.files();
    res.artifacts.push_back("manifest.json");
    res.message = command + ": wrote " + std::to_string(res.artifacts.size()) + " files to " + dir.string();
    res.exit_code = 0;
  } catch (const Error& e) {
    res.exit_code = e.category() == Category::Config ? 2 : 1;
    res.message = e.what();
  } catch (const std::exception& e) {
    res.exit_code = 1;
    res.message = std::string("Internal: ") + e.what();
  }
  return res;
}

/// Re-runs the configuration stored in a manifest. Artifacts go to `out_dir`
/// when given, otherwise back into the manifest's own directory.
inline RunResult rerun(const fs::path& manifest_path, std::optional<fs::path> out_dir = std::nullopt,
                       std::optional<unsigned> threads = std::nullopt) {
  RunResult res;
  try {
    const auto m = nlohmann::json::parse(io::read_file(manifest_path));
    RunOptions opt;
    opt.config_text = m.at("config").get<std::string>();
    opt.out_dir = out_dir ? *out_dir : manifest_path.parent_path();
    opt.threads = threads ? threads : std::optional<unsigned>(m.at("threads").get<unsigned>());
    return run(opt);
  } catch (const Error& e) {
    res.exit_code = e.category() == Category::Config ? 2 : 1;
    res.message = e.what();
  } catch (const nlohmann::json::exception& e) {
    res.exit_code = 2;
    res.message = std::string("ConfigParse: manifest ") + manifest_path.string() + ": " + e.what();
  }
  return res;
}

}  // namespace nls::app
