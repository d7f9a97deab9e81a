#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "nonlocal_spectra/linear.hpp"
#include "nonlocal_spectra/lp.hpp"
#include "nonlocal_spectra/sweep.hpp"

namespace nls {

enum class Sense { Subsolution, Supersolution };
enum class FeasibilityEngine { Auto, Complementarity, Simplex };

/// Truncated witness problem: find phi in [1, phi_max] on the interior and on
/// every exterior node the rows reach, such that L phi + lambda phi <= 0
/// (Subsolution) or >= 0 (Supersolution) at interior rows.
struct FeasibilityProblem {
  Sense sense = Sense::Subsolution;
  double phi_max = 1e3;
  double lambda = 0.0;
};

struct FeasibilityOutcome {
  bool feasible = false;
  /// Witness on interior unknowns (empty when infeasible).
  Vector phi;
  FeasibilityEngine engine = FeasibilityEngine::Complementarity;
};

/// Precomputed data shared by all probes on one operator.
class WitnessSearch {
 public:
  explicit WitnessSearch(const DiscreteOperator& op, std::size_t simplex_cap = 400)
      : op_(op), simplex_cap_(simplex_cap) {
    const Vector one_in = Vector::Ones(static_cast<Eigen::Index>(op.size()));
    const Vector one_ex = Vector::Ones(op.B.cols());
    row_c_ = op.L * one_in + op.B * one_ex;
    if (op.is_monotone_scheme) {
      const EigenResult e = principal_eig(op);
      lambda_d_ = e.lambda;
      lambda_d_slack_ = e.residual + 1e-12 * std::max(1.0, std::abs(e.lambda));
    }
    scale_ = std::max(1.0, inf_norm(op.L));
  }

  const DiscreteOperator& op() const { return op_; }
  /// Row sums of the operator applied to the constant 1 (equals c for FULL_I).
  const Vector& row_constant() const { return row_c_; }
  double dirichlet_lambda() const { return lambda_d_; }

  FeasibilityOutcome check(const FeasibilityProblem& fp, FeasibilityEngine engine = FeasibilityEngine::Auto) const {
    if (!(fp.phi_max > 1.0)) fail(ErrorCode::InvalidParameter, "phi_max must exceed 1");
    if (engine == FeasibilityEngine::Auto)
      engine = op_.is_monotone_scheme ? FeasibilityEngine::Complementarity : FeasibilityEngine::Simplex;
    if (engine == FeasibilityEngine::Complementarity && !op_.is_monotone_scheme)
      fail(ErrorCode::InvalidParameter, "complementarity engine needs a monotone scheme");
    return engine == FeasibilityEngine::Complementarity ? complementarity(fp) : simplex(fp);
  }

  bool feasible(const FeasibilityProblem& fp, FeasibilityEngine engine = FeasibilityEngine::Auto) const {
    return check(fp, engine).feasible;
  }

 private:
  // The exterior values enter each row through B >= 0, so the extreme value
  // is optimal: 1 for subsolutions, phi_max for supersolutions. What remains
  // is the least element of {x >= 0 : A x >= q} with the Z-matrix
  // A = -(L + lambda I), found by Chandrasekaran's active-set growth.
  //   Subsolution:   phi = 1 + x,       q = c_row + lambda
  //   Supersolution: phi = phi_max - x, q = -phi_max (c_row + lambda)
  // The box is respected iff max x <= phi_max - 1.
  FeasibilityOutcome complementarity(const FeasibilityProblem& fp) const {
    FeasibilityOutcome out;
    out.engine = FeasibilityEngine::Complementarity;
    const double lam = fp.lambda;
    if (fp.sense == Sense::Subsolution && lam >= lambda_d_ - lambda_d_slack_) {
      // Any phi >= 1 with L phi + lam phi <= 0 puts lam below min(-L phi / phi) <= lambda_D.
      if (lam > lambda_d_ + lambda_d_slack_) return out;
    }
    const Eigen::Index n = static_cast<Eigen::Index>(op_.size());
    Vector q = row_c_.array() + lam;
    if (fp.sense == Sense::Supersolution) q *= -fp.phi_max;

    const bool check_blocks = lam >= lambda_d_ - lambda_d_slack_;
    std::vector<char> active(n, 0);
    std::vector<int> members;
    Vector x = Vector::Zero(n);
    const double qscale = std::max(1.0, q.cwiseAbs().maxCoeff());
    for (int round = 0; round <= n; ++round) {
      const Vector w = -(op_.L * x) - lam * x - q;
      const double tol = 1e-11 * (qscale + scale_ * std::max(1.0, x.cwiseAbs().maxCoeff()));
      bool grew = false;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!active[i] && w[i] < -tol) {
          active[i] = 1;
          grew = true;
        }
      if (!grew) break;
      members.clear();
      for (Eigen::Index i = 0; i < n; ++i)
        if (active[i]) members.push_back(static_cast<int>(i));
      const SparseMatrix Laa = detail::principal_submatrix(op_.L, members);
      if (check_blocks) {
        const EigenResult sub = principal_eig(Laa, true, 0);
        if (!(lam < sub.lambda - sub.residual)) return out;
      }
      SparseMatrix Aaa = -Laa;
      for (int k = 0; k < Aaa.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(Aaa, k); it; ++it)
          if (it.row() == it.col()) it.valueRef() -= lam;
      Eigen::SparseLU<SparseMatrix> lu(Aaa);
      if (lu.info() != Eigen::Success) return out;
      Vector qa(static_cast<Eigen::Index>(members.size()));
      for (std::size_t k = 0; k < members.size(); ++k) qa[k] = q[members[k]];
      const Vector xa = lu.solve(qa);
      if (!xa.allFinite()) return out;
      x.setZero();
      for (std::size_t k = 0; k < members.size(); ++k) x[members[k]] = std::max(0.0, xa[k]);
    }
    if (x.maxCoeff() > (fp.phi_max - 1.0) * (1.0 + 1e-12)) return out;
    out.feasible = true;
    out.phi = fp.sense == Sense::Subsolution ? Vector(x.array() + 1.0) : Vector(fp.phi_max - x.array());
    return out;
  }

  // Dense phase-1 LP with the exterior values as free unknowns in [1, phi_max].
  FeasibilityOutcome simplex(const FeasibilityProblem& fp) const {
    FeasibilityOutcome out;
    out.engine = FeasibilityEngine::Simplex;
    const Eigen::Index n = static_cast<Eigen::Index>(op_.size());
    std::vector<int> ring;
    {
      std::vector<char> used(op_.B.cols(), 0);
      for (int k = 0; k < op_.B.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(op_.B, k); it; ++it)
          if (it.value() != 0.0) used[it.col()] = 1;
      for (Eigen::Index j = 0; j < op_.B.cols(); ++j)
        if (used[j]) ring.push_back(static_cast<int>(j));
    }
    const Eigen::Index r = static_cast<Eigen::Index>(ring.size());
    if (static_cast<std::size_t>(n + r) > simplex_cap_)
      fail(ErrorCode::TooLargeForDenseCheck, "simplex feasibility limited to " + std::to_string(simplex_cap_) +
                                                 " unknowns, problem has " + std::to_string(n + r));
    const Eigen::MatrixXd Ld(op_.L);
    const Eigen::MatrixXd Bd(op_.B);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n + n + r, n + r);
    Eigen::VectorXd g(n + n + r);
    const double sign = fp.sense == Sense::Subsolution ? 1.0 : -1.0;
    // Rows: sign * (L + lambda) y + sign * B_ring y_ring <= -sign * (c_row + lambda)
    G.topLeftCorner(n, n) = sign * (Ld + fp.lambda * Eigen::MatrixXd::Identity(n, n));
    for (Eigen::Index k = 0; k < r; ++k) G.block(0, n + k, n, 1) = sign * Bd.col(ring[k]);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = -sign * (row_c_[i] + fp.lambda);
    G.bottomRows(n + r) = Eigen::MatrixXd::Identity(n + r, n + r);
    g.tail(n + r).setConstant(fp.phi_max - 1.0);
    const LpFeasibility lp = lp_feasible(G, g, 1e-10);
    if (!lp.feasible) return out;
    out.feasible = true;
    out.phi = lp.x.head(n).array() + 1.0;
    return out;
  }

  const DiscreteOperator& op_;
  std::size_t simplex_cap_;
  Vector row_c_;
  double lambda_d_ = std::numeric_limits<double>::infinity();
  double lambda_d_slack_ = 0.0;
  double scale_ = 1.0;
};

struct BisectionOptions {
  double phi_max = 1e3;
  double bisect_tol = 0.02;
  std::optional<std::pair<double, double>> bracket;
  FeasibilityEngine engine = FeasibilityEngine::Auto;
  /// Re-run at phi_max times each factor (skipped when the product is <= 1).
  std::vector<double> sensitivity_factors = {0.1, 10.0};
};

struct BisectionResult {
  /// Feasible endpoint of the final bracket.
  double lambda = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int probes = 0;
  double phi_max = 0.0;
  /// Lower bound -sup_D c checked for the subsolution value.
  double floor = -std::numeric_limits<double>::infinity();
  /// (phi_max', estimate) for each sensitivity factor.
  std::vector<std::pair<double, double>> sensitivity;
};

namespace detail {

/// Bisection over a monotone predicate; `feasible_below` selects which side is feasible.
inline BisectionResult bisect(const WitnessSearch& ws, Sense sense, double lo, double hi, const BisectionOptions& opt) {
  if (!(opt.bisect_tol > 0.0)) fail(ErrorCode::InvalidParameter, "bisect_tol must be positive");
  BisectionResult res;
  res.phi_max = opt.phi_max;
  auto feasible = [&](double lam) {
    ++res.probes;
    return ws.feasible({sense, opt.phi_max, lam}, opt.engine);
  };
  const bool f_lo = feasible(lo), f_hi = feasible(hi);
  const bool want_lo = sense == Sense::Subsolution;
  if (f_lo == f_hi || f_lo != want_lo)
    fail(ErrorCode::BracketInvalid, "bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                        "] does not separate feasible from infeasible (feasible at ends: " +
                                        std::to_string(f_lo) + ", " + std::to_string(f_hi) + ")");
  while (hi - lo > opt.bisect_tol) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid) == want_lo)
      lo = mid;
    else
      hi = mid;
  }
  res.lo = lo;
  res.hi = hi;
  res.lambda = want_lo ? lo : hi;
  return res;
}

}  // namespace detail

/// Truncated lambda'' : largest lambda admitting phi in [1, phi_max] with L phi + lambda phi <= 0.
inline BisectionResult lambda_double_prime(const DiscreteOperator& op, const BisectionOptions& opt = {}) {
  const WitnessSearch ws(op);
  const double max_c = op.max_c();
  double lo, hi;
  if (opt.bracket) {
    std::tie(lo, hi) = *opt.bracket;
  } else {
    lo = -max_c - 1.0;
    hi = std::isfinite(ws.dirichlet_lambda()) ? ws.dirichlet_lambda() + 1.0 : -op.min_c() + 1.0 + op.min_shift;
  }
  BisectionResult res = detail::bisect(ws, Sense::Subsolution, lo, hi, opt);
  res.floor = -max_c;
  if (res.lambda < -max_c - opt.bisect_tol)
    fail(ErrorCode::Internal, "lower floor -sup c violated: " + std::to_string(res.lambda) + " < " +
                                  std::to_string(-max_c));
  for (double f : opt.sensitivity_factors) {
    const double pm = opt.phi_max * f;
    if (!(pm > 1.0)) continue;
    BisectionOptions o = opt;
    o.phi_max = pm;
    o.sensitivity_factors.clear();
    res.sensitivity.emplace_back(pm, detail::bisect(ws, Sense::Subsolution, lo, hi, o).lambda);
  }
  return res;
}

/// Truncated lambda' : smallest lambda admitting phi in [1, phi_max] with L phi + lambda phi >= 0.
inline BisectionResult lambda_prime(const DiscreteOperator& op, const BisectionOptions& opt = {}) {
  const WitnessSearch ws(op);
  double lo, hi;
  if (opt.bracket) {
    std::tie(lo, hi) = *opt.bracket;
  } else {
    // phi = 1 already works once lambda >= -min(c_row); walk down until it stops working.
    hi = -ws.row_constant().minCoeff();
    double step = 1.0;
    lo = hi - step;
    int expansions = 0;
    while (ws.feasible({Sense::Supersolution, opt.phi_max, lo}, opt.engine)) {
      step *= 2.0;
      lo = hi - step;
      if (++expansions > 60) fail(ErrorCode::BracketInvalid, "no infeasible lower end found for lambda'");
    }
  }
  BisectionResult res = detail::bisect(ws, Sense::Supersolution, lo, hi, opt);
  for (double f : opt.sensitivity_factors) {
    const double pm = opt.phi_max * f;
    if (!(pm > 1.0)) continue;
    BisectionOptions o = opt;
    o.phi_max = pm;
    o.sensitivity_factors.clear();
    if (!opt.bracket) {
      // The infeasible end moves with phi_max; widen it again.
      double step = hi - lo;
      while (ws.feasible({Sense::Supersolution, pm, hi - step}, opt.engine)) step *= 2.0;
      res.sensitivity.emplace_back(pm, detail::bisect(ws, Sense::Supersolution, hi - step, hi, o).lambda);
    } else {
      res.sensitivity.emplace_back(pm, detail::bisect(ws, Sense::Supersolution, lo, hi, o).lambda);
    }
  }
  return res;
}

/// Re-checks the bisection contract by direct solves at lambda -/+ 2 bisect_tol.
struct FlipCheck {
  bool feasible_side = false;
  bool infeasible_side = false;
};

inline FlipCheck verify_flip(const DiscreteOperator& op, Sense sense, double lambda, double phi_max, double bisect_tol) {
  const WitnessSearch ws(op);
  const double d = 2.0 * bisect_tol;
  FlipCheck fc;
  if (sense == Sense::Subsolution) {
    fc.feasible_side = ws.feasible({sense, phi_max, lambda - d});
    fc.infeasible_side = !ws.feasible({sense, phi_max, lambda + d});
  } else {
    fc.feasible_side = ws.feasible({sense, phi_max, lambda + d});
    fc.infeasible_side = !ws.feasible({sense, phi_max, lambda - d});
  }
  return fc;
}

enum class MpVerdict { Pass, Fail };

struct MpCheck {
  MpVerdict verdict = MpVerdict::Pass;
  /// u solving L u = f on PASS, the principal eigenfunction on FAIL.
  Vector witness;
  double lambda = 0.0;
  double residual = 0.0;
};

/// Maximum principle with zero exterior data: L u = f >= 0 should force u <= 0.
inline MpCheck refined_mp_check(const DiscreteOperator& op, const Vector& f) {
  if (f.size() != static_cast<Eigen::Index>(op.size())) fail(ErrorCode::InconsistentInput, "f length mismatch");
  if ((f.array() < 0.0).any()) fail(ErrorCode::InvalidParameter, "f must be nonnegative");
  const EigenResult e = principal_eig(op);
  MpCheck out;
  out.lambda = e.lambda;
  out.residual = e.residual;
  if (e.lambda > 3.0 * e.residual) {
    out.witness = solve_dirichlet(op.L, f);
    const double top = out.witness.size() ? out.witness.maxCoeff() : 0.0;
    const double mag = out.witness.lpNorm<Eigen::Infinity>();
    out.verdict = top <= 1e-8 * mag ? MpVerdict::Pass : MpVerdict::Fail;
    return out;
  }
  if (e.lambda < -3.0 * e.residual) {
    // psi > 0 with L psi = -lambda psi >= 0 contradicts the principle.
    out.verdict = MpVerdict::Fail;
    out.witness = e.psi;
    return out;
  }
  fail(ErrorCode::SingularSystem, "principal eigenvalue " + std::to_string(e.lambda) + " is zero within residual");
}

enum class BarrierKind { Exp, Poly };

struct BarrierReport {
  std::shared_ptr<const SpatialGrid> grid;
  /// chi at interior unknowns.
  Vector chi;
  /// (L chi) / chi at interior unknowns.
  Vector ratio;
  /// max of the ratio over nodes with |x| >= 1 + sqrt(d) h.
  double c1 = 0.0;
};

/// chi = e^{sigma|x|} (Exp) or |x|^sigma (Poly) outside the unit ball, constant inside.
inline double barrier_value(BarrierKind kind, double sigma, double r) {
  const double rr = std::max(r, 1.0);
  return kind == BarrierKind::Exp ? std::exp(sigma * rr) : std::pow(rr, sigma);
}

/// Applies the operator (with the barrier as exterior data) to the barrier on the ball of radius `extent`.
inline BarrierReport barrier(BarrierKind kind, double sigma, const Problem& problem, double extent = 10.0) {
  if (!(sigma > 0.0)) fail(ErrorCode::InvalidParameter, "sigma must be positive");
  const DiscreteOperator op = problem.on(Domain::ball(problem.dim, extent));
  const SpatialGrid& g = *op.grid;
  Vector u(static_cast<Eigen::Index>(g.num_interior())), ext(static_cast<Eigen::Index>(g.num_exterior()));
  for (std::size_t p = 0; p < g.num_interior(); ++p) u[p] = barrier_value(kind, sigma, norm(g.interior_point(p), g.dim()));
  for (std::size_t e = 0; e < g.num_exterior(); ++e)
    ext[e] = barrier_value(kind, sigma, norm(g.exterior_point(e), g.dim()));
  BarrierReport rep;
  rep.grid = op.grid;
  rep.chi = u;
  rep.ratio = op.apply(u, ext).cwiseQuotient(u);
  const double inner = 1.0 + std::sqrt(static_cast<double>(g.dim())) * g.h();
  double c1 = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < g.num_interior(); ++p)
    if (norm(g.interior_point(p), g.dim()) >= inner) c1 = std::max(c1, rep.ratio[p]);
  if (!std::isfinite(c1) || c1 > 1e100)
    fail(ErrorCode::UnboundedRatio, "barrier ratio is unbounded (growth conditions violated?)");
  rep.c1 = c1;
  return rep;
}

struct RightMonotonicity {
  double lambda_c = 0.0;
  double lambda_ch = 0.0;
  double gap = 0.0;
  double tolerance = 0.0;
  bool strict = false;
};

/// Compares the sweep limits for c and c + bump on the same radii and grids.
inline RightMonotonicity right_monotonicity_check(const Problem& problem, std::function<double(const Point&)> bump,
                                                  const std::vector<double>& radii, const SweepOptions& opt = {}) {
  const SweepResult base = sweep(problem, radii, opt);
  const SweepResult bumped = sweep(problem.plus_potential(std::move(bump)), radii, opt);
  RightMonotonicity out;
  out.lambda_c = base.entries.back().lambda;
  out.lambda_ch = bumped.entries.back().lambda;
  out.gap = out.lambda_c - out.lambda_ch;
  out.tolerance = base.entries.back().residual + bumped.entries.back().residual;
  out.strict = out.gap > out.tolerance;
  return out;
}

}  // namespace nls
