#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "nonlocal_spectra/linear.hpp"
#include "nonlocal_spectra/problem.hpp"

namespace nls {

struct KernelClassRow {
  double R = 0.0;
  double gamma = 0.0;
  bool eh1a = true;
  /// sup of g(y, y - x) over x in B_R, |y| > gamma (sampled).
  double M1 = 0.0;
  /// min over x in B_R of the lattice quadrature of g(y, x - y) over y in B_gamma.
  double M2 = 0.0;
  /// Where M2 is attained.
  Point argmin = Point::Zero();
  bool h1 = false;
};

struct PointsInwards {
  std::string domain;
  bool holds = false;
  std::size_t violations = 0;
};

struct DecayRow {
  double rho = 0.0;
  double value = 0.0;
};

struct KernelClassReport {
  std::vector<KernelClassRow> rows;
  bool h1 = false;
  bool h2 = false;
  std::vector<PointsInwards> inwards;
  std::vector<DecayRow> decay;
  double alpha = 0.0;
};

struct ClassifyOptions {
  std::vector<double> radii = {1.0, 2.0, 4.0};
  double alpha = 1.0;
  /// Lattice spacing for all sampled integrals and sups.
  double h = 0.05;
  std::vector<Domain> inward_domains;
  /// Collar width of the neighbourhood D' used for the points-inwards test.
  double inward_margin = 0.1;
  std::vector<double> decay_radii = {1.0, 2.0, 4.0, 8.0};
};

namespace detail {

/// Lattice points of h Z^d with |p| <= r (strict when `open`).
inline std::vector<Point> lattice_ball(int dim, double h, double r, bool open = false) {
  std::vector<Point> pts;
  const long k = static_cast<long>(std::floor(r / h + 1e-9));
  const double tol = 1e-9 * h;
  for (long i = -k; i <= k; ++i)
    for (long j = (dim == 2 ? -k : 0); j <= (dim == 2 ? k : 0); ++j) {
      const Point p(static_cast<double>(i) * h, static_cast<double>(j) * h);
      const double n = norm(p, dim);
      if (open ? n < r - tol : n <= r + tol) pts.push_back(p);
    }
  return pts;
}

inline double sup_support(const JumpKernel& k, int dim, double h, double r) {
  double s = 0.0;
  for (const Point& x : lattice_ball(dim, h, r)) s = std::max(s, k.support_radius(x));
  return s;
}

}  // namespace detail

/// gamma(r) = r + sup of the support radius over B_r.
inline double kernel_gamma(const JumpKernel& k, int dim, double h, double r) {
  return r + detail::sup_support(k, dim, h, r);
}

/// Checks the density kernel against the local-compactness, boundedness and positivity tests
/// by exhaustive lattice evaluation, plus points-inwards and the decay table.
inline KernelClassReport kernel_classify(const JumpKernel& kernel, int dim, const ClassifyOptions& opt = {}) {
  KernelClassReport rep;
  rep.alpha = opt.alpha;
  const double h = opt.h;
  const double cell = dim == 1 ? h : h * h;
  rep.h1 = kernel.has_density();
  for (double R : opt.radii) {
    KernelClassRow row;
    row.R = R;
    row.gamma = kernel_gamma(kernel, dim, h, R);
    const auto xs = detail::lattice_ball(dim, h, R, true);
    if (kernel.has_density()) {
      const double tol = 1e-9 * h;
      // g(x, y) must vanish for |y| > gamma; sample a shell of offsets beyond gamma.
      const auto far = detail::lattice_ball(dim, h, row.gamma + 2.0 * R + h);
      for (const Point& x : xs)
        for (const Point& y : far)
          if (norm(y, dim) > row.gamma + tol && kernel.density_at(x, y) != 0.0) row.eh1a = false;
      // M1: g(y, y - x) with x in B_R and |y| > gamma, sampled out to gamma + R + support.
      const double reach = row.gamma + R + detail::sup_support(kernel, dim, h, row.gamma + 2.0 * R);
      for (const Point& y : detail::lattice_ball(dim, h, reach))
        if (norm(y, dim) > row.gamma + tol)
          for (const Point& x : xs) row.M1 = std::max(row.M1, kernel.density_at(y, y - x));
      // M2: incoming mass at x from y in B_gamma.
      const auto ys = detail::lattice_ball(dim, h, row.gamma, true);
      row.M2 = std::numeric_limits<double>::infinity();
      for (const Point& x : xs) {
        double s = 0.0;
        for (const Point& y : ys) s += kernel.density_at(y, x - y);
        s *= cell;
        if (s < row.M2) {
          row.M2 = s;
          row.argmin = x;
        }
      }
      row.h1 = row.eh1a && std::isfinite(row.M1) && row.M2 > 0.0;
    } else {
      row.eh1a = true;
      row.M2 = 0.0;
      row.h1 = false;  // (H1) needs a density
    }
    rep.h1 = rep.h1 && row.h1;
    rep.rows.push_back(row);
  }
  // Finite support radius on each ball gives the containment with gamma(R) = R + support.
  rep.h2 = dim == 1;

  for (const Domain& D : opt.inward_domains) {
    PointsInwards pi;
    pi.domain = D.describe();
    const auto [lo, hi] = D.bounding_box();
    const double m = opt.inward_margin;
    const double tol = boundary_tolerance(h);
    const long i0 = static_cast<long>(std::floor((lo[0] - m) / h)), i1 = static_cast<long>(std::ceil((hi[0] + m) / h));
    const long j0 = dim == 2 ? static_cast<long>(std::floor((lo[1] - m) / h)) : 0;
    const long j1 = dim == 2 ? static_cast<long>(std::ceil((hi[1] + m) / h)) : 0;
    for (long i = i0; i <= i1; ++i)
      for (long j = j0; j <= j1; ++j) {
        const Point x(static_cast<double>(i) * h, static_cast<double>(j) * h);
        if (D.distance(x) > m) continue;
        for (const Atom& a : kernel.discretize(x, h, dim))
          if (!D.contains(x + a.z, tol)) ++pi.violations;
      }
    pi.holds = pi.violations == 0;
    rep.inwards.push_back(pi);
  }

  for (double rho : opt.decay_radii) {
    double sup = 0.0;
    const int samples = dim == 1 ? 2 : 64;
    for (int s = 0; s < samples; ++s) {
      const double th = 2.0 * M_PI * s / samples;
      const Point x = dim == 1 ? Point(s == 0 ? rho : -rho, 0.0) : Point(rho * std::cos(th), rho * std::sin(th));
      sup = std::max(sup, kernel.mass(x, h, dim));
    }
    rep.decay.push_back({rho, sup * std::exp(std::pow(rho, opt.alpha))});
  }
  return rep;
}

/// Solves L u = -B g: the operator vanishes in D and u = g outside.
inline Vector nonlocal_harmonic(const DiscreteOperator& op, const Vector& g, const EigenResult& eig) {
  if (g.size() != op.B.cols()) fail(ErrorCode::InconsistentInput, "exterior data length mismatch");
  if ((g.array() < 0.0).any()) fail(ErrorCode::InvalidParameter, "exterior data must be nonnegative");
  if (!(eig.lambda > 3.0 * eig.residual))
    fail(ErrorCode::EigenvalueNotPositive, "Dirichlet problem with data needs a positive principal eigenvalue");
  const Vector u = solve_dirichlet(op.L, Vector(-(op.B * g)));
  const double scale = std::max(1.0, g.lpNorm<Eigen::Infinity>());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u[i] < -1e-10 * scale)
      fail(ErrorCode::NegativeSolution, "harmonic extension negative at unknown " + std::to_string(i));
  return u;
}

inline Vector nonlocal_harmonic(const DiscreteOperator& op, const Vector& g) {
  return nonlocal_harmonic(op, g, principal_eig(op));
}

/// Counter-based uniform in [0, 1) keyed on (seed, stream, a, b).
inline double keyed_uniform(std::uint64_t seed, std::uint64_t stream, std::int64_t a, std::int64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t z = mix(seed);
  z = mix(z ^ stream);
  z = mix(z ^ static_cast<std::uint64_t>(a));
  z = mix(z ^ static_cast<std::uint64_t>(b));
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

struct HarnackLevel {
  double h = 0.0;
  /// Max over random samples of sup_{B_R} u / u(0).
  double max_ratio = 0.0;
  std::vector<double> sample_ratios;
  /// Sup over single-node exterior data (the extreme rays of the data cone).
  double worst_ratio = 0.0;
};

enum class HarnackVerdict { Stable, Fail, Inconclusive };

struct HarnackReport {
  double R = 0.0;
  double gamma_breve = 0.0;
  double ambient_radius = 0.0;
  std::vector<HarnackLevel> levels;
  /// max/min - 1 of the sampled max ratio across levels.
  double drift = 0.0;
  /// last / first of the sampled max ratio.
  double growth = 0.0;
  double worst_growth = 0.0;
  HarnackVerdict verdict = HarnackVerdict::Inconclusive;
};

struct HarnackOptions {
  int samples = 20;
  std::uint64_t seed = 1;
  /// Spacings for the refinement study; the first is the coarsest.
  std::vector<double> hs = {0.1, 0.05, 0.025};
  double stable_drift = 0.10;
  double fail_growth = 2.0;
  /// Multiplier applied to exterior data (the ratios must not depend on it).
  double data_scale = 1.0;
  bool worst_case = true;
};

/// Random data that is constant on unit physical cells, so every h sees the same function.
inline Vector cell_data(const SpatialGrid& g, std::uint64_t seed, std::uint64_t sample, double scale = 1.0) {
  Vector out(static_cast<Eigen::Index>(g.num_exterior()));
  for (std::size_t e = 0; e < g.num_exterior(); ++e) {
    const Point& x = g.exterior_point(e);
    out[e] = scale * keyed_uniform(seed, sample, static_cast<std::int64_t>(std::floor(x[0])),
                                   static_cast<std::int64_t>(std::floor(x[1])));
  }
  return out;
}

/// Empirical Harnack ratios sup_{B_R} u / u(0) for nonnegative harmonic extensions
/// on the ball of radius 2 gamma_breve(R), repeated over a refinement ladder.
inline HarnackReport harnack_ratio(const Problem& problem, double R, const HarnackOptions& opt = {}) {
  if (opt.hs.empty()) fail(ErrorCode::InvalidParameter, "need at least one spacing");
  HarnackReport rep;
  rep.R = R;
  const double h0 = opt.hs.front();
  auto gamma = [&](double r) { return kernel_gamma(problem.kernel, problem.dim, h0, r); };
  rep.gamma_breve = gamma(2.0 * R + gamma(2.0 * R));
  rep.ambient_radius = 2.0 * rep.gamma_breve;

  for (double h : opt.hs) {
    const DiscreteOperator op = problem.with_h(h).on(Domain::ball(problem.dim, rep.ambient_radius));
    const SpatialGrid& g = *op.grid;
    const EigenResult eig = principal_eig(op);
    const std::size_t origin = g.nearest_interior(Point::Zero());
    std::vector<std::size_t> inner;
    for (std::size_t p = 0; p < g.num_interior(); ++p)
      if (norm(g.interior_point(p), g.dim()) <= R + boundary_tolerance(h)) inner.push_back(p);

    HarnackLevel lvl;
    lvl.h = h;
    for (int s = 0; s < opt.samples; ++s) {
      const Vector u = nonlocal_harmonic(op, cell_data(g, opt.seed, static_cast<std::uint64_t>(s), opt.data_scale), eig);
      double sup = 0.0;
      for (std::size_t p : inner) sup = std::max(sup, u[p]);
      const double ratio = u[origin] > 0.0 ? sup / u[origin] : std::numeric_limits<double>::infinity();
      lvl.sample_ratios.push_back(ratio);
      lvl.max_ratio = std::max(lvl.max_ratio, ratio);
    }
    if (opt.worst_case) {
      // Row p of -L^{-1} B gives u(p) for every unit datum at once.
      Eigen::SparseLU<SparseMatrix> lu(SparseMatrix(op.L.transpose()));
      if (lu.info() != Eigen::Success) fail(ErrorCode::SingularSystem, "transposed factorisation failed");
      auto response = [&](std::size_t p) {
        Vector e = Vector::Zero(op.L.rows());
        e[static_cast<Eigen::Index>(p)] = 1.0;
        return Vector(-(op.B.transpose() * Vector(lu.solve(e))));
      };
      const Vector at0 = response(origin);
      Vector best = Vector::Zero(at0.size());
      for (std::size_t p : inner) best = best.cwiseMax(response(p));
      double worst = 0.0;
      const double floor = 1e-14 * at0.lpNorm<Eigen::Infinity>();
      for (Eigen::Index e = 0; e < at0.size(); ++e) {
        if (best[e] <= floor) continue;
        worst = std::max(worst, at0[e] > floor ? best[e] / at0[e] : std::numeric_limits<double>::infinity());
      }
      lvl.worst_ratio = worst;
    }
    rep.levels.push_back(lvl);
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& l : rep.levels) {
    lo = std::min(lo, l.max_ratio);
    hi = std::max(hi, l.max_ratio);
  }
  rep.drift = hi / lo - 1.0;
  rep.growth = rep.levels.back().max_ratio / rep.levels.front().max_ratio;
  rep.worst_growth = rep.levels.front().worst_ratio > 0.0
                         ? rep.levels.back().worst_ratio / rep.levels.front().worst_ratio
                         : 0.0;
  if (rep.growth >= opt.fail_growth || rep.worst_growth >= opt.fail_growth || !std::isfinite(hi))
    rep.verdict = HarnackVerdict::Fail;
  else if (rep.drift <= opt.stable_drift)
    rep.verdict = HarnackVerdict::Stable;
  return rep;
}

}  // namespace nls
