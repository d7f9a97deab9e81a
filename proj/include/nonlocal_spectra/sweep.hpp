#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "nonlocal_spectra/problem.hpp"

namespace nls {

struct SweepEntry {
  double radius = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t unknowns = 0;
  /// Anchored eigenfunction on the truncation (psi(anchor) = 1).
  std::shared_ptr<const SpatialGrid> grid;
  Vector psi;
};

struct LimitEstimate {
  double value = 0.0;
  bool converged = false;
  /// Set when some later entry exceeds an earlier one beyond tolerance.
  bool non_monotone = false;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  LimitEstimate limit;
  /// Indices i where lambda_{i+1} > lambda_i + residual_i + residual_{i+1}.
  std::vector<std::size_t> violations;
};

struct SweepOptions {
  double cauchy_tol = 0.02;
  /// Throw MonotonicityViolation instead of only recording it.
  bool strict = true;
  /// Point at which every snapshot is normalised.
  Point anchor = Point::Zero();
};

/// Conservative limit: the last value, flagged converged when the last two
/// agree within cauchy_tol and the sequence never rises beyond `slack`.
inline LimitEstimate estimate_limit(const std::vector<std::pair<double, double>>& seq, double cauchy_tol,
                                    double slack = 1e-12) {
  if (seq.size() < 2) fail(ErrorCode::InvalidParameter, "estimate_limit needs at least two entries");
  LimitEstimate out;
  out.value = seq.back().second;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i)
    if (seq[i + 1].second > seq[i].second + slack) out.non_monotone = true;
  const double last_step = std::abs(seq.back().second - seq[seq.size() - 2].second);
  out.converged = !out.non_monotone && last_step <= cauchy_tol;
  return out;
}

namespace detail {

inline void check_increasing(const std::vector<double>& radii) {
  if (radii.empty()) fail(ErrorCode::InvalidParameter, "need at least one radius");
  for (std::size_t i = 0; i + 1 < radii.size(); ++i)
    if (!(radii[i + 1] > radii[i])) fail(ErrorCode::InvalidParameter, "radii must be strictly increasing");
}

inline SweepEntry solve_on(const Problem& problem, const Domain& domain, double radius, const Point& anchor) {
  const DiscreteOperator op = problem.on(domain);
  EigenOptions opt = problem.eig;
  opt.anchor = op.grid->nearest_interior(anchor);
  const EigenResult e = principal_eig(op, opt);
  SweepEntry s;
  s.radius = radius;
  s.lambda = e.lambda;
  s.residual = e.residual;
  s.lower = e.lower;
  s.upper = e.upper;
  s.unknowns = op.size();
  s.grid = op.grid;
  s.psi = e.psi;
  return s;
}

inline SweepResult finish(std::vector<SweepEntry> entries, const SweepOptions& opt, const char* what) {
  SweepResult out;
  out.entries = std::move(entries);
  for (std::size_t i = 0; i + 1 < out.entries.size(); ++i) {
    const auto& a = out.entries[i];
    const auto& b = out.entries[i + 1];
    if (b.lambda > a.lambda + a.residual + b.residual) out.violations.push_back(i);
  }
  if (opt.strict && !out.violations.empty()) {
    const auto& a = out.entries[out.violations[0]];
    const auto& b = out.entries[out.violations[0] + 1];
    fail(ErrorCode::MonotonicityViolation, std::string(what) + ": lambda rose from " + std::to_string(a.lambda) +
                                               " at r=" + std::to_string(a.radius) + " to " +
                                               std::to_string(b.lambda) + " at r=" + std::to_string(b.radius));
  }
  if (out.entries.size() >= 2) {
    std::vector<std::pair<double, double>> seq;
    double slack = 0.0;
    for (const auto& e : out.entries) {
      seq.emplace_back(e.radius, e.lambda);
      slack = std::max(slack, 2.0 * e.residual);
    }
    out.limit = estimate_limit(seq, opt.cauchy_tol, slack);
  } else {
    out.limit.value = out.entries.back().lambda;
  }
  return out;
}

}  // namespace detail

/// Dirichlet principal eigenvalues on the balls B_r, r in `radii`, at fixed h.
inline SweepResult sweep(const Problem& problem, const std::vector<double>& radii, const SweepOptions& opt = {}) {
  detail::check_increasing(radii);
  std::vector<SweepEntry> entries;
  for (double r : radii) entries.push_back(detail::solve_on(problem, Domain::ball(problem.dim, r), r, opt.anchor));
  return detail::finish(std::move(entries), opt, "sweep");
}

/// Truncated exterior domains B_n minus the closed ball B_r.
///
/// The limit of this sequence is an upper-bound heuristic for the exterior
/// eigenvalue (each truncation only removes test functions). In 1D the
/// domain has two components and the smaller component value is reported.
inline SweepResult exterior_sweep(const Problem& problem, double inner, const std::vector<double>& outer,
                                  SweepOptions opt = {}) {
  detail::check_increasing(outer);
  if (!(outer.front() > inner)) fail(ErrorCode::InvalidParameter, "outer radii must exceed the inner radius");
  std::vector<SweepEntry> entries;
  for (double n : outer) {
    // Anchor on the positive axis halfway across the annulus.
    Point a = Point::Zero();
    a[0] = 0.5 * (inner + n);
    entries.push_back(detail::solve_on(problem, Domain::annulus(problem.dim, inner, n), n, a));
  }
  return detail::finish(std::move(entries), opt, "exterior_sweep");
}

struct StabilityReport {
  /// sup_K |psi_{i+1} - psi_i| for consecutive snapshots.
  std::vector<double> deviations;
  /// sup_K psi_i per snapshot.
  std::vector<double> sups;
  /// Deviations grow between the last two comparisons.
  bool blow_up = false;
};

/// Compares anchored snapshots on the probe window K = closed ball of radius `window` at the origin.
inline StabilityReport eigenfunction_stability(const SweepResult& s, double window) {
  if (s.entries.empty()) fail(ErrorCode::InvalidParameter, "empty sweep");
  const SpatialGrid& g0 = *s.entries.front().grid;
  if (!(window < s.entries.front().radius))
    fail(ErrorCode::WindowOutsideSmallestDomain, "probe window radius " + std::to_string(window) +
                                                     " not inside the smallest truncation");
  // Probe lattice: interior lattice points of the smallest grid inside K.
  std::vector<std::array<long, 2>> probe;
  for (std::size_t p = 0; p < g0.num_interior(); ++p) {
    const Node& nd = g0.nodes()[g0.interior_node(p)];
    if (norm(nd.x, g0.dim()) <= window + boundary_tolerance(g0.h())) probe.push_back(nd.lattice);
  }
  auto values = [&](const SweepEntry& e) {
    std::vector<double> v;
    for (const auto& l : probe) {
      const auto id = e.grid->find(l[0], l[1]);
      if (!id || e.grid->unknown_of(*id) < 0)
        fail(ErrorCode::WindowOutsideSmallestDomain, "probe lattice differs between snapshots");
      v.push_back(e.psi[e.grid->unknown_of(*id)]);
    }
    return v;
  };
  StabilityReport rep;
  std::vector<double> prev;
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    const std::vector<double> cur = values(s.entries[i]);
    rep.sups.push_back(*std::max_element(cur.begin(), cur.end()));
    if (i > 0) {
      double dev = 0.0;
      for (std::size_t k = 0; k < cur.size(); ++k) dev = std::max(dev, std::abs(cur[k] - prev[k]));
      rep.deviations.push_back(dev);
    }
    prev = cur;
  }
  const auto& d = rep.deviations;
  rep.blow_up = d.size() >= 2 && d.back() > d[d.size() - 2] * (1.0 + 1e-9) + 1e-12;
  return rep;
}

struct GrowthDominance {
  double k = 0.0;
  double R = 0.0;
  bool success = false;
  std::string note;
};

/// Probe of minimal growth: scale k from the outermost shell, then find the smallest R >= rho
/// beyond which k psi <= v on every stored node.
///
/// `radius[i]`, `psi[i]`, `v[i]` describe the nodes of one truncation; the
/// outermost shell is the set of nodes within `shell` of the largest radius.
inline GrowthDominance growth_dominance(const std::vector<double>& radius, const Vector& psi, const Vector& v,
                                        double rho, double shell) {
  const std::size_t n = radius.size();
  if (static_cast<std::size_t>(psi.size()) != n || static_cast<std::size_t>(v.size()) != n)
    fail(ErrorCode::InconsistentInput, "radius, psi and v must have the same length");
  double rmax = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (radius[i] < rho) continue;
    if (!(psi[i] > 0.0) || !(v[i] > 0.0)) fail(ErrorCode::NonPositiveInput, "psi and v must be positive outside B_rho");
    rmax = std::max(rmax, radius[i]);
  }
  GrowthDominance out;
  if (rmax < 0.0) {
    out.note = "NoWitnessWithinTruncation: no node outside B_rho";
    return out;
  }
  double k = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (radius[i] >= rmax - shell) k = std::min(k, v[i] / psi[i]);
  // Largest radius (>= rho) where k psi > v; the witness starts just beyond it.
  const double slack = 1e-12;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i)
    if (radius[i] >= rho) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radius[a] < radius[b]; });
  double R = rho;
  bool violated = false;
  for (std::size_t i : order)
    if (k * psi[i] > v[i] * (1.0 + slack)) {
      R = std::nextafter(radius[i], std::numeric_limits<double>::infinity());
      violated = true;
    }
  // Snap the witness to the next stored radius.
  if (violated) {
    double next = std::numeric_limits<double>::infinity();
    for (std::size_t i : order)
      if (radius[i] >= R) next = std::min(next, radius[i]);
    R = next;
  }
  out.k = k;
  out.R = R;
  out.success = R <= rmax;
  if (!out.success) out.note = "NoWitnessWithinTruncation";
  return out;
}

/// Node radii of the interior unknowns of a truncation.
inline std::vector<double> unknown_radii(const SpatialGrid& g) {
  std::vector<double> r(g.num_interior());
  for (std::size_t p = 0; p < g.num_interior(); ++p) r[p] = norm(g.interior_point(p), g.dim());
  return r;
}

struct RefinementEntry {
  double h = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
};

/// lambda on one domain for a list of spacings, with observed orders against a reference when given.
inline std::vector<RefinementEntry> h_refinement(const Problem& problem, const Domain& domain,
                                                 const std::vector<double>& hs) {
  std::vector<RefinementEntry> out;
  for (double h : hs) {
    const DiscreteOperator op = problem.with_h(h).on(domain);
    EigenOptions opt = problem.eig;
    const EigenResult e = principal_eig(op, opt);
    out.push_back({h, e.lambda, e.residual});
  }
  return out;
}

/// Observed orders log(e_i / e_{i+1}) / log(h_i / h_{i+1}) against an exact value.
inline std::vector<double> observed_orders(const std::vector<RefinementEntry>& r, double exact) {
  std::vector<double> p;
  for (std::size_t i = 0; i + 1 < r.size(); ++i)
    p.push_back(std::log(std::abs(r[i].lambda - exact) / std::abs(r[i + 1].lambda - exact)) /
                std::log(r[i].h / r[i + 1].h));
  return p;
}

}  // namespace nls
