#pragma once

#include <algorithm>
#include <array>
#include <exception>
#include <limits>
#include <string>
#include <tuple>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "nonlocal_spectra/problem.hpp"

namespace nls {

// One simulated path. Weights are recorded at T/4, T/2 and T so that
// log-ratio estimators can be formed without re-running.
struct PathOutcome {
  std::array<bool, 3> alive{};
  std::array<double, 3> int_c{};
  /// First time the path left D (T if it survived).
  double exit_time = 0.0;
  int jumps = 0;
  Point x_final = Point::Zero();
};

struct PathEnsemble {
  std::uint64_t seed = 0;
  std::size_t count = 0;
  double horizon = 0.0;
  double dt = 0.0;
  double thinning_bound = 0.0;
  std::vector<PathOutcome> paths;
};

struct SimulationOptions {
  /// 0 = hardware concurrency.
  unsigned threads = 1;
  /// Declared sup of nu(x) on D; computed from the kernel when unset.
  std::optional<double> thinning_bound;
  /// Offset lattice used to sample density kernels (atoms are jittered inside their cell).
  double kernel_h = 0.01;
};

namespace detail {

inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Sum in a fixed pairwise tree so the result does not depend on how work was split.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

inline double total_weight(const std::vector<Atom>& atoms) {
  double m = 0.0;
  for (const Atom& a : atoms) m += a.w;
  return m;
}

inline double kernel_bound(const Problem& p, const Domain& D, double h) {
  // Kernels built without a position field carry the same mass everywhere.
  if (p.kernel.uniform_reach()) return p.kernel.mass(Point::Zero(), h, p.dim) * (1.0 + 1e-9);
  if (!D.bounded())
    fail(ErrorCode::InvalidParameter, "a thinning bound must be declared for position-dependent kernels on all of R^d");
  // Sample at most ~4e4 points of D.
  const auto [lo, hi] = D.bounding_box();
  const double extent = (hi - lo).maxCoeff();
  const double gh = std::max(h, extent / (p.dim == 1 ? 40000.0 : 200.0));
  const SpatialGrid g = build_grid(D, gh, 0.0);
  double m = 0.0;
  for (std::size_t i = 0; i < g.num_interior(); ++i) m = std::max(m, p.kernel.mass(g.interior_point(i), h, p.dim));
  return m * (1.0 + 1e-9);
}

}  // namespace detail

/// Euler-Maruyama paths of the diffusion with generator trace(a D^2) + b . grad
/// (increment covariance 2 a dt), jumps drawn by thinning against sup_D nu,
/// killed at the first step outside D, c integrated by the left-endpoint rule.
inline PathEnsemble simulate_paths(const Problem& problem, const Domain& D, const Point& x_start, double T, double dt,
                                   std::size_t N, std::uint64_t seed, const SimulationOptions& opt = {}) {
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::InvalidParameter, "dt must be positive");
  if (!(T > 0.0)) fail(ErrorCode::InvalidParameter, "horizon T must be positive");
  if (N < 1) fail(ErrorCode::InvalidParameter, "need at least one path");
  if (!D.contains(x_start)) fail(ErrorCode::InvalidParameter, "start point is not inside D");
  const int dim = problem.dim;
  const long steps = std::lround(T / dt);
  const long quarter = steps / 4, half = steps / 2;

  PathEnsemble ens;
  ens.seed = seed;
  ens.count = N;
  ens.horizon = T;
  ens.dt = dt;
  ens.thinning_bound = opt.thinning_bound.value_or(detail::kernel_bound(problem, D, opt.kernel_h));
  ens.paths.resize(N);
  const double bound = ens.thinning_bound;
  const double sqrt2dt = std::sqrt(2.0 * dt);
  const double kh = opt.kernel_h;
  const bool fixed = problem.kernel.uniform_reach().has_value();
  const std::vector<Atom> fixed_atoms = fixed ? problem.kernel.discretize(Point::Zero(), kh, dim) : std::vector<Atom>{};
  const double fixed_mass = detail::total_weight(fixed_atoms);

  auto run_path = [&](std::size_t index) {
    std::mt19937_64 rng = detail::path_rng(seed, index);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::poisson_distribution<int> candidates(std::max(bound * dt, 1e-300));
    PathOutcome out;
    Point x = x_start;
    double ic = 0.0;
    bool alive = true;
    long k = 0;
    auto record = [&](long step) {
      const int slot = step == quarter ? 0 : (step == half ? 1 : 2);
      out.alive[slot] = alive;
      out.int_c[slot] = ic;
    };
    for (; k < steps && alive; ++k) {
      if (k == quarter) record(k);
      if (k == half) record(k);
      ic += problem.coeffs.c(x) * dt;
      const Matrix2 a = problem.coeffs.a(x);
      const Vector2 b = problem.coeffs.b(x);
      Point xi(normal(rng), dim == 2 ? normal(rng) : 0.0);
      Point step;
      if (dim == 1) {
        step = Point(b[0] * dt + sqrt2dt * std::sqrt(a(0, 0)) * xi[0], 0.0);
      } else {
        // Lower Cholesky factor of a, so that l l^T = a.
        const double l11 = std::sqrt(a(0, 0));
        const double l21 = a(1, 0) / l11;
        const double l22 = std::sqrt(std::max(a(1, 1) - l21 * l21, 0.0));
        step = b * dt + sqrt2dt * Point(l11 * xi[0], l21 * xi[0] + l22 * xi[1]);
      }
      x += step;
      if (!D.contains(x)) {
        alive = false;
        break;
      }
      if (bound > 0.0) {
        const int n_cand = candidates(rng);
        for (int c = 0; c < n_cand && alive; ++c) {
          const std::vector<Atom> local = fixed ? std::vector<Atom>{} : problem.kernel.discretize(x, kh, dim);
          const std::vector<Atom>& atoms = fixed ? fixed_atoms : local;
          const double mass = fixed ? fixed_mass : detail::total_weight(atoms);
          if (mass > bound * (1.0 + 1e-9))
            fail(ErrorCode::ThinningBoundExceeded, "nu(x) = " + std::to_string(mass) + " exceeds thinning bound " +
                                                       std::to_string(bound));
          if (unif(rng) * bound >= mass) continue;
          double pick = unif(rng) * mass;
          std::size_t j = 0;
          while (j + 1 < atoms.size() && pick >= atoms[j].w) pick -= atoms[j++].w;
          Point z = atoms[j].z;
          if (problem.kernel.has_density()) {
            z[0] += (unif(rng) - 0.5) * kh;
            if (dim == 2) z[1] += (unif(rng) - 0.5) * kh;
          }
          x += z;
          ++out.jumps;
          if (!D.contains(x)) alive = false;
        }
        if (!alive) break;
      }
    }
    if (alive) {
      record(steps);
      out.exit_time = T;
    } else {
      out.exit_time = static_cast<double>(k + 1) * dt;
      // Slots not yet recorded see the path as dead.
      if (k < quarter) out.alive[0] = false;
      if (k < half) out.alive[1] = false;
      out.alive[2] = false;
      out.int_c[2] = ic;
    }
    out.x_final = x;
    ens.paths[index] = out;
  };

  unsigned threads = opt.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opt.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, N));
  if (threads <= 1) {
    for (std::size_t i = 0; i < N; ++i) run_path(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (N + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t * chunk; i < std::min(N, (t + 1) * chunk); ++i) run_path(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return ens;
}

struct FkEstimate {
  /// -(2/T) log(m_T / m_{T/2}): the eigenfunction prefactor cancels.
  double lambda = 0.0;
  double stderr_ = 0.0;
  /// Same estimator on the horizon T/2, i.e. -(4/T) log(m_{T/2} / m_{T/4}).
  double lambda_half = 0.0;
  double stderr_half = 0.0;
  /// Plain -(1/T) log m_T, biased by the start-point prefactor.
  double lambda_plain = 0.0;
  double survival = 0.0;
};

namespace detail {

inline double slot_weight(const PathOutcome& p, int slot) { return p.alive[slot] ? std::exp(p.int_c[slot]) : 0.0; }

inline std::array<double, 3> slot_means(const PathEnsemble& e, const std::vector<std::size_t>* pick) {
  std::array<double, 3> m{};
  const std::size_t n = pick ? pick->size() : e.paths.size();
  std::vector<double> buf(n);
  for (int s = 0; s < 3; ++s) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = slot_weight(e.paths[pick ? (*pick)[i] : i], s);
    m[s] = pairwise_sum(buf) / static_cast<double>(n);
  }
  return m;
}

}  // namespace detail

/// Feynman-Kac decay rate of the killed semigroup with bootstrap standard errors.
inline FkEstimate fk_estimate(const PathEnsemble& e, int bootstrap = 200) {
  const double T = e.horizon;
  const auto m = detail::slot_means(e, nullptr);
  if (!(m[2] > 0.0) || !(m[1] > 0.0) || !(m[0] > 0.0))
    fail(ErrorCode::AllPathsDead, "no path survived to T; increase N or reduce T");
  auto rates = [T](const std::array<double, 3>& mm) {
    return std::pair<double, double>{-(2.0 / T) * std::log(mm[2] / mm[1]), -(4.0 / T) * std::log(mm[1] / mm[0])};
  };
  FkEstimate out;
  std::tie(out.lambda, out.lambda_half) = rates(m);
  out.lambda_plain = -std::log(m[2]) / T;
  std::size_t alive = 0;
  for (const auto& p : e.paths) alive += p.alive[2];
  out.survival = static_cast<double>(alive) / static_cast<double>(e.paths.size());

  std::mt19937_64 rng = detail::path_rng(e.seed ^ 0xb0075742ULL, 0);
  std::uniform_int_distribution<std::size_t> idx(0, e.paths.size() - 1);
  std::vector<double> l1, l2;
  std::vector<std::size_t> pick(e.paths.size());
  for (int b = 0; b < bootstrap; ++b) {
    for (auto& p : pick) p = idx(rng);
    const auto mb = detail::slot_means(e, &pick);
    if (!(mb[0] > 0.0 && mb[1] > 0.0 && mb[2] > 0.0)) continue;
    const auto [a, c] = rates(mb);
    l1.push_back(a);
    l2.push_back(c);
  }
  auto sd = [](const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::infinity();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  out.stderr_ = sd(l1);
  out.stderr_half = sd(l2);
  return out;
}

inline FkEstimate fk_estimate(const Problem& problem, const Domain& D, const Point& x_start, double T, double dt,
                              std::size_t N, std::uint64_t seed, const SimulationOptions& opt = {}) {
  return fk_estimate(simulate_paths(problem, D, x_start, T, dt, N, seed, opt));
}

}  // namespace nls
