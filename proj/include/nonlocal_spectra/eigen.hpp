#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "nonlocal_spectra/error.hpp"
#include "nonlocal_spectra/operator.hpp"

namespace nls {

struct EigenResult {
  /// Principal eigenvalue with L psi = -lambda psi.
  double lambda = 0.0;
  Vector psi;
  std::size_t anchor = 0;
  /// max |L psi + lambda psi| with psi(anchor) = 1.
  double residual = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int iterations = 0;
  /// Number of connected blocks of L; psi vanishes on blocks whose own value is not the minimum.
  int components = 1;
  bool reducible = false;
  bool dense_fallback = false;
};

struct EigenOptions {
  double tol = 1e-9;
  int max_iter = 500;
  std::optional<std::size_t> anchor;
  /// Dense fallback cap for schemes that are not monotone.
  std::size_t dense_cap = 2000;
};

/// Collatz-Wielandt pair (min, max) of -(L psi)_i / psi_i.
inline std::pair<double, double> collatz_bounds(const SparseMatrix& L, const Vector& psi) {
  if (psi.size() != L.rows()) fail(ErrorCode::InconsistentInput, "vector length does not match operator");
  for (Eigen::Index i = 0; i < psi.size(); ++i)
    if (!(psi[i] > 0.0)) fail(ErrorCode::NonPositiveInput, "Collatz bounds need a strictly positive vector");
  const Vector r = -(L * psi).cwiseQuotient(psi);
  return {r.minCoeff(), r.maxCoeff()};
}

inline std::pair<double, double> collatz_bounds(const DiscreteOperator& op, const Vector& psi) {
  return collatz_bounds(op.L, psi);
}

/// Largest absolute row sum.
inline double inf_norm(const SparseMatrix& L) {
  Vector rows = Vector::Zero(L.rows());
  for (int k = 0; k < L.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(L, k); it; ++it) rows[it.row()] += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

/// Connected blocks of the symmetrised sparsity pattern; labels follow first appearance.
inline std::vector<int> connected_blocks(const SparseMatrix& L, int& count) {
  const int n = static_cast<int>(L.rows());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int k = 0; k < L.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(L, k); it; ++it)
      if (it.value() != 0.0 && it.row() != it.col()) {
        const int a = root(static_cast<int>(it.row())), b = root(static_cast<int>(it.col()));
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  std::vector<int> label(n, -1), of_root(n, -1);
  count = 0;
  for (int i = 0; i < n; ++i) {
    const int r = root(i);
    if (of_root[r] < 0) of_root[r] = count++;
    label[i] = of_root[r];
  }
  return label;
}

namespace detail {

inline SparseMatrix principal_submatrix(const SparseMatrix& L, const std::vector<int>& rows) {
  std::vector<int> map(L.rows(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) map[rows[i]] = static_cast<int>(i);
  std::vector<Triplet> t;
  for (int k = 0; k < L.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(L, k); it; ++it) {
      const int r = map[it.row()], c = map[it.col()];
      if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
    }
  SparseMatrix s(static_cast<int>(rows.size()), static_cast<int>(rows.size()));
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

inline SparseMatrix shifted(const SparseMatrix& L, double sigma) {
  SparseMatrix I(L.rows(), L.cols());
  I.setIdentity();
  SparseMatrix M = sigma * I - L;
  M.makeCompressed();
  return M;
}

struct BlockEig {
  double lambda;
  Vector psi;
  int iterations;
};

/// Shift-and-invert power iteration on an irreducible Metzler block.
///
/// The shift sits just above the upper Collatz value of the current iterate,
/// so (sigma I - L)^{-1} stays entrywise positive and the shift tightens as
/// the bracket closes. The iterate is normalised by its max entry.
inline BlockEig metzler_block(const SparseMatrix& L, double tol, int max_iter) {
  const int n = static_cast<int>(L.rows());
  if (n == 1) return {-L.coeff(0, 0), Vector::Ones(1), 0};
  const double scale = std::max(inf_norm(L), 1.0);
  double row_max = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) row_max = std::max(row_max, L.row(i).sum());
  double sigma = row_max + 1.0;

  Eigen::SparseLU<SparseMatrix> lu;
  auto factor = [&](double s) {
    lu.compute(shifted(L, s));
    if (lu.info() != Eigen::Success) fail(ErrorCode::SingularSystem, "shifted factorisation failed");
  };
  factor(sigma);

  Vector x = Vector::Ones(n);
  int it = 0;
  for (; it < max_iter; ++it) {
    Vector y = lu.solve(x);
    const double ymax = y.maxCoeff();
    if (!(ymax > 0.0) || !y.allFinite()) fail(ErrorCode::NonPositiveEigenvector, "inverse iteration lost positivity");
    y /= ymax;
    const Vector Ly = L * y;
    const double rq = y.dot(Ly) / y.squaredNorm();
    const double res = (Ly - rq * y).lpNorm<Eigen::Infinity>();
    const double change = (y - x).lpNorm<Eigen::Infinity>();
    x = y;
    if (res <= 1e-3 * tol && change <= 1e-3 * tol) break;
    if (res <= 0.25 * tol && it > 0 && change <= 1e-10) break;

    // Upper Collatz value over entries that carry information.
    double mu_hi = -std::numeric_limits<double>::infinity();
    double mu_lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (x[i] < 1e-6) continue;
      const double r = Ly[i] / x[i];
      mu_hi = std::max(mu_hi, r);
      mu_lo = std::min(mu_lo, r);
    }
    const double top = std::max(mu_hi, rq);
    const double target = top + std::max(mu_hi - mu_lo, 1e-8 * scale);
    if (target < sigma && sigma - target > 0.5 * (sigma - top)) {
      sigma = target;
      factor(sigma);
    }
  }
  if (it == max_iter) fail(ErrorCode::NotConverged, "inverse iteration hit max_iter=" + std::to_string(max_iter));
  // A last solve at the settled shift polishes the small tail entries.
  Vector y = lu.solve(x);
  y /= y.maxCoeff();
  const double rq = y.dot(L * y) / y.squaredNorm();
  return {-rq, y, it + 1};
}

}  // namespace detail

struct DenseSpectrum {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;
  /// Index of the eigenvalue with the largest real part.
  Eigen::Index top = 0;
};

inline DenseSpectrum dense_spectrum(const SparseMatrix& L, bool with_vectors = true) {
  const Eigen::MatrixXd A(L);
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, with_vectors);
  if (es.info() != Eigen::Success) fail(ErrorCode::NotConverged, "dense eigensolve failed");
  DenseSpectrum out;
  out.values = es.eigenvalues();
  if (with_vectors) out.vectors = es.eigenvectors();
  out.values.real().maxCoeff(&out.top);
  return out;
}

/// -max Re(spectrum of L), the dense oracle for the principal eigenvalue.
inline double dense_principal_lambda(const SparseMatrix& L) { return -dense_spectrum(L, false).values.real().maxCoeff(); }

/// Principal eigenpair of L (L psi = -lambda psi, psi > 0, psi(anchor) = 1).
///
/// Metzler matrices are split into connected blocks, each handled by
/// shift-and-invert iteration; the block with the smallest lambda wins and
/// psi is zero elsewhere (blocks tied within tol all keep their vectors).
/// Matrices with negative off-diagonals go to the dense solver when small.
inline EigenResult principal_eig(const SparseMatrix& L, bool metzler, std::size_t anchor, const EigenOptions& opt = {}) {
  const std::size_t n = static_cast<std::size_t>(L.rows());
  if (n == 0) fail(ErrorCode::EmptyInterior, "operator has no unknowns");
  if (!(opt.tol > 0.0)) fail(ErrorCode::InvalidParameter, "tol must be positive");
  if (anchor >= n) fail(ErrorCode::InvalidParameter, "anchor outside the unknowns");
  EigenResult res;

  if (!metzler) {
    if (n > opt.dense_cap)
      fail(ErrorCode::TooLargeForDenseCheck, "scheme is not monotone and N=" + std::to_string(n) + " exceeds the dense cap");
    const DenseSpectrum sp = dense_spectrum(L);
    res.lambda = -sp.values[sp.top].real();
    Vector v = sp.vectors.col(sp.top).real();
    if (v.sum() < 0.0) v = -v;
    res.psi = v;
    res.dense_fallback = true;
  } else {
    int count = 0;
    const std::vector<int> label = connected_blocks(L, count);
    res.components = count;
    res.reducible = count > 1;
    std::vector<std::vector<int>> members(count);
    for (std::size_t i = 0; i < n; ++i) members[label[i]].push_back(static_cast<int>(i));
    std::vector<detail::BlockEig> blocks;
    for (const auto& rows : members) {
      blocks.push_back(count == 1 ? detail::metzler_block(L, opt.tol, opt.max_iter)
                                  : detail::metzler_block(detail::principal_submatrix(L, rows), opt.tol, opt.max_iter));
      res.iterations += blocks.back().iterations;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) best = std::min(best, b.lambda);
    res.lambda = best;
    res.psi = Vector::Zero(static_cast<Eigen::Index>(n));
    for (int k = 0; k < count; ++k) {
      if (blocks[k].lambda > best + opt.tol) continue;
      for (std::size_t i = 0; i < members[k].size(); ++i) res.psi[members[k][i]] = blocks[k].psi[i];
    }
  }

  // Normalise at the anchor, or at the nearest supported unknown if the anchor block is dormant.
  std::size_t a = anchor;
  if (!(res.psi[a] > 0.0)) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (res.psi[i] > 0.0 && (best == n || (i > a ? i - a : a - i) < (best > a ? best - a : a - best))) best = i;
    if (best == n) fail(ErrorCode::NonPositiveEigenvector, "principal eigenvector has no positive entry");
    a = best;
  }
  res.anchor = a;
  res.psi /= res.psi[a];
  for (std::size_t i = 0; i < n; ++i)
    if (!(res.psi[i] >= 0.0) || (!res.reducible && !(res.psi[i] > 0.0)))
      fail(ErrorCode::NonPositiveEigenvector,
           "principal eigenvector is not positive at unknown " + std::to_string(i) + " (monotone structure broken)");
  const Vector Lpsi = L * res.psi;
  if (!res.dense_fallback && !res.reducible) res.lambda = -res.psi.dot(Lpsi) / res.psi.squaredNorm();
  res.residual = (Lpsi + res.lambda * res.psi).lpNorm<Eigen::Infinity>();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(res.psi[i] > 0.0)) continue;
    const double r = -Lpsi[i] / res.psi[i];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  res.lower = lo;
  res.upper = hi;
  if (res.residual > opt.tol)
    fail(ErrorCode::NotConverged, "eigen residual " + std::to_string(res.residual) + " above tol " + std::to_string(opt.tol));
  return res;
}

/// Default anchor: the interior node nearest the centre of the domain.
inline std::size_t default_anchor(const DiscreteOperator& op) {
  if (!op.grid) return 0;
  return op.grid->nearest_interior(op.grid->domain().center());
}

inline EigenResult principal_eig(const DiscreteOperator& op, const EigenOptions& opt = {}) {
  const std::size_t anchor = opt.anchor.value_or(default_anchor(op));
  return principal_eig(op.L, op.is_monotone_scheme, anchor, opt);
}

struct SimplicityReport {
  int geometric_multiplicity = 1;
  bool positive = true;
  /// Gap between the two largest real parts of the spectrum of L.
  double spectral_gap = 0.0;
  bool dense = true;
};

/// Multiplicity of the Perron value and the gap to the next real part.
///
/// Dense (N <= cap): eigenvalues within tol of the top one are counted and the
/// geometric multiplicity is the nullity of L - mu I. Larger problems run a
/// two-vector shift-and-invert subspace iteration for the second value.
inline SimplicityReport check_simplicity(const SparseMatrix& L, const EigenResult& eig, double tol = 1e-8,
                                         std::size_t dense_cap = 2000) {
  const Eigen::Index n = L.rows();
  SimplicityReport rep;
  rep.positive = (eig.psi.array() > 0.0).all();
  const double mu = -eig.lambda;
  const double scale = std::max(1.0, std::abs(mu));
  if (n == 1) {
    rep.spectral_gap = std::numeric_limits<double>::infinity();
    return rep;
  }
  if (static_cast<std::size_t>(n) <= dense_cap) {
    const DenseSpectrum sp = dense_spectrum(L, false);
    const double top = sp.values.real().maxCoeff();
    double second = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < sp.values.size(); ++i) {
      const double re = sp.values[i].real();
      if (std::abs(sp.values[i] - std::complex<double>(top, 0.0)) > tol * scale) second = std::max(second, re);
    }
    Eigen::MatrixXd A(L);
    A -= top * Eigen::MatrixXd::Identity(n, n);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    lu.setThreshold(std::max(tol, 1e-10));
    rep.geometric_multiplicity = static_cast<int>(n - lu.rank());
    rep.spectral_gap = top - second;
    return rep;
  }

  rep.dense = false;
  const double sigma = mu + std::max(1e-3 * scale, 1e-6);
  Eigen::SparseLU<SparseMatrix> lu(detail::shifted(L, sigma));
  if (lu.info() != Eigen::Success) fail(ErrorCode::TooLargeForDenseCheck, "deflated iteration could not factor");
  Eigen::MatrixXd Q(n, 2);
  Q.col(0) = eig.psi;
  Q.col(1) = Vector::LinSpaced(n, -1.0, 1.0);
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < 1000; ++it) {
    Eigen::MatrixXd Z(n, 2);
    Z.col(0) = lu.solve(Vector(Q.col(0)));
    Z.col(1) = lu.solve(Vector(Q.col(1)));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
    Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 2);
    const Eigen::Matrix2d H = Q.transpose() * (L * Q);
    const Eigen::Vector2cd ritz = Eigen::EigenSolver<Eigen::Matrix2d>(H, false).eigenvalues();
    const double r0 = std::max(ritz[0].real(), ritz[1].real());
    const double r1 = std::min(ritz[0].real(), ritz[1].real());
    if (std::abs(r1 - prev) <= 1e-10 * scale) {
      rep.spectral_gap = r0 - r1;
      rep.geometric_multiplicity = rep.spectral_gap <= tol * scale ? 2 : 1;
      return rep;
    }
    prev = r1;
  }
  fail(ErrorCode::TooLargeForDenseCheck, "N=" + std::to_string(n) + " above dense cap and deflated iteration stalled");
}

inline SimplicityReport check_simplicity(const DiscreteOperator& op, const EigenResult& eig, double tol = 1e-8) {
  return check_simplicity(op.L, eig, tol);
}

}  // namespace nls
