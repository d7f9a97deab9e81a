#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "nonlocal_spectra/error.hpp"

namespace nls {

struct LpFeasibility {
  bool feasible = false;
  Eigen::VectorXd x;
  /// Phase-1 objective at termination (sum of artificials).
  double infeasibility = 0.0;
  int pivots = 0;
};

// Phase-1 simplex for { x >= 0 : G x <= g } on a dense tableau.
// Bland's rule keeps it cycle-free; only meant for a few hundred unknowns.
inline LpFeasibility lp_feasible(const Eigen::MatrixXd& G, const Eigen::VectorXd& g, double tol = 1e-9) {
  const Eigen::Index m = G.rows(), n = G.cols();
  if (g.size() != m) fail(ErrorCode::InconsistentInput, "lp_feasible: G and g disagree");

  // Columns: x (n) | slack (m) | artificial (one per row with g_i < 0) | rhs.
  std::vector<Eigen::Index> art_row;
  for (Eigen::Index i = 0; i < m; ++i)
    if (g[i] < 0.0) art_row.push_back(i);
  const Eigen::Index na = static_cast<Eigen::Index>(art_row.size());
  const Eigen::Index cols = n + m + na;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, cols + 1);
  std::vector<Eigen::Index> basis(m);
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());

  Eigen::Index a = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (g[i] >= 0.0) {
      T.row(i).head(n) = G.row(i);
      T(i, n + i) = 1.0;
      T(i, cols) = g[i];
      basis[i] = n + i;
    } else {
      T.row(i).head(n) = -G.row(i);
      T(i, n + i) = -1.0;
      T(i, n + m + a) = 1.0;
      T(i, cols) = -g[i];
      basis[i] = n + m + a;
      ++a;
    }
  }
  // Objective row: reduced gains of minimising the artificial sum.
  for (Eigen::Index k = 0; k < na; ++k) T.row(m) += T.row(art_row[k]);
  for (Eigen::Index k = 0; k < na; ++k) T(m, n + m + k) = 0.0;

  LpFeasibility out;
  const int max_pivots = static_cast<int>(50 * (m + n) + 100);
  while (T(m, cols) > tol * scale) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n + m; ++j)
      if (T(m, j) > 1e-12) {
        enter = j;
        break;
      }
    if (enter < 0) break;
    Eigen::Index leave = -1;
    double best = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (T(i, enter) <= 1e-12) continue;
      const double ratio = T(i, cols) / T(i, enter);
      if (leave < 0 || ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && basis[i] < basis[leave])) {
        leave = i;
        best = ratio;
      }
    }
    if (leave < 0) break;  // cannot happen in phase 1: objective is bounded below
    T.row(leave) /= T(leave, enter);
    for (Eigen::Index i = 0; i <= m; ++i)
      if (i != leave && T(i, enter) != 0.0) T.row(i) -= T(i, enter) * T.row(leave);
    basis[leave] = enter;
    if (++out.pivots > max_pivots) fail(ErrorCode::NotConverged, "phase-1 simplex exceeded its pivot budget");
  }
  out.infeasibility = std::max(0.0, T(m, cols));
  out.feasible = out.infeasibility <= tol * scale;
  out.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i)
    if (basis[i] < n) out.x[basis[i]] = T(i, cols);
  return out;
}

}  // namespace nls
