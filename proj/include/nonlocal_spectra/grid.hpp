#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "nonlocal_spectra/error.hpp"
#include "nonlocal_spectra/geometry.hpp"

namespace nls {

enum class NodeKind { Interior, ExteriorHalo };

struct Node {
  Point x;
  NodeKind kind;
  std::array<long, 2> lattice;  // x = lattice * h
};

/// Uniform lattice h*Z^d restricted to D plus an exterior halo.
///
/// Nodes are stored in lexicographic coordinate order. Interior nodes carry
/// an unknown index 0..N-1 (in node order); halo nodes carry an exterior
/// index 0..M-1. The lattice is anchored at the origin so that nested balls
/// centered at 0 share their nodes.
class SpatialGrid {
 public:
  int dim() const { return dim_; }
  double h() const { return h_; }
  const Domain& domain() const { return domain_; }
  /// Radius (beyond D) up to which exterior nodes are stored.
  double halo_radius() const { return halo_; }
  /// Distance beyond `halo_radius()` covered for stencils and snapping.
  double stored_halo() const { return stored_halo_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_interior() const { return interior_.size(); }
  std::size_t num_exterior() const { return exterior_.size(); }

  /// Node id of unknown p.
  std::size_t interior_node(std::size_t p) const { return interior_[p]; }
  /// Node id of exterior column e.
  std::size_t exterior_node(std::size_t e) const { return exterior_[e]; }
  const Point& interior_point(std::size_t p) const { return nodes_[interior_[p]].x; }
  const Point& exterior_point(std::size_t e) const { return nodes_[exterior_[e]].x; }

  /// Unknown index of a node, or -1 for halo nodes.
  long unknown_of(std::size_t node) const { return slot_[node].first; }
  /// Exterior index of a node, or -1 for interior nodes.
  long exterior_of(std::size_t node) const { return slot_[node].second; }

  /// Node id at integer lattice coordinates, if stored.
  std::optional<std::size_t> find(long i, long j = 0) const {
    auto it = index_.find(key(i, j));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Interior unknown closest to `target` (ties resolved to the lowest index).
  std::size_t nearest_interior(const Point& target) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < interior_.size(); ++p) {
      const double d = (interior_point(p) - target).squaredNorm();
      if (d < best_d - 1e-12 * h_ * h_) {
        best_d = d;
        best = p;
      }
    }
    return best;
  }

  friend SpatialGrid build_grid(const Domain& domain, double h, double halo_radius, double required_reach);

 private:
  static std::int64_t key(long i, long j) {
    return (static_cast<std::int64_t>(i) << 32) ^ static_cast<std::int64_t>(static_cast<std::uint32_t>(j));
  }

  int dim_ = 1;
  double h_ = 0.0;
  double halo_ = 0.0;
  double stored_halo_ = 0.0;
  Domain domain_ = Domain::ball(1, 1.0);
  std::vector<Node> nodes_;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> exterior_;
  std::vector<std::pair<long, long>> slot_;
  std::unordered_map<std::int64_t, std::size_t> index_;
};

/// Membership tolerance used for lattice points that sit on the boundary.
inline double boundary_tolerance(double h) { return 1e-9 * h; }

/// Builds the lattice covering D and its halo.
///
/// `required_reach` is the largest jump length the caller will assemble; the
/// halo must be at least that wide. Exterior nodes are stored out to
/// halo_radius + sqrt(d) h so that local stencils and multilinear snapping of
/// off-lattice jump targets never leave the stored lattice.
inline SpatialGrid build_grid(const Domain& domain, double h, double halo_radius, double required_reach = 0.0) {
  if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorCode::InvalidSpacing, "grid spacing must be positive and finite");
  if (!domain.bounded()) fail(ErrorCode::InvalidParameter, "cannot build a grid on an unbounded domain");
  if (!(halo_radius >= 0.0) || halo_radius + 1e-12 < required_reach)
    fail(ErrorCode::HaloTooSmall, "halo radius " + std::to_string(halo_radius) + " below required reach " +
                                      std::to_string(required_reach));

  SpatialGrid g;
  g.dim_ = domain.dim();
  g.h_ = h;
  g.halo_ = halo_radius;
  g.stored_halo_ = halo_radius + std::sqrt(static_cast<double>(g.dim_)) * h;
  g.domain_ = domain;

  const double tol = boundary_tolerance(h);
  const auto [lo, hi] = domain.bounding_box();
  const double pad = g.stored_halo_ + h;
  const long i0 = static_cast<long>(std::floor((lo[0] - pad) / h));
  const long i1 = static_cast<long>(std::ceil((hi[0] + pad) / h));
  long j0 = 0, j1 = 0;
  if (g.dim_ == 2) {
    j0 = static_cast<long>(std::floor((lo[1] - pad) / h));
    j1 = static_cast<long>(std::ceil((hi[1] + pad) / h));
  }

  for (long i = i0; i <= i1; ++i) {
    for (long j = j0; j <= j1; ++j) {
      const Point p(static_cast<double>(i) * h, static_cast<double>(j) * h);
      NodeKind kind;
      if (domain.contains(p, tol))
        kind = NodeKind::Interior;
      else if (domain.distance(p) <= g.stored_halo_ + tol)
        kind = NodeKind::ExteriorHalo;
      else
        continue;
      const std::size_t id = g.nodes_.size();
      g.nodes_.push_back(Node{p, kind, {i, j}});
      g.index_.emplace(SpatialGrid::key(i, j), id);
      if (kind == NodeKind::Interior) {
        g.slot_.emplace_back(static_cast<long>(g.interior_.size()), -1);
        g.interior_.push_back(id);
      } else {
        g.slot_.emplace_back(-1, static_cast<long>(g.exterior_.size()));
        g.exterior_.push_back(id);
      }
    }
  }
  if (g.interior_.empty()) fail(ErrorCode::EmptyInterior, "no lattice point inside " + domain.describe());
  return g;
}

}  // namespace nls
