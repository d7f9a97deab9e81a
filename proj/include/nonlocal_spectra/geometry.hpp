#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nonlocal_spectra/error.hpp"

namespace nls {

/// Position in R^d, d in {1,2}. In 1D the second component is zero.
using Point = Eigen::Vector2d;

inline double norm(const Point& p, int dim) { return dim == 1 ? std::abs(p[0]) : p.norm(); }

/// Open subsets of R^1 / R^2 used as Dirichlet domains.
///
/// `Annulus` in 1D is the pair of intervals (-outer,-inner) U (inner,outer),
/// which is what B_n minus the closed ball B_r looks like on the line.
class Domain {
 public:
  enum class Kind { Interval, Ball, Box, Annulus, Whole };

  static Domain interval(double left, double right) {
    if (!(left < right)) fail(ErrorCode::InvalidParameter, "interval requires left < right");
    Domain d(Kind::Interval, 1);
    d.lo_ = Point(left, 0.0);
    d.hi_ = Point(right, 0.0);
    return d;
  }

  static Domain ball(int dim, double radius, Point center = Point::Zero()) {
    check_dim(dim);
    if (!(radius > 0.0)) fail(ErrorCode::InvalidParameter, "ball radius must be positive");
    Domain d(Kind::Ball, dim);
    d.center_ = center;
    d.outer_ = radius;
    if (dim == 1) d.center_[1] = 0.0;
    return d;
  }

  static Domain box(Point lo, Point hi) {
    if (!(lo[0] < hi[0] && lo[1] < hi[1])) fail(ErrorCode::InvalidParameter, "box requires lo < hi");
    Domain d(Kind::Box, 2);
    d.lo_ = lo;
    d.hi_ = hi;
    return d;
  }

  /// inner < |x - center| < outer
  static Domain annulus(int dim, double inner, double outer, Point center = Point::Zero()) {
    check_dim(dim);
    if (!(inner >= 0.0 && inner < outer)) fail(ErrorCode::InvalidParameter, "annulus requires 0 <= inner < outer");
    Domain d(Kind::Annulus, dim);
    d.center_ = center;
    d.inner_ = inner;
    d.outer_ = outer;
    if (dim == 1) d.center_[1] = 0.0;
    return d;
  }

  /// Unbounded domain; only meaningful for path simulation (no killing).
  static Domain whole(int dim) {
    check_dim(dim);
    return Domain(Kind::Whole, dim);
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool bounded() const { return kind_ != Kind::Whole; }
  double inner_radius() const { return inner_; }
  double outer_radius() const { return outer_; }

  /// Strict membership; points within `tol` of the boundary count as outside.
  bool contains(const Point& p, double tol = 0.0) const {
    switch (kind_) {
      case Kind::Interval: return p[0] > lo_[0] + tol && p[0] < hi_[0] - tol;
      case Kind::Ball: return radius_from_center(p) < outer_ - tol;
      case Kind::Box:
        return p[0] > lo_[0] + tol && p[0] < hi_[0] - tol && p[1] > lo_[1] + tol && p[1] < hi_[1] - tol;
      case Kind::Annulus: {
        const double r = radius_from_center(p);
        return r > inner_ + tol && r < outer_ - tol;
      }
      case Kind::Whole: return true;
    }
    return false;
  }

  /// Euclidean distance from p to the domain (zero inside or on the boundary).
  double distance(const Point& p) const {
    switch (kind_) {
      case Kind::Interval: return std::max({lo_[0] - p[0], p[0] - hi_[0], 0.0});
      case Kind::Ball: return std::max(radius_from_center(p) - outer_, 0.0);
      case Kind::Box: {
        const double dx = std::max({lo_[0] - p[0], p[0] - hi_[0], 0.0});
        const double dy = std::max({lo_[1] - p[1], p[1] - hi_[1], 0.0});
        return std::hypot(dx, dy);
      }
      case Kind::Annulus: {
        const double r = radius_from_center(p);
        if (r <= inner_) return inner_ - r;
        if (r >= outer_) return r - outer_;
        return 0.0;
      }
      case Kind::Whole: return 0.0;
    }
    return 0.0;
  }

  /// Axis-aligned bounding box [lo, hi] of the closure.
  std::pair<Point, Point> bounding_box() const {
    switch (kind_) {
      case Kind::Interval:
      case Kind::Box: return {lo_, hi_};
      case Kind::Ball:
      case Kind::Annulus: {
        Point lo = center_ - Point::Constant(outer_);
        Point hi = center_ + Point::Constant(outer_);
        if (dim_ == 1) lo[1] = hi[1] = 0.0;
        return {lo, hi};
      }
      case Kind::Whole: {
        const double inf = std::numeric_limits<double>::infinity();
        return {Point(-inf, -inf), Point(inf, inf)};
      }
    }
    return {};
  }

  Point center() const {
    switch (kind_) {
      case Kind::Interval:
      case Kind::Box: return 0.5 * (lo_ + hi_);
      default: return center_;
    }
  }

  std::string describe() const {
    auto num = [](double v) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    switch (kind_) {
      case Kind::Interval: return "interval(" + num(lo_[0]) + "," + num(hi_[0]) + ")";
      case Kind::Ball: return "ball(d=" + std::to_string(dim_) + ",R=" + num(outer_) + ")";
      case Kind::Box:
        return "box(" + num(lo_[0]) + "," + num(hi_[0]) + ")x(" + num(lo_[1]) + "," + num(hi_[1]) + ")";
      case Kind::Annulus:
        return "annulus(d=" + std::to_string(dim_) + "," + num(inner_) + "," + num(outer_) + ")";
      case Kind::Whole: return "whole(d=" + std::to_string(dim_) + ")";
    }
    return "?";
  }

 private:
  Domain(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  static void check_dim(int dim) {
    if (dim != 1 && dim != 2) fail(ErrorCode::InvalidParameter, "dimension must be 1 or 2");
  }

  double radius_from_center(const Point& p) const {
    return dim_ == 1 ? std::abs(p[0] - center_[0]) : (p - center_).norm();
  }

  Kind kind_;
  int dim_;
  Point lo_ = Point::Zero();
  Point hi_ = Point::Zero();
  Point center_ = Point::Zero();
  double inner_ = 0.0;
  double outer_ = 0.0;
};

}  // namespace nls
