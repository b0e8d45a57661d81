#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace shstab {

using Vector = Eigen::VectorXd;

/// Closed interval [lo, hi] used for enclosures of gradients over boxes.
/// Arithmetic is plain floating point, without outward rounding.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double v) : lo(v), hi(v) {}  // NOLINT(google-explicit-constructor)
  Interval(double l, double h) : lo(l), hi(h) {}

  double width() const { return hi - lo; }
  double magnitude() const { return std::max(std::abs(lo), std::abs(hi)); }
  bool contains(double v) const { return lo <= v && v <= hi; }
};

inline Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }
inline Interval operator-(Interval a, Interval b) { return {a.lo - b.hi, a.hi - b.lo}; }
inline Interval operator-(Interval a) { return {-a.hi, -a.lo}; }
inline Interval operator*(Interval a, Interval b) {
  const double p[] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
}
inline Interval hull(Interval a, Interval b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}
inline Interval intersect(Interval a, Interval b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}
inline Interval abs(Interval a) {
  if (a.lo >= 0.0) return a;
  if (a.hi <= 0.0) return -a;
  return {0.0, std::max(-a.lo, a.hi)};
}
/// Division by an interval bounded away from zero.
inline Interval divide(Interval a, Interval b) {
  if (b.lo <= 0.0 && b.hi >= 0.0) {
    throw std::domain_error("interval division by an interval containing zero");
  }
  return a * Interval{1.0 / b.hi, 1.0 / b.lo};
}

using IntervalVector = std::vector<Interval>;

/// Axis-aligned box in R^n.
struct Box {
  Vector lo;
  Vector hi;

  Box() = default;
  Box(Vector l, Vector h) : lo(std::move(l)), hi(std::move(h)) {}

  Eigen::Index dim() const { return lo.size(); }
  Vector center() const { return 0.5 * (lo + hi); }
  Vector half_widths() const { return 0.5 * (hi - lo); }
  Interval axis(Eigen::Index i) const { return {lo[i], hi[i]}; }
  bool contains(const Vector& x) const {
    return ((x - lo).array() >= 0.0).all() && ((hi - x).array() >= 0.0).all();
  }
};

/// Smallest box containing both endpoints of a segment.
inline Box segment_box(const Vector& a, const Vector& b) {
  return {a.cwiseMin(b), a.cwiseMax(b)};
}

/// Closed Euclidean ball.
struct Ball {
  Vector center;
  double radius = 0.0;
};

}  // namespace shstab
