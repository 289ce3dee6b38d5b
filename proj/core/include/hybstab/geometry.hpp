#pragma once

#include <cmath>
#include <string>

#include "hybstab/errors.hpp"

namespace hybstab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }

  double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
/// Rotate by +90 degrees.
inline Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }
inline Vec2 normalized(const Vec2& v) {
  const double n = v.norm();
  if (n == 0.0) throw NumericError("cannot normalize zero vector");
  return v / n;
}

struct Mat2 {
  // row-major: [a b; c d]
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  Vec2 apply(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  Mat2 inverse() const {
    const double dt = det();
    if (dt == 0.0) throw NumericError("singular 2x2 matrix");
    return {d / dt, -b / dt, -c / dt, a / dt};
  }
};

/// A transversal segment: points base + s * direction for s in [0, length].
struct SectionDef {
  Vec2 base;
  Vec2 direction;  // unit vector
  double length = 1.0;

  Vec2 at(double s) const { return base + s * direction; }
  /// Crossing orientation normal: sign of <velocity, normal()> at a hit.
  Vec2 normal() const { return {direction.y, -direction.x}; }
  /// Signed distance of q to the section's supporting line.
  double signed_distance(const Vec2& q) const { return dot(q - base, normal()); }
  /// Parameter of the projection of q onto the line.
  double parameter_of(const Vec2& q) const { return dot(q - base, direction); }
};

inline SectionDef make_section(Vec2 base, Vec2 direction, double length) {
  if (length <= 0.0) throw SchemaError("section length must be positive, got " + std::to_string(length));
  return SectionDef{base, normalized(direction), length};
}

}  // namespace hybstab
