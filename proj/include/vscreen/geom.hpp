#pragma once

#include <cmath>

namespace vscreen {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

  [[nodiscard]] double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  [[nodiscard]] Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  [[nodiscard]] double norm2() const { return dot(*this); }
  [[nodiscard]] double norm() const { return std::sqrt(norm2()); }
  [[nodiscard]] Vec3 normalized() const {
    double n = norm();
    return n > 0.0 ? *this / n : Vec3{};
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// Unit quaternion (w, x, y, z); rotation of v uses the unit-normalized value.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  [[nodiscard]] double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  [[nodiscard]] Quat normalized() const {
    double n = norm();
    return {w / n, x / n, y / n, z / n};
  }
  [[nodiscard]] Vec3 rotate(const Vec3& v) const {
    // v + 2w(u x v) + 2 u x (u x v), u = (x, y, z)
    Vec3 u{x, y, z};
    Vec3 uv = u.cross(v);
    return v + 2.0 * w * uv + 2.0 * u.cross(uv);
  }
  // Rotation about an arbitrary unit axis.
  static Quat from_axis_angle(const Vec3& axis, double angle) {
    double h = 0.5 * angle;
    double s = std::sin(h);
    return {std::cos(h), axis.x * s, axis.y * s, axis.z * s};
  }
};

}  // namespace vscreen
