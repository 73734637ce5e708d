#pragma once

#include <cmath>

namespace earcanal {

struct Vec3 {
    double x{0.0};
    double y{0.0};
    double z{0.0};

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

inline bool is_finite(const Vec3& a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// A point in a slice plane, millimetres.
struct Point2 {
    double x{0.0};
    double y{0.0};

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(const Point2& a, const Point2& b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(const Point2& a, const Point2& b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, const Point2& a) { return {s * a.x, s * a.y}; }

inline double norm(const Point2& a) { return std::hypot(a.x, a.y); }

/// Counter-clockwise rotation by `theta` radians.
inline Point2 rotate(const Point2& p, double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

}  // namespace earcanal
