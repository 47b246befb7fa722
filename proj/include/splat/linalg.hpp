#pragma once

#include <array>
#include <cmath>
#include <cstddef>

// Small fixed-size vector/matrix types. Everything the engine needs is
// 2x2 / 3x3 / quaternion sized, so a hand-rolled header keeps the math
// transparent for the analytic gradient code.

namespace splat {

struct Vec2 {
    double x = 0, y = 0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double squared_norm() const { return dot(*this); }
    double norm() const { return std::sqrt(squared_norm()); }
    Vec3 normalized() const { return *this / norm(); }
    Vec3 cwise_mul(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

struct Vec4 {
    double w = 0, x = 0, y = 0, z = 0;

    Vec4() = default;
    Vec4(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

    double& operator[](int i) {
        switch (i) { case 0: return w; case 1: return x; case 2: return y; default: return z; }
    }
    double operator[](int i) const {
        switch (i) { case 0: return w; case 1: return x; case 2: return y; default: return z; }
    }

    Vec4 operator+(const Vec4& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
    Vec4 operator*(double s) const { return {w * s, x * s, y * s, z * s}; }
    Vec4& operator+=(const Vec4& o) { w += o.w; x += o.x; y += o.y; z += o.z; return *this; }
    double dot(const Vec4& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
};

// 2x2 matrix, row major.
struct Mat2 {
    std::array<double, 4> m{0, 0, 0, 0};

    Mat2() = default;
    Mat2(double a, double b, double c, double d) : m{a, b, c, d} {}
    static Mat2 identity() { return {1, 0, 0, 1}; }

    double& operator()(int r, int c) { return m[r * 2 + c]; }
    double operator()(int r, int c) const { return m[r * 2 + c]; }

    Mat2 operator+(const Mat2& o) const {
        return {m[0] + o.m[0], m[1] + o.m[1], m[2] + o.m[2], m[3] + o.m[3]};
    }
    Mat2 operator*(double s) const { return {m[0] * s, m[1] * s, m[2] * s, m[3] * s}; }
    Vec2 operator*(const Vec2& v) const {
        return {m[0] * v.x + m[1] * v.y, m[2] * v.x + m[3] * v.y};
    }
    Mat2 operator*(const Mat2& o) const {
        return {m[0] * o.m[0] + m[1] * o.m[2], m[0] * o.m[1] + m[1] * o.m[3],
                m[2] * o.m[0] + m[3] * o.m[2], m[2] * o.m[1] + m[3] * o.m[3]};
    }
    Mat2 transpose() const { return {m[0], m[2], m[1], m[3]}; }
    double det() const { return m[0] * m[3] - m[1] * m[2]; }
    Mat2 inverse() const {
        const double d = det();
        return {m[3] / d, -m[1] / d, -m[2] / d, m[0] / d};
    }
    double trace() const { return m[0] + m[3]; }
};

// 3x3 matrix, row major.
struct Mat3 {
    std::array<double, 9> m{0, 0, 0, 0, 0, 0, 0, 0, 0};

    Mat3() = default;
    Mat3(double a, double b, double c, double d, double e, double f, double g, double h, double i)
        : m{a, b, c, d, e, f, g, h, i} {}
    static Mat3 identity() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }
    static Mat3 diagonal(const Vec3& d) { return {d.x, 0, 0, 0, d.y, 0, 0, 0, d.z}; }

    double& operator()(int r, int c) { return m[r * 3 + c]; }
    double operator()(int r, int c) const { return m[r * 3 + c]; }

    Vec3 row(int r) const { return {m[r * 3], m[r * 3 + 1], m[r * 3 + 2]}; }
    Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }

    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
        return r;
    }
    Mat3 operator-(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
        return r;
    }
    Mat3 operator*(double s) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
        return r;
    }
    Vec3 operator*(const Vec3& v) const {
        return {row(0).dot(v), row(1).dot(v), row(2).dot(v)};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r(i, j) = m[i * 3] * o(0, j) + m[i * 3 + 1] * o(1, j) + m[i * 3 + 2] * o(2, j);
        return r;
    }
    Mat3 transpose() const {
        return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
    }
    double max_abs() const {
        double v = 0;
        for (double e : m) v = std::max(v, std::abs(e));
        return v;
    }
};

// Unit quaternion convention: (w, x, y, z), w scalar part.
struct Quat {
    double w = 1, x = 0, y = 0, z = 0;

    Quat() = default;
    Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}
    static Quat identity() { return {1, 0, 0, 0}; }
    static Quat from_axis_angle(const Vec3& axis, double angle_rad) {
        const Vec3 a = axis.normalized();
        const double h = angle_rad * 0.5;
        const double s = std::sin(h);
        return {std::cos(h), a.x * s, a.y * s, a.z * s};
    }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quat normalized() const {
        const double n = norm();
        return {w / n, x / n, y / n, z / n};
    }

    // Rotation matrix of the normalized quaternion.
    Mat3 to_matrix() const {
        const Quat q = normalized();
        const double xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
        const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
        const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
        return {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
                2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
                2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
    }
};

// Eigenvalues of a symmetric 2x2 matrix, descending.
inline Vec2 symmetric_eigenvalues(const Mat2& s) {
    const double mid = 0.5 * (s(0, 0) + s(1, 1));
    const double d = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
    const double disc = std::sqrt(std::max(0.0, mid * mid - d));
    return {mid + disc, mid - disc};
}

inline bool all_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}
inline bool all_finite(const Vec4& v) {
    return std::isfinite(v.w) && std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}
inline bool all_finite(const Quat& q) {
    return std::isfinite(q.w) && std::isfinite(q.x) && std::isfinite(q.y) && std::isfinite(q.z);
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace splat
