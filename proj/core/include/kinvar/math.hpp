#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "kinvar/errors.hpp"

namespace kinvar {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kLn2PiE = 2.83787706640934548356065947281123527; // ln(2*pi*e)

// ---- small fixed-size linear algebra (plain doubles; the tape path has its
// ---- own fused recording helpers) ----

struct Vec2 {
    double x = 0, y = 0;
};

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// row-major 3x3
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return Mat3{}; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r.m[3 * i + j] = m[3 * i] * o.m[j] + m[3 * i + 1] * o.m[3 + j] + m[3 * i + 2] * o.m[6 + j];
        return r;
    }
    Mat3 transposed() const {
        return Mat3{{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
    }
};

// axis-angle (rotation vector) -> rotation matrix, series-safe near zero
inline Mat3 rodrigues(const Vec3& r) {
    const double th2 = dot(r, r);
    const double th = std::sqrt(th2);
    double a, b; // sin(th)/th, (1-cos(th))/th^2
    if (th < 1e-8) {
        a = 1.0 - th2 / 6.0;
        b = 0.5 - th2 / 24.0;
    } else {
        a = std::sin(th) / th;
        b = (1.0 - std::cos(th)) / th2;
    }
    const double x = r.x, y = r.y, z = r.z;
    Mat3 R;
    R.m = {1 - b * (y * y + z * z), b * x * y - a * z,     b * x * z + a * y,
           b * x * y + a * z,       1 - b * (x * x + z * z), b * y * z - a * x,
           b * x * z - a * y,       b * y * z + a * x,     1 - b * (x * x + y * y)};
    return R;
}

// rotation matrix -> canonical axis-angle with magnitude in [0, pi]
inline Vec3 rotation_log(const Mat3& R) {
    const double tr = R.m[0] + R.m[4] + R.m[8];
    const double c = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
    const double th = std::acos(c);
    if (th < 1e-10) return {0, 0, 0};
    if (th > kPi - 1e-6) {
        // near pi: axis from the symmetric part
        const double xx = std::sqrt(std::max(0.0, (R.m[0] + 1.0) * 0.5));
        const double yy = std::sqrt(std::max(0.0, (R.m[4] + 1.0) * 0.5));
        const double zz = std::sqrt(std::max(0.0, (R.m[8] + 1.0) * 0.5));
        Vec3 ax{xx, yy, zz};
        // fix signs from the off-diagonal sums
        if (R.m[1] + R.m[3] < 0) ax.y = -ax.y;
        if (R.m[2] + R.m[6] < 0) ax.z = -ax.z;
        if (ax.y * (R.m[1] + R.m[3]) < 0 || ax.z * (R.m[2] + R.m[6]) < 0) ax.x = -ax.x;
        const double n = norm(ax);
        return ax * (th / (n > 0 ? n : 1.0));
    }
    const double s = 0.5 / std::sin(th);
    return Vec3{(R.m[7] - R.m[5]) * s, (R.m[2] - R.m[6]) * s, (R.m[3] - R.m[1]) * s} * th;
}

// ---- scalar helpers ----

inline double softplus(double x) {
    // overflow-safe: for large x, softplus(x) ~ x
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double sq(double x) { return x * x; }

// ---- dense helpers for small matrices (row-major std::vector) ----

// in-place Cholesky of an n x n SPD matrix; returns log-determinant.
// throws NumericError if a pivot is non-positive.
inline double cholesky_logdet(std::vector<double>& A, std::size_t n) {
    double logdet = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double d = A[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= A[j * n + k] * A[j * n + k];
        if (!(d > 0.0) || !std::isfinite(d))
            throw NumericError("cholesky", j, "cholesky_logdet");
        const double l = std::sqrt(d);
        A[j * n + j] = l;
        logdet += 2.0 * std::log(l);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = A[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= A[i * n + k] * A[j * n + k];
            A[i * n + j] = s / l;
        }
    }
    return logdet;
}

// ---- order statistics ----

// quantile with linear interpolation at rank (n-1)*q, q in [0,1]
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw Error("quantile of empty sample");
    std::sort(v.begin(), v.end());
    if (q <= 0) return v.front();
    if (q >= 1) return v.back();
    const double pos = (static_cast<double>(v.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline double mean(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// geometric median of 3-D points (Weiszfeld with coordinate-median start and
// singularity guard).  tol on the step norm.  On non-convergence the
// coordinate-wise median is returned and *converged (if given) is cleared.
inline Vec3 geometric_median(std::span<const Vec3> pts, double tol = 1e-9, int max_iter = 200,
                             bool* converged = nullptr) {
    if (converged) *converged = true;
    if (pts.empty()) throw Error("geometric median of empty set");
    if (pts.size() == 1) return pts[0];
    std::vector<double> xs(pts.size()), ys(pts.size()), zs(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        xs[i] = pts[i].x;
        ys[i] = pts[i].y;
        zs[i] = pts[i].z;
    }
    const Vec3 start{median(xs), median(ys), median(zs)};
    Vec3 m = start;
    for (int it = 0; it < max_iter; ++it) {
        double wsum = 0;
        Vec3 acc{0, 0, 0};
        for (const auto& p : pts) {
            const double d = norm(p - m);
            if (d < 1e-12) continue; // iterate sits on a sample; skip its pull
            const double w = 1.0 / d;
            acc = acc + p * w;
            wsum += w;
        }
        if (wsum <= 0) return m; // all points coincide with m
        const Vec3 next = acc * (1.0 / wsum);
        const double step = norm(next - m);
        m = next;
        if (step < tol) return m;
    }
    if (converged) *converged = false;
    return start;
}

} // namespace kinvar
