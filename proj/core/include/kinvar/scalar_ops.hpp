#pragma once

// Overload set that lets numeric kernels be written once and instantiated for
// plain double (fast evaluation) and ad::Value (tape recording).  Both
// instantiations execute operations in the same order, so values agree bit
// for bit -- a property the tests pin down.

#include <cmath>

#include "kinvar/math.hpp"
#include "kinvar/tape.hpp"

namespace kinvar {

// ---- double overloads mirroring the Value operations ----

inline double lin1s(double x, double a, double b) { return a * x + b; }
inline double lin2s(double x, double y, double a, double b, double c) { return a * x + b * y + c; }
inline double dot3s(double x0, double x1, double x2, double y0, double y1, double y2) {
    return x0 * y0 + x1 * y1 + x2 * y2;
}
// ca*a + cb*b + cc*c
inline double lincomb3(double a, double b, double c, double ca, double cb, double cc) {
    return ca * a + cb * b + cc * c;
}
inline double relu(double x) { return x > 0 ? x : 0.0; }
inline double square(double x) { return x * x; }
// kinvar::softplus(double) already lives in math.hpp

inline double value_of(double x) { return x; }
inline double value_of(ad::Value x) { return x.v(); }

// ---- Value counterparts ----

inline ad::Value lin1s(ad::Value x, double a, double b) {
    return {x.tape, x.tape->lin1(x.id, a, b)};
}
inline ad::Value lin2s(ad::Value x, ad::Value y, double a, double b, double c) {
    return {x.tape, x.tape->lin2(x.id, y.id, a, b, c)};
}
inline ad::Value dot3s(ad::Value x0, ad::Value x1, ad::Value x2,
                       ad::Value y0, ad::Value y1, ad::Value y2) {
    const ad::Tape::id_t xs[3] = {x0.id, x1.id, x2.id};
    const ad::Tape::id_t ys[3] = {y0.id, y1.id, y2.id};
    return {x0.tape, x0.tape->dot3(xs, ys)};
}
inline ad::Value lincomb3(ad::Value a, ad::Value b, ad::Value c, double ca, double cb, double cc) {
    // ((ca*a + cb*b) + cc*c), same association as the double overload
    ad::Value t = lin2s(a, b, ca, cb, 0.0);
    return lin2s(t, c, 1.0, cc, 0.0);
}

// ---- generic 3-vector / 3x3 matrix over a scalar type ----

template <class S>
struct V3 {
    S x, y, z;
};

template <class S>
struct M3 {
    S m[9]; // row-major
};

template <class S>
V3<S> mat_vec(const M3<S>& R, const V3<S>& v) {
    return {dot3s(R.m[0], R.m[1], R.m[2], v.x, v.y, v.z),
            dot3s(R.m[3], R.m[4], R.m[5], v.x, v.y, v.z),
            dot3s(R.m[6], R.m[7], R.m[8], v.x, v.y, v.z)};
}

template <class S>
M3<S> mat_mul(const M3<S>& A, const M3<S>& B) {
    M3<S> r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.m[3 * i + j] = dot3s(A.m[3 * i], A.m[3 * i + 1], A.m[3 * i + 2],
                                   B.m[j], B.m[3 + j], B.m[6 + j]);
    return r;
}

// A (generic) * B (constant doubles)
template <class S>
M3<S> mat_mul_const(const M3<S>& A, const Mat3& B) {
    M3<S> r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.m[3 * i + j] = lincomb3(A.m[3 * i], A.m[3 * i + 1], A.m[3 * i + 2],
                                      B.m[j], B.m[3 + j], B.m[6 + j]);
    return r;
}

// R (constant doubles) applied to generic vector, plus constant offset t
template <class S>
V3<S> const_mat_vec_add(const Mat3& R, const V3<S>& v, const Vec3& t) {
    V3<S> r;
    r.x = lin2s(lin2s(v.x, v.y, R.m[0], R.m[1], 0.0), v.z, 1.0, R.m[2], t.x);
    r.y = lin2s(lin2s(v.x, v.y, R.m[3], R.m[4], 0.0), v.z, 1.0, R.m[5], t.y);
    r.z = lin2s(lin2s(v.x, v.y, R.m[6], R.m[7], 0.0), v.z, 1.0, R.m[8], t.z);
    return r;
}

} // namespace kinvar
