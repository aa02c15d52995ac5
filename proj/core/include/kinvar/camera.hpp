#pragma once

// Calibrated pinhole camera with Brown-Conrady distortion.
// World -> camera: X_c = R(rvec) * X_w + tvec; points with z <= 1e-6 are
// flagged as behind the camera and produce no pixel.

#include <span>
#include <string>
#include <vector>

#include "kinvar/math.hpp"
#include "kinvar/scalar_ops.hpp"

namespace kinvar::cam {

inline constexpr double kMinDepth = 1e-6;

struct Camera {
    std::string name;
    double fx = 1000, fy = 1000, cx = 0, cy = 0;
    double k1 = 0, k2 = 0, k3 = 0, p1 = 0, p2 = 0;
    Vec3 rvec;  // axis-angle, |rvec| < pi (canonical)
    Vec3 tvec;
    int width = 0, height = 0; // 0 = unspecified
};

struct Rig {
    std::vector<Camera> cameras;
    std::vector<bool> refine; // per-camera: extrinsics adjustable during fits

    void validate() const; // throws ParseError
};

Rig load_rig(const std::string& path);
Rig rig_from_json_text(const std::string& text);
std::string rig_to_json_text(const Rig& r);
void save_rig(const Rig& r, const std::string& path);

// ---- projection ----

template <class S>
struct Pixel {
    S u, v;
    bool behind = false; // if set, u/v are meaningless
};

// distortion + intrinsics applied to a camera-frame point
template <class S>
Pixel<S> project_camera_point(const Camera& c, const V3<S>& xc);

// double path convenience: world point through the stored extrinsics
Pixel<double> project(const Camera& c, const Vec3& xw);

// world->camera rotation with an extrinsic correction delta (axis-angle,
// applied on the left: R = R(delta) * R(rvec)); series-safe near zero.
template <class S>
M3<S> delta_rotation(const V3<S>& delta);

// camera with delta folded into canonical rvec/tvec (t' = R(delta)*t)
Camera compose_delta(const Camera& c, const Vec3& delta);

extern template Pixel<double> project_camera_point<double>(const Camera&, const V3<double>&);
extern template Pixel<ad::Value> project_camera_point<ad::Value>(const Camera&, const V3<ad::Value>&);
extern template M3<ad::Value> delta_rotation<ad::Value>(const V3<ad::Value>&);
extern template M3<double> delta_rotation<double>(const V3<double>&);

} // namespace kinvar::cam
