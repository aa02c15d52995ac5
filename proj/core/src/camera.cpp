#include "kinvar/camera.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace kinvar::cam {

using nlohmann::json;

void Rig::validate() const {
    if (cameras.empty()) throw ParseError("rig has no cameras");
    if (!refine.empty() && refine.size() != cameras.size())
        throw ParseError("rig refine mask length mismatch");
    for (const Camera& c : cameras) {
        if (!(c.fx > 0) || !(c.fy > 0))
            throw ParseError("camera '" + c.name + "': focal lengths must be positive");
        if (norm(c.rvec) >= kPi)
            throw ParseError("camera '" + c.name + "': rotation must be canonical (|rvec| < pi)");
        if (c.width < 0 || c.height < 0)
            throw ParseError("camera '" + c.name + "': negative image size");
    }
}

Rig rig_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("rig json: ") + e.what());
    }
    try {
        Rig r;
        for (const auto& jc : j.at("cameras")) {
            Camera c;
            c.name = jc.value("name", "cam" + std::to_string(r.cameras.size()));
            c.fx = jc.at("fx").get<double>();
            c.fy = jc.at("fy").get<double>();
            c.cx = jc.at("cx").get<double>();
            c.cy = jc.at("cy").get<double>();
            if (jc.contains("dist")) {
                const auto& d = jc["dist"];
                if (d.size() != 5) throw ParseError("camera '" + c.name + "': dist must be [k1,k2,k3,p1,p2]");
                c.k1 = d[0].get<double>();
                c.k2 = d[1].get<double>();
                c.k3 = d[2].get<double>();
                c.p1 = d[3].get<double>();
                c.p2 = d[4].get<double>();
            }
            const auto& rv = jc.at("rvec");
            c.rvec = {rv[0].get<double>(), rv[1].get<double>(), rv[2].get<double>()};
            const auto& tv = jc.at("tvec");
            c.tvec = {tv[0].get<double>(), tv[1].get<double>(), tv[2].get<double>()};
            c.width = jc.value("width", 0);
            c.height = jc.value("height", 0);
            r.refine.push_back(jc.value("refine", false));
            r.cameras.push_back(std::move(c));
        }
        r.validate();
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("rig json: ") + e.what());
    }
}

Rig load_rig(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open rig file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return rig_from_json_text(ss.str());
}

std::string rig_to_json_text(const Rig& r) {
    json j;
    j["cameras"] = json::array();
    for (std::size_t i = 0; i < r.cameras.size(); ++i) {
        const Camera& c = r.cameras[i];
        json jc;
        jc["name"] = c.name;
        jc["fx"] = c.fx;
        jc["fy"] = c.fy;
        jc["cx"] = c.cx;
        jc["cy"] = c.cy;
        jc["dist"] = json::array({c.k1, c.k2, c.k3, c.p1, c.p2});
        jc["rvec"] = json::array({c.rvec.x, c.rvec.y, c.rvec.z});
        jc["tvec"] = json::array({c.tvec.x, c.tvec.y, c.tvec.z});
        if (c.width > 0) jc["width"] = c.width;
        if (c.height > 0) jc["height"] = c.height;
        jc["refine"] = i < r.refine.size() ? static_cast<bool>(r.refine[i]) : false;
        j["cameras"].push_back(jc);
    }
    return j.dump(2) + "\n";
}

void save_rig(const Rig& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write rig file '" + path + "'");
    out << rig_to_json_text(r);
}

// ---- projection ----

template <class S>
Pixel<S> project_camera_point(const Camera& c, const V3<S>& xc) {
    Pixel<S> out;
    if (value_of(xc.z) <= kMinDepth) {
        out.behind = true;
        out.u = xc.x; // placeholders; flagged invalid
        out.v = xc.y;
        return out;
    }
    const S xn = xc.x / xc.z;
    const S yn = xc.y / xc.z;

    const bool undistorted = c.k1 == 0 && c.k2 == 0 && c.k3 == 0 && c.p1 == 0 && c.p2 == 0;
    if (undistorted) {
        out.u = lin1s(xn, c.fx, c.cx);
        out.v = lin1s(yn, c.fy, c.cy);
        return out;
    }

    const S sx = square(xn);
    const S sy = square(yn);
    const S r2 = sx + sy;
    // radial polynomial 1 + k1 r2 + k2 r2^2 + k3 r2^3, Horner form
    const S h1 = lin1s(r2, c.k3, c.k2);
    const S h2 = h1 * r2;
    const S h3 = lin1s(h2, 1.0, c.k1);
    const S radial = lin1s(h3 * r2, 1.0, 1.0);

    const S xy = xn * yn;
    // x' = xn*radial + 2 p1 xn yn + p2 (r2 + 2 xn^2)
    const S tx = lin2s(xy, r2, 2.0 * c.p1, c.p2, 0.0);
    const S txx = lin2s(tx, sx, 1.0, 2.0 * c.p2, 0.0);
    const S xd = xn * radial + txx;
    // y' = yn*radial + p1 (r2 + 2 yn^2) + 2 p2 xn yn
    const S ty = lin2s(xy, r2, 2.0 * c.p2, c.p1, 0.0);
    const S tyy = lin2s(ty, sy, 1.0, 2.0 * c.p1, 0.0);
    const S yd = yn * radial + tyy;

    out.u = lin1s(xd, c.fx, c.cx);
    out.v = lin1s(yd, c.fy, c.cy);
    return out;
}

template Pixel<double> project_camera_point<double>(const Camera&, const V3<double>&);
template Pixel<ad::Value> project_camera_point<ad::Value>(const Camera&, const V3<ad::Value>&);

Pixel<double> project(const Camera& c, const Vec3& xw) {
    const Mat3 R = rodrigues(c.rvec);
    const V3<double> xc = const_mat_vec_add(R, V3<double>{xw.x, xw.y, xw.z}, c.tvec);
    return project_camera_point<double>(c, xc);
}

// Rodrigues rotation from a small axis-angle increment, with a quadratic
// series branch near zero so gradients stay finite at delta = 0.
template <class S>
M3<S> delta_rotation(const V3<S>& delta) {
    const S sxx = square(delta.x);
    const S syy = square(delta.y);
    const S szz = square(delta.z);
    const S th2 = sxx + syy + szz;

    S A, B; // sin(th)/th and (1-cos(th))/th^2
    if (value_of(th2) < 1e-12) {
        A = lin1s(th2, -1.0 / 6.0, 1.0);
        B = lin1s(th2, -1.0 / 24.0, 0.5);
    } else {
        using std::sqrt;
        using std::sin;
        using std::cos;
        const S th = sqrt(th2);
        A = sin(th) / th;
        const S cth = cos(th);
        B = lin1s(cth, -1.0, 1.0) / th2;
    }

    const S xy = delta.x * delta.y;
    const S xz = delta.x * delta.z;
    const S yz = delta.y * delta.z;
    const S ax = A * delta.x;
    const S ay = A * delta.y;
    const S az = A * delta.z;
    const S bth2 = B * th2;

    M3<S> R;
    // R = I + A [w]x + B (w w^T - th2 I)
    R.m[0] = lin2s(B * sxx, bth2, 1.0, -1.0, 1.0);
    R.m[4] = lin2s(B * syy, bth2, 1.0, -1.0, 1.0);
    R.m[8] = lin2s(B * szz, bth2, 1.0, -1.0, 1.0);
    const S bxy = B * xy;
    const S bxz = B * xz;
    const S byz = B * yz;
    R.m[1] = bxy - az;
    R.m[3] = bxy + az;
    R.m[2] = bxz + ay;
    R.m[6] = bxz - ay;
    R.m[5] = byz - ax;
    R.m[7] = byz + ax;
    return R;
}

template M3<double> delta_rotation<double>(const V3<double>&);
template M3<ad::Value> delta_rotation<ad::Value>(const V3<ad::Value>&);

Camera compose_delta(const Camera& c, const Vec3& delta) {
    const V3<double> d{delta.x, delta.y, delta.z};
    const M3<double> Rd3 = delta_rotation<double>(d);
    Mat3 Rd;
    for (int k = 0; k < 9; ++k) Rd.m[static_cast<std::size_t>(k)] = Rd3.m[k];
    const Mat3 R = Rd * rodrigues(c.rvec);
    Camera out = c;
    out.rvec = rotation_log(R);
    out.tvec = Rd * c.tvec;
    return out;
}

} // namespace kinvar::cam
