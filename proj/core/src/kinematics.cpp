#include "kinvar/kinematics.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace kinvar::kin {

using nlohmann::json;

// ---- validation & dof flattening ----

void Model::finalize() {
    if (segments.empty()) throw ParseError("model has no segments");
    if (segments[0].parent != -1) throw ParseError("segment 0 must have no parent");
    // the root is either free (6 dof) or anchored at its offset with a
    // hinge/ball joint (fixed-base mechanisms, e.g. a pendulum)
    std::set<std::string> names;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const Segment& s = segments[i];
        if (!names.insert(s.name).second) throw ParseError("duplicate segment name '" + s.name + "'");
        if (i > 0) {
            if (s.parent < 0 || s.parent >= static_cast<int>(i))
                throw ParseError("segment '" + s.name + "' parent must precede it");
            if (s.joint.type == JointType::FreeRoot)
                throw ParseError("free joint allowed only at the root");
        }
        if (s.joint.type == JointType::Hinge && (s.joint.axis < 0 || s.joint.axis > 2))
            throw ParseError("hinge axis out of range on '" + s.name + "'");
        if (s.scale_index >= num_scales)
            throw ParseError("scale index out of range on '" + s.name + "'");
    }
    std::set<std::string> site_names;
    for (const Site& st : sites) {
        if (!site_names.insert(st.name).second)
            throw ParseError("duplicate site name '" + st.name + "'");
        if (st.segment < 0 || st.segment >= static_cast<int>(segments.size()))
            throw ParseError("site '" + st.name + "' references a missing segment");
    }

    dofs.clear();
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const Joint& j = segments[i].joint;
        auto push = [&](bool rot_dof, int limit_slot) {
            Dof d;
            d.segment = static_cast<int>(i);
            if (rot_dof && limit_slot >= 0 && j.lo[limit_slot] < j.hi[limit_slot]) {
                d.bounded = true;
                d.lo = j.lo[limit_slot];
                d.hi = j.hi[limit_slot];
            }
            dofs.push_back(d);
        };
        switch (j.type) {
            case JointType::FreeRoot:
                for (int k = 0; k < 3; ++k) push(false, -1); // translation
                for (int k = 0; k < 3; ++k) push(true, k);   // orientation (usually unbounded)
                break;
            case JointType::Hinge:
                push(true, 0);
                break;
            case JointType::Ball:
                for (int k = 0; k < 3; ++k) push(true, k);
                break;
        }
    }
}

// ---- JSON I/O ----

namespace {

JointType joint_type_from(const std::string& s) {
    if (s == "free") return JointType::FreeRoot;
    if (s == "hinge") return JointType::Hinge;
    if (s == "ball") return JointType::Ball;
    throw ParseError("unknown joint type '" + s + "'");
}

std::string joint_type_name(JointType t) {
    switch (t) {
        case JointType::FreeRoot: return "free";
        case JointType::Hinge: return "hinge";
        case JointType::Ball: return "ball";
    }
    return "?";
}

Vec3 vec3_from(const json& a) {
    if (!a.is_array() || a.size() != 3) throw ParseError("expected a 3-vector");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

json vec3_to(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

} // namespace

Model model_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model json: ") + e.what());
    }
    try {
        Model m;
        m.name = j.value("name", "model");
        m.num_scales = j.value("num_scales", 0);
        std::vector<std::string> seg_names;
        for (const auto& js : j.at("segments")) {
            Segment s;
            s.name = js.at("name").get<std::string>();
            if (js.contains("parent") && !js["parent"].is_null()) {
                const std::string pname = js["parent"].get<std::string>();
                const auto it = std::find(seg_names.begin(), seg_names.end(), pname);
                if (it == seg_names.end())
                    throw ParseError("segment '" + s.name + "': unknown parent '" + pname + "'");
                s.parent = static_cast<int>(it - seg_names.begin());
            }
            if (js.contains("offset")) s.offset = vec3_from(js["offset"]);
            const auto& jj = js.at("joint");
            s.joint.type = joint_type_from(jj.at("type").get<std::string>());
            s.joint.axis = jj.value("axis", 1);
            if (jj.contains("limits") && !jj["limits"].is_null()) {
                const auto& lim = jj["limits"];
                for (std::size_t k = 0; k < lim.size() && k < 3; ++k) {
                    if (lim[k].is_null()) continue;
                    s.joint.lo[k] = lim[k].at(0).get<double>();
                    s.joint.hi[k] = lim[k].at(1).get<double>();
                }
            }
            s.scale_index = js.value("scale_index", -1);
            seg_names.push_back(s.name);
            m.segments.push_back(std::move(s));
        }
        for (const auto& js : j.at("sites")) {
            Site st;
            st.name = js.at("name").get<std::string>();
            const std::string seg = js.at("segment").get<std::string>();
            const auto it = std::find(seg_names.begin(), seg_names.end(), seg);
            if (it == seg_names.end())
                throw ParseError("site '" + st.name + "': unknown segment '" + seg + "'");
            st.segment = static_cast<int>(it - seg_names.begin());
            st.offset = vec3_from(js.at("offset"));
            m.sites.push_back(std::move(st));
        }
        m.finalize();
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model json: ") + e.what());
    }
}

Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json_text(ss.str());
}

std::string model_to_json_text(const Model& m) {
    json j;
    j["name"] = m.name;
    j["num_scales"] = m.num_scales;
    j["segments"] = json::array();
    for (const Segment& s : m.segments) {
        json js;
        js["name"] = s.name;
        if (s.parent >= 0)
            js["parent"] = m.segments[static_cast<std::size_t>(s.parent)].name;
        else
            js["parent"] = nullptr;
        js["offset"] = vec3_to(s.offset);
        json jj;
        jj["type"] = joint_type_name(s.joint.type);
        if (s.joint.type == JointType::Hinge) jj["axis"] = s.joint.axis;
        json lim = json::array();
        bool any = false;
        for (int k = 0; k < 3; ++k) {
            if (s.joint.lo[k] < s.joint.hi[k]) {
                lim.push_back(json::array({s.joint.lo[k], s.joint.hi[k]}));
                any = true;
            } else {
                lim.push_back(nullptr);
            }
        }
        jj["limits"] = any ? lim : json();
        js["joint"] = jj;
        if (s.scale_index >= 0) js["scale_index"] = s.scale_index;
        j["segments"].push_back(js);
    }
    j["sites"] = json::array();
    for (const Site& st : m.sites) {
        json js;
        js["name"] = st.name;
        js["segment"] = m.segments[static_cast<std::size_t>(st.segment)].name;
        js["offset"] = vec3_to(st.offset);
        j["sites"].push_back(js);
    }
    return j.dump(2) + "\n";
}

void save_model(const Model& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model file '" + path + "'");
    out << model_to_json_text(m);
}

// ---- forward kinematics ----

namespace {

// constant lifted into the scalar domain of `like`
inline double make_scalar(double v, double) { return v; }
inline ad::Value make_scalar(double v, ad::Value like) {
    return {like.tape, like.tape->constant(v)};
}

// intrinsic XYZ Euler rotation built from 6 trig scalars.
// R = Rx(a) * Ry(b) * Rz(c), written out so both scalar paths share the node
// structure (products of the trig values, no embedded 0/1 constants).
template <class S>
M3<S> euler_xyz(S a, S b, S c) {
    using std::sin;
    using std::cos;
    const S sa = sin(a), ca = cos(a);
    const S sb = sin(b), cb = cos(b);
    const S sc = sin(c), cc = cos(c);
    const S sasb = sa * sb;
    const S casb = ca * sb;
    M3<S> R;
    R.m[0] = cb * cc;
    R.m[1] = -(cb * sc);
    R.m[2] = sb;
    R.m[3] = ca * sc + sasb * cc;
    R.m[4] = ca * cc - sasb * sc;
    R.m[5] = -(sa * cb);
    R.m[6] = sa * sc - casb * cc;
    R.m[7] = sa * cc + casb * sc;
    R.m[8] = ca * cb;
    return R;
}

// parent rotation times a hinge rotation about a local axis; only the two
// affected columns are recomputed
template <class S>
M3<S> hinge_rotate(const M3<S>& P, int axis, S angle) {
    using std::sin;
    using std::cos;
    const S s = sin(angle), c = cos(angle);
    // column indices (u, v) rotate as u' = c*u + s*v, v' = -s*u + c*v = c*v - s*u
    int u, v;
    if (axis == 0) { u = 1; v = 2; }
    else if (axis == 1) { u = 2; v = 0; }  // rot about y: x' = c*x - s*z, z' = s*x + c*z
    else { u = 0; v = 1; }
    M3<S> R = P;
    for (int r = 0; r < 3; ++r) {
        const S pu = P.m[3 * r + u];
        const S pv = P.m[3 * r + v];
        R.m[3 * r + u] = c * pu + s * pv;
        R.m[3 * r + v] = c * pv - s * pu;
    }
    return R;
}

} // namespace

template <class S>
void forward(const Model& m, std::span<const S> theta, std::span<const S> beta, FkOut<S>& out) {
    const std::size_t nseg = m.segments.size();
    const std::size_t nsite = m.sites.size();
    out.seg_pos.resize(3 * nseg);
    out.seg_rot.resize(9 * nseg);
    out.site_pos.resize(3 * nsite);

    std::size_t q = 0; // dof cursor

    // root: free roots translate and rotate, anchored roots sit at their
    // offset and rotate about it
    V3<S> p;
    M3<S> R;
    const Segment& root = m.segments[0];
    if (root.joint.type == JointType::FreeRoot) {
        p = {theta[0], theta[1], theta[2]};
        R = euler_xyz(theta[3], theta[4], theta[5]);
        q = 6;
    } else {
        const S like = theta[0];
        p = {make_scalar(root.offset.x, like), make_scalar(root.offset.y, like),
             make_scalar(root.offset.z, like)};
        if (root.joint.type == JointType::Hinge) {
            const S z0 = make_scalar(0.0, theta[0]);
            const int ax = root.joint.axis;
            R = euler_xyz(ax == 0 ? theta[0] : z0, ax == 1 ? theta[0] : z0,
                          ax == 2 ? theta[0] : z0);
            q = 1;
        } else {
            R = euler_xyz(theta[0], theta[1], theta[2]);
            q = 3;
        }
    }
    out.seg_pos[0] = p.x; out.seg_pos[1] = p.y; out.seg_pos[2] = p.z;
    for (int k = 0; k < 9; ++k) out.seg_rot[static_cast<std::size_t>(k)] = R.m[k];

    for (std::size_t i = 1; i < nseg; ++i) {
        const Segment& seg = m.segments[i];
        const std::size_t pi = static_cast<std::size_t>(seg.parent);
        M3<S> Rp;
        for (int k = 0; k < 9; ++k) Rp.m[k] = out.seg_rot[9 * pi + static_cast<std::size_t>(k)];
        const V3<S> pp{out.seg_pos[3 * pi], out.seg_pos[3 * pi + 1], out.seg_pos[3 * pi + 2]};

        // attachment point: parent's scale stretches the offset
        const int psc = m.segments[pi].scale_index;
        V3<S> off;
        if (psc >= 0) {
            const S s = beta[static_cast<std::size_t>(psc)];
            off = {lin1s(s, seg.offset.x, 0.0), lin1s(s, seg.offset.y, 0.0), lin1s(s, seg.offset.z, 0.0)};
        } else {
            const S like = pp.x;
            off = {make_scalar(seg.offset.x, like), make_scalar(seg.offset.y, like),
                   make_scalar(seg.offset.z, like)};
        }
        const V3<S> delta = mat_vec(Rp, off);
        const V3<S> pos{pp.x + delta.x, pp.y + delta.y, pp.z + delta.z};

        M3<S> Ri;
        if (seg.joint.type == JointType::Hinge) {
            Ri = hinge_rotate(Rp, seg.joint.axis, theta[q]);
            q += 1;
        } else { // ball
            const M3<S> Rj = euler_xyz(theta[q], theta[q + 1], theta[q + 2]);
            Ri = mat_mul(Rp, Rj);
            q += 3;
        }

        out.seg_pos[3 * i] = pos.x;
        out.seg_pos[3 * i + 1] = pos.y;
        out.seg_pos[3 * i + 2] = pos.z;
        for (int k = 0; k < 9; ++k) out.seg_rot[9 * i + static_cast<std::size_t>(k)] = Ri.m[k];
    }

    // sites: world = p_seg + R_seg * (offset * scale + beta_site)
    for (std::size_t s = 0; s < nsite; ++s) {
        const Site& st = m.sites[s];
        const std::size_t si = static_cast<std::size_t>(st.segment);
        M3<S> Rs;
        for (int k = 0; k < 9; ++k) Rs.m[k] = out.seg_rot[9 * si + static_cast<std::size_t>(k)];
        const V3<S> ps{out.seg_pos[3 * si], out.seg_pos[3 * si + 1], out.seg_pos[3 * si + 2]};

        const std::size_t b0 = static_cast<std::size_t>(m.num_scales) + 3 * s;
        const int sc = m.segments[si].scale_index;
        V3<S> local;
        if (sc >= 0) {
            const S scale = beta[static_cast<std::size_t>(sc)];
            local = {lin2s(scale, beta[b0], st.offset.x, 1.0, 0.0),
                     lin2s(scale, beta[b0 + 1], st.offset.y, 1.0, 0.0),
                     lin2s(scale, beta[b0 + 2], st.offset.z, 1.0, 0.0)};
        } else {
            local = {lin1s(beta[b0], 1.0, st.offset.x),
                     lin1s(beta[b0 + 1], 1.0, st.offset.y),
                     lin1s(beta[b0 + 2], 1.0, st.offset.z)};
        }
        const V3<S> d = mat_vec(Rs, local);
        out.site_pos[3 * s] = ps.x + d.x;
        out.site_pos[3 * s + 1] = ps.y + d.y;
        out.site_pos[3 * s + 2] = ps.z + d.z;
    }
}

template void forward<double>(const Model&, std::span<const double>, std::span<const double>,
                              FkOut<double>&);
template void forward<ad::Value>(const Model&, std::span<const ad::Value>,
                                 std::span<const ad::Value>, FkOut<ad::Value>&);

std::vector<Vec3> site_positions(const Model& m, std::span<const double> theta,
                                 std::span<const double> beta) {
    FkOut<double> out;
    forward<double>(m, theta, beta, out);
    std::vector<Vec3> pts(m.sites.size());
    for (std::size_t s = 0; s < pts.size(); ++s)
        pts[s] = {out.site_pos[3 * s], out.site_pos[3 * s + 1], out.site_pos[3 * s + 2]};
    return pts;
}

} // namespace kinvar::kin
