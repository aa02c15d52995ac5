#include "kinvar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace kinvar::synth {

using nlohmann::json;

// ---- rigs ----

namespace {

cam::Camera look_at(const std::string& name, const Vec3& pos, const Vec3& target, int w, int h,
                    double focal) {
    Vec3 fwd = target - pos;
    const double fn = norm(fwd);
    if (fn < 1e-9) throw Error("camera '" + name + "' coincides with its target");
    fwd = fwd * (1.0 / fn);
    Vec3 up{0, 0, 1};
    Vec3 right = cross(fwd, up);
    if (norm(right) < 1e-9) { // looking straight down/up
        up = {0, 1, 0};
        right = cross(fwd, up);
    }
    right = right * (1.0 / norm(right));
    const Vec3 down = cross(fwd, right);

    Mat3 R; // rows: right, down, forward (world -> camera)
    R.m[0] = right.x; R.m[1] = right.y; R.m[2] = right.z;
    R.m[3] = down.x;  R.m[4] = down.y;  R.m[5] = down.z;
    R.m[6] = fwd.x;   R.m[7] = fwd.y;   R.m[8] = fwd.z;

    cam::Camera c;
    c.name = name;
    c.fx = c.fy = focal;
    c.cx = w / 2.0;
    c.cy = h / 2.0;
    c.width = w;
    c.height = h;
    c.rvec = rotation_log(R);
    const Vec3 t = R * pos;
    c.tvec = {-t.x, -t.y, -t.z};
    return c;
}

} // namespace

cam::Rig make_ring_rig(int cameras, double radius, const std::array<double, 3>& target, int width,
                       int height, double focal) {
    if (cameras < 1) throw Error("ring rig needs at least one camera");
    cam::Rig rig;
    const Vec3 tgt{target[0], target[1], target[2]};
    for (int i = 0; i < cameras; ++i) {
        // eighth-slot phase: the azimuth-90 camera would be an exact-pi
        // rotation (rvec canonicalization rejects it), and (i+1/8)/C = 1/4
        // has no integer solution for any camera count
        const double a = 2.0 * kPi * (i + 0.125) / cameras;
        const Vec3 pos{tgt.x + radius * std::cos(a), tgt.y + radius * std::sin(a),
                       tgt.z + 0.25 * radius};
        rig.cameras.push_back(look_at("cam" + std::to_string(i), pos, tgt, width, height, focal));
    }
    rig.refine.assign(rig.cameras.size(), false);
    rig.validate();
    return rig;
}

cam::Rig make_linear_rig(int cameras, double radius, const std::array<double, 3>& target,
                         int width, int height, double focal) {
    if (cameras < 1) throw Error("linear rig needs at least one camera");
    cam::Rig rig;
    const Vec3 tgt{target[0], target[1], target[2]};
    for (int i = 0; i < cameras; ++i) {
        const double frac = cameras > 1 ? static_cast<double>(i) / (cameras - 1) - 0.5 : 0.0;
        const Vec3 pos{tgt.x + radius * frac, tgt.y - radius, tgt.z + 0.25 * radius};
        rig.cameras.push_back(look_at("cam" + std::to_string(i), pos, tgt, width, height, focal));
    }
    rig.refine.assign(rig.cameras.size(), false);
    rig.validate();
    return rig;
}

// ---- trajectories ----

std::vector<Wave> default_waves(const kin::Model& m, const std::array<double, 3>& target) {
    std::vector<Wave> waves;
    const bool free_root = m.segments[0].joint.type == kin::JointType::FreeRoot;
    for (std::size_t k = 0; k < m.dofs.size(); ++k) {
        const kin::Dof& d = m.dofs[static_cast<std::size_t>(k)];
        Wave w;
        w.frequency = 0.25 + 0.075 * static_cast<double>(k % 8);
        w.phase = 0.7 * static_cast<double>(k);
        if (d.bounded) {
            w.center = 0.5 * (d.lo + d.hi);
            w.amplitude = 0.4 * 0.5 * (d.hi - d.lo);
        } else if (free_root && k < 3) {
            // root drift around the rig target
            w.center = target[k];
            w.amplitude = (k == 0 ? 0.35 : k == 1 ? 0.25 : 0.08);
            w.frequency = (k == 0 ? 0.12 : k == 1 ? 0.17 : 0.45);
            w.phase = static_cast<double>(k);
        } else {
            w.center = 0;
            w.amplitude = 0.3;
        }
        waves.push_back(w);
    }
    return waves;
}

std::vector<double> ground_truth(const kin::Model& m, const std::vector<Wave>& waves,
                                 int num_frames, double fps) {
    const int K = m.dof_count();
    if (static_cast<int>(waves.size()) != K)
        throw Error("expected " + std::to_string(K) + " waves, got " +
                    std::to_string(waves.size()));
    std::vector<double> gt(static_cast<std::size_t>(num_frames) * static_cast<std::size_t>(K));
    for (int f = 0; f < num_frames; ++f) {
        const double t = f / fps;
        for (int k = 0; k < K; ++k) {
            const Wave& w = waves[static_cast<std::size_t>(k)];
            const double v = w.center + w.amplitude * std::sin(2.0 * kPi * w.frequency * t + w.phase);
            const kin::Dof& d = m.dofs[static_cast<std::size_t>(k)];
            if (d.bounded && (v < d.lo || v > d.hi))
                throw Error("wave for dof " + std::to_string(k) + " leaves its limits at t=" +
                            std::to_string(t));
            gt[static_cast<std::size_t>(f) * K + static_cast<std::size_t>(k)] = v;
        }
    }
    return gt;
}

// ---- generation ----

namespace {

double sigma_true(const std::array<double, 3>& c, double s) {
    return c[0] + c[1] * s + c[2] * s * s;
}

void check_sigma_positive(const std::array<double, 3>& c, double smax) {
    double lo = std::min(sigma_true(c, 0.0), sigma_true(c, smax));
    if (c[2] != 0.0) {
        const double sv = -c[1] / (2.0 * c[2]);
        if (sv > 0.0 && sv < smax) lo = std::min(lo, sigma_true(c, sv));
    }
    if (lo <= 0.0) throw Error("sigma_coeff: sigma_true(s) must stay positive on [0, score_max]");
}

double draw_radius(Rng& rng, const std::string& kind, double sigma) {
    if (kind == "exponential") return rng.exponential(sigma);
    if (kind == "half_cauchy") return rng.half_cauchy(sigma);
    if (kind == "half_normal") return rng.half_normal(sigma);
    if (kind == "gaussian") return rng.rayleigh(sigma);
    throw Error("unknown noise kind '" + kind + "'");
}

} // namespace

Dataset generate(const kin::Model& model, const SynthConfig& cfg) {
    if (!(cfg.fps > 0)) throw Error("synth config: fps must be positive");
    if (!(cfg.duration > 0)) throw Error("synth config: duration must be positive");
    if (cfg.cameras < 1) throw Error("synth config: cameras must be >= 1");
    if (!(cfg.score_max > 0)) throw Error("synth config: score_max must be positive");
    if (cfg.inject_px < 0) throw Error("synth config: inject_px must be >= 0");
    const bool noisy = cfg.noise != "none";
    if (noisy && cfg.noise != "exponential" && cfg.noise != "half_cauchy" &&
        cfg.noise != "half_normal" && cfg.noise != "gaussian")
        throw Error("synth config: unknown noise kind '" + cfg.noise + "'");

    Dataset ds;
    ds.model = model;
    ds.model.finalize();
    const int K = ds.model.dof_count();
    const int J = ds.model.site_count();

    ds.rig = cfg.rig_kind == "ring"
                 ? make_ring_rig(cfg.cameras, cfg.radius, cfg.target, cfg.image_width,
                                 cfg.image_height, cfg.focal)
             : cfg.rig_kind == "linear"
                 ? make_linear_rig(cfg.cameras, cfg.radius, cfg.target, cfg.image_width,
                                   cfg.image_height, cfg.focal)
                 : throw Error("synth config: rig_kind must be 'ring' or 'linear'");

    for (const Occlusion& o : cfg.occlusions)
        if (o.cam < 0 || o.cam >= cfg.cameras)
            throw Error("synth config: occlusion camera out of range");
    if (noisy) check_sigma_positive(cfg.sigma_coeff, cfg.score_max);

    ds.num_frames = static_cast<int>(cfg.duration * cfg.fps + 0.5);
    if (ds.num_frames < 1) throw Error("synth config: duration*fps must give at least one frame");

    const std::vector<Wave> waves =
        cfg.waves.empty() ? default_waves(ds.model, cfg.target) : cfg.waves;
    ds.gt_theta = ground_truth(ds.model, waves, ds.num_frames, cfg.fps);
    ds.gt_beta.assign(static_cast<std::size_t>(ds.model.beta_size()), 0.0);
    for (int i = 0; i < ds.model.num_scales; ++i) ds.gt_beta[static_cast<std::size_t>(i)] = 1.0;

    ds.gt_sites.resize(static_cast<std::size_t>(ds.num_frames) * J * 3);
    Rng rng(cfg.seed);

    ObsTable obs;
    obs.name = cfg.name;
    obs.fps = cfg.fps;
    obs.num_frames = ds.num_frames;
    obs.num_cams = static_cast<int>(ds.rig.cameras.size());
    obs.num_sites = J;

    for (int f = 0; f < ds.num_frames; ++f) {
        const double t = f / cfg.fps;
        const std::span<const double> theta{ds.gt_theta.data() + static_cast<std::size_t>(f) * K,
                                            static_cast<std::size_t>(K)};
        const std::vector<Vec3> sites = kin::site_positions(ds.model, theta, ds.gt_beta);
        for (int j = 0; j < J; ++j) {
            ds.gt_sites[(static_cast<std::size_t>(f) * J + j) * 3 + 0] = sites[static_cast<std::size_t>(j)].x;
            ds.gt_sites[(static_cast<std::size_t>(f) * J + j) * 3 + 1] = sites[static_cast<std::size_t>(j)].y;
            ds.gt_sites[(static_cast<std::size_t>(f) * J + j) * 3 + 2] = sites[static_cast<std::size_t>(j)].z;
        }
        for (int c = 0; c < obs.num_cams; ++c) {
            bool occluded = false;
            for (const Occlusion& o : cfg.occlusions)
                if (o.cam == c && t >= o.t0 && t < o.t1) { occluded = true; break; }
            if (occluded) continue;
            const cam::Camera& camera = ds.rig.cameras[static_cast<std::size_t>(c)];
            for (int j = 0; j < J; ++j) {
                const cam::Pixel<double> pix = cam::project(camera, sites[static_cast<std::size_t>(j)]);
                if (pix.behind) { ++ds.behind; continue; }
                const double score = rng.uniform() * cfg.score_max;
                double u = pix.u, v = pix.v;
                if (noisy) {
                    const double r = draw_radius(rng, cfg.noise, sigma_true(cfg.sigma_coeff, score));
                    const double a = rng.uniform() * 2.0 * kPi;
                    u += r * std::cos(a);
                    v += r * std::sin(a) * (cfg.anisotropic ? 0.2 : 1.0);
                }
                obs.rows.push_back({f, c, j, u, v, score});
            }
        }
    }
    obs.index();

    if (cfg.inject_px > 0) {
        std::uint64_t s = cfg.seed ^ 0x1f3a5c7e9b2d4f60ULL;
        obs = inject_noise(obs, cfg.inject_px, splitmix64(s));
    }
    if (!cfg.camera_subset.empty()) {
        auto [o2, r2] = subset_cameras(obs, ds.rig, cfg.camera_subset, cfg.require_joint_visibility);
        obs = std::move(o2);
        ds.rig = std::move(r2);
    }
    ds.obs = std::move(obs);
    return ds;
}

ObsTable inject_noise(const ObsTable& obs, double extra_px, std::uint64_t seed) {
    if (extra_px < 0) throw Error("inject_noise: extra_px must be >= 0");
    ObsTable out = obs;
    if (extra_px == 0) return out;
    Rng rng(seed);
    for (Obs& r : out.rows) {
        const double rad = rng.exponential(extra_px);
        const double a = rng.uniform() * 2.0 * kPi;
        r.u += rad * std::cos(a);
        r.v += rad * std::sin(a);
    }
    return out;
}

std::pair<ObsTable, cam::Rig> subset_cameras(const ObsTable& obs, const cam::Rig& rig,
                                             const std::vector<std::string>& names,
                                             bool require_joint_visibility) {
    if (names.empty()) throw Error("subset_cameras: no cameras named");
    std::vector<bool> keep(rig.cameras.size(), false);
    for (const std::string& n : names) {
        bool found = false;
        for (std::size_t i = 0; i < rig.cameras.size(); ++i)
            if (rig.cameras[i].name == n) { keep[i] = true; found = true; break; }
        if (!found) throw Error("subset_cameras: unknown camera '" + n + "'");
    }
    const int kept = static_cast<int>(std::count(keep.begin(), keep.end(), true));
    if (require_joint_visibility && kept < 2)
        throw Error("subset_cameras: joint visibility needs at least two cameras");

    cam::Rig out_rig;
    std::vector<int> remap(rig.cameras.size(), -1);
    for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
        if (!keep[i]) continue;
        remap[i] = static_cast<int>(out_rig.cameras.size());
        out_rig.cameras.push_back(rig.cameras[i]);
        out_rig.refine.push_back(i < rig.refine.size() ? static_cast<bool>(rig.refine[i]) : false);
    }

    ObsTable out = obs;
    out.rows.clear();
    out.num_cams = kept;
    for (const Obs& r : obs.rows)
        if (remap[static_cast<std::size_t>(r.cam)] >= 0) {
            Obs nr = r;
            nr.cam = remap[static_cast<std::size_t>(r.cam)];
            out.rows.push_back(nr);
        }

    if (require_joint_visibility) {
        // per frame, count distinct retained cameras with at least one row
        std::vector<std::set<int>> seen(static_cast<std::size_t>(obs.num_frames));
        for (const Obs& r : out.rows) seen[static_cast<std::size_t>(r.frame)].insert(r.cam);
        std::vector<Obs> filtered;
        for (const Obs& r : out.rows)
            if (static_cast<int>(seen[static_cast<std::size_t>(r.frame)].size()) == kept)
                filtered.push_back(r);
        out.rows = std::move(filtered);
    }
    if (out.rows.empty()) throw Error("subset_cameras: no observations remain");
    out.index();
    return {std::move(out), std::move(out_rig)};
}

// ---- config json ----

SynthConfig synth_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("synth config: ") + e.what());
    }
    try {
        SynthConfig c;
        c.name = j.value("name", c.name);
        c.model = j.value("model", c.model);
        c.rig_kind = j.value("rig", c.rig_kind);
        c.cameras = j.value("cameras", c.cameras);
        c.radius = j.value("radius", c.radius);
        c.image_width = j.value("image_width", c.image_width);
        c.image_height = j.value("image_height", c.image_height);
        c.focal = j.value("focal", c.focal);
        if (j.contains("target")) {
            const auto& a = j["target"];
            for (int i = 0; i < 3; ++i) c.target[static_cast<std::size_t>(i)] = a.at(static_cast<std::size_t>(i)).get<double>();
        }
        if (j.contains("waves"))
            for (const auto& w : j["waves"])
                c.waves.push_back({w.value("center", 0.0), w.value("amplitude", 0.0),
                                   w.value("frequency", 0.0), w.value("phase", 0.0)});
        c.duration = j.value("duration", c.duration);
        c.fps = j.value("fps", c.fps);
        c.noise = j.value("noise", c.noise);
        if (j.contains("sigma_coeff")) {
            const auto& a = j["sigma_coeff"];
            for (int i = 0; i < 3; ++i) c.sigma_coeff[static_cast<std::size_t>(i)] = a.at(static_cast<std::size_t>(i)).get<double>();
        }
        c.score_max = j.value("score_max", c.score_max);
        c.anisotropic = j.value("anisotropic", c.anisotropic);
        if (j.contains("occlusions"))
            for (const auto& o : j["occlusions"])
                c.occlusions.push_back({o.at("cam").get<int>(), o.at("t0").get<double>(),
                                        o.at("t1").get<double>()});
        c.inject_px = j.value("inject_px", c.inject_px);
        if (j.contains("camera_subset"))
            c.camera_subset = j["camera_subset"].get<std::vector<std::string>>();
        c.require_joint_visibility = j.value("require_joint_visibility", c.require_joint_visibility);
        c.seed = j.value("seed", c.seed);
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("synth config: ") + e.what());
    }
}

std::string synth_config_to_json_text(const SynthConfig& c) {
    json j;
    j["name"] = c.name;
    j["model"] = c.model;
    j["rig"] = c.rig_kind;
    j["cameras"] = c.cameras;
    j["radius"] = c.radius;
    j["image_width"] = c.image_width;
    j["image_height"] = c.image_height;
    j["focal"] = c.focal;
    j["target"] = json::array({c.target[0], c.target[1], c.target[2]});
    if (!c.waves.empty()) {
        json ws = json::array();
        for (const Wave& w : c.waves)
            ws.push_back(json{{"center", w.center},
                              {"amplitude", w.amplitude},
                              {"frequency", w.frequency},
                              {"phase", w.phase}});
        j["waves"] = ws;
    }
    j["duration"] = c.duration;
    j["fps"] = c.fps;
    j["noise"] = c.noise;
    j["sigma_coeff"] = json::array({c.sigma_coeff[0], c.sigma_coeff[1], c.sigma_coeff[2]});
    j["score_max"] = c.score_max;
    j["anisotropic"] = c.anisotropic;
    if (!c.occlusions.empty()) {
        json os = json::array();
        for (const Occlusion& o : c.occlusions)
            os.push_back(json{{"cam", o.cam}, {"t0", o.t0}, {"t1", o.t1}});
        j["occlusions"] = os;
    }
    j["inject_px"] = c.inject_px;
    if (!c.camera_subset.empty()) j["camera_subset"] = c.camera_subset;
    j["require_joint_visibility"] = c.require_joint_visibility;
    j["seed"] = c.seed;
    return j.dump(2) + "\n";
}

// ---- ground truth files ----

void save_ground_truth(std::span<const double> gt_theta, int num_frames, int K,
                       const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write ground truth '" + path + "'");
    std::fprintf(f, "# kinvar gt v1\n# frames=%d dofs=%d\n", num_frames, K);
    std::fprintf(f, "frame");
    for (int k = 0; k < K; ++k) std::fprintf(f, ",theta_%d", k);
    std::fprintf(f, "\n");
    for (int fr = 0; fr < num_frames; ++fr) {
        std::fprintf(f, "%d", fr);
        for (int k = 0; k < K; ++k)
            std::fprintf(f, ",%.17g", gt_theta[static_cast<std::size_t>(fr) * K + static_cast<std::size_t>(k)]);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

std::vector<double> load_ground_truth(const std::string& path, int& num_frames, int& K) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open ground truth '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "# kinvar gt v1")
        throw ParseError("ground truth '" + path + "': bad version line");
    if (!std::getline(in, line) || std::sscanf(line.c_str(), "# frames=%d dofs=%d", &num_frames, &K) != 2)
        throw ParseError("ground truth '" + path + "': bad meta line");
    std::getline(in, line); // column header
    std::vector<double> gt;
    gt.reserve(static_cast<std::size_t>(num_frames) * static_cast<std::size_t>(K));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ','); // frame index
        while (std::getline(ss, cell, ',')) gt.push_back(std::stod(cell));
    }
    if (gt.size() != static_cast<std::size_t>(num_frames) * static_cast<std::size_t>(K))
        throw ParseError("ground truth '" + path + "': row count mismatch");
    return gt;
}

// ---- bundled models ----

namespace {

kin::Joint hinge(int axis, double lo, double hi) {
    kin::Joint j;
    j.type = kin::JointType::Hinge;
    j.axis = axis;
    j.lo[0] = lo;
    j.hi[0] = hi;
    return j;
}

kin::Joint ball(double lo0, double hi0, double lo1, double hi1, double lo2, double hi2) {
    kin::Joint j;
    j.type = kin::JointType::Ball;
    j.lo[0] = lo0; j.hi[0] = hi0;
    j.lo[1] = lo1; j.hi[1] = hi1;
    j.lo[2] = lo2; j.hi[2] = hi2;
    return j;
}

kin::Segment seg(std::string name, int parent, Vec3 off, kin::Joint j, int scale) {
    kin::Segment s;
    s.name = std::move(name);
    s.parent = parent;
    s.offset = off;
    s.joint = j;
    s.scale_index = scale;
    return s;
}

} // namespace

kin::Model humanoid_lite() {
    kin::Model m;
    m.name = "humanoid_lite";
    m.num_scales = 4;
    kin::Joint root;
    root.type = kin::JointType::FreeRoot;
    m.segments.push_back(seg("pelvis", -1, {0, 0, 0}, root, 0));
    m.segments.push_back(seg("torso", 0, {0, 0, 0.15}, ball(-0.5, 0.5, -0.5, 0.5, -0.6, 0.6), 1));
    m.segments.push_back(seg("head", 1, {0, 0, 0.35}, hinge(1, -0.7, 0.7), -1));
    m.segments.push_back(seg("thigh_l", 0, {0, 0.10, -0.05}, hinge(1, -0.9, 1.2), 2));
    m.segments.push_back(seg("shank_l", 3, {0, 0, -0.40}, hinge(1, -2.0, 0.05), 2));
    m.segments.push_back(seg("foot_l", 4, {0, 0, -0.42}, hinge(1, -0.8, 0.8), 2));
    m.segments.push_back(seg("thigh_r", 0, {0, -0.10, -0.05}, hinge(1, -0.9, 1.2), 3));
    m.segments.push_back(seg("shank_r", 6, {0, 0, -0.40}, hinge(1, -2.0, 0.05), 3));
    m.segments.push_back(seg("foot_r", 7, {0, 0, -0.42}, hinge(1, -0.8, 0.8), 3));

    auto site = [&](std::string name, int segment, Vec3 off) {
        m.sites.push_back({std::move(name), segment, off});
    };
    site("sacrum", 0, {-0.08, 0, 0.02});
    site("hip_l", 0, {0, 0.11, -0.05});
    site("hip_r", 0, {0, -0.11, -0.05});
    site("sternum", 1, {0.08, 0, 0.18});
    site("shoulder_l", 1, {0, 0.20, 0.30});
    site("shoulder_r", 1, {0, -0.20, 0.30});
    site("crown", 2, {0, 0, 0.16});
    site("ear_l", 2, {0, 0.08, 0.06});
    site("ear_r", 2, {0, -0.08, 0.06});
    site("knee_l", 3, {0, 0, -0.40});
    site("thigh_l_fwd", 3, {0.04, 0, -0.20});
    site("ankle_l", 4, {0, 0, -0.42});
    site("shin_l", 4, {0.03, 0, -0.20});
    site("toe_l", 5, {0.16, 0, -0.04});
    site("heel_l", 5, {-0.05, 0, -0.04});
    site("knee_r", 6, {0, 0, -0.40});
    site("thigh_r_fwd", 6, {0.04, 0, -0.20});
    site("ankle_r", 7, {0, 0, -0.42});
    site("shin_r", 7, {0.03, 0, -0.20});
    site("toe_r", 8, {0.16, 0, -0.04});
    site("heel_r", 8, {-0.05, 0, -0.04});

    m.finalize();
    return m;
}

kin::Model humanoid_full() {
    kin::Model m;
    m.name = "humanoid_full";
    m.num_scales = 8;
    kin::Joint root;
    root.type = kin::JointType::FreeRoot;
    int i = 0;
    auto add = [&](const kin::Segment& s) { m.segments.push_back(s); return i++; };
    const int pelvis = add(seg("pelvis", -1, {0, 0, 0}, root, 0));
    const int lumbar = add(seg("lumbar", pelvis, {0, 0, 0.12}, ball(-0.4, 0.4, -0.4, 0.4, -0.5, 0.5), 1));
    const int thorax = add(seg("thorax", lumbar, {0, 0, 0.18}, ball(-0.3, 0.3, -0.3, 0.3, -0.3, 0.3), 1));
    const int neck = add(seg("neck", thorax, {0, 0, 0.22}, ball(-0.5, 0.5, -0.5, 0.5, -0.5, 0.5), 2));
    add(seg("head", neck, {0, 0, 0.10}, ball(-0.6, 0.6, -0.6, 0.6, -0.6, 0.6), 2));
    for (int side = 0; side < 2; ++side) {
        const std::string sfx = side == 0 ? "_l" : "_r";
        const double mir = side == 0 ? 1.0 : -1.0;
        const int sc = 4 + side;
        const int clav = add(seg("clavicle" + sfx, thorax, {0, mir * 0.05, 0.18}, hinge(2, -0.3, 0.3), 3));
        const int uparm = add(seg("upper_arm" + sfx, clav, {0, mir * 0.18, 0},
                                  ball(-2.5, 1.2, -1.5, 1.5, -1.0, 2.6), sc));
        const int forearm = add(seg("forearm" + sfx, uparm, {0, mir * 0.02, -0.30}, hinge(1, -2.6, 0.05), sc));
        add(seg("hand" + sfx, forearm, {0, 0, -0.27}, hinge(0, -0.8, 0.8), sc));
    }
    for (int side = 0; side < 2; ++side) {
        const std::string sfx = side == 0 ? "_l" : "_r";
        const double mir = side == 0 ? 1.0 : -1.0;
        const int sc = 6 + side;
        const int thigh = add(seg("thigh" + sfx, pelvis, {0, mir * 0.10, -0.05},
                                  ball(-0.9, 1.2, -0.5, 0.5, -0.6, 0.6), sc));
        const int shank = add(seg("shank" + sfx, thigh, {0, 0, -0.42}, hinge(1, -2.0, 0.05), sc));
        const int foot = add(seg("foot" + sfx, shank, {0, 0, -0.44}, hinge(1, -0.9, 0.9), sc));
        add(seg("toes" + sfx, foot, {0.16, 0, -0.04}, hinge(1, -0.5, 0.8), sc));
    }
    for (std::size_t s = 0; s < m.segments.size(); ++s) {
        const std::string& n = m.segments[s].name;
        m.sites.push_back({n + "_a", static_cast<int>(s), {0.05, 0.02, 0.0}});
        m.sites.push_back({n + "_b", static_cast<int>(s), {0.0, 0.05, -0.10}});
        m.sites.push_back({n + "_c", static_cast<int>(s), {-0.04, -0.03, -0.18}});
    }
    m.finalize();
    return m;
}

kin::Model pendulum() {
    kin::Model m;
    m.name = "pendulum";
    m.num_scales = 0;
    m.segments.push_back(seg("arm", -1, {0, 0, 1.5}, hinge(1, -0.4, 0.4), -1));
    m.sites.push_back({"lever_a", 0, {0.4, 0, 0}});
    m.sites.push_back({"lever_b", 0, {0.8, 0, 0}});
    m.sites.push_back({"lever_c", 0, {1.2, 0, 0}});
    m.finalize();
    return m;
}

kin::Model resolve_model(const std::string& ref) {
    if (ref == "humanoid_lite") return humanoid_lite();
    if (ref == "humanoid_full") return humanoid_full();
    if (ref == "pendulum") return pendulum();
    return kin::load_model(ref);
}

} // namespace kinvar::synth
