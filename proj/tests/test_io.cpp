#include <doctest.h>

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kinvar/camera.hpp"
#include "kinvar/inference.hpp"
#include "kinvar/kinematics.hpp"
#include "kinvar/observations.hpp"
#include "kinvar/synth.hpp"

#include "helpers.hpp"

using namespace kinvar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("kinvar_io_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const char* name) const { return (path / name).string(); }
};

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

} // namespace

TEST_CASE("observation tables survive a csv round trip bit for bit") {
    TempDir dir;
    ObsTable t;
    t.name = "walk_01";
    t.fps = 29.97;
    t.num_frames = 3;
    t.num_cams = 2;
    t.num_sites = 2;
    t.rows = {
        {0, 0, 0, 12.345678901234567, -0.25, 0.9},
        {0, 1, 1, 1e-17, 1080.0, 0.0},
        {2, 0, 1, 1919.9999999999998, 3.3333333333333335, 1.75},
    };
    t.index();
    save_observations(t, dir.file("obs.csv"));
    const ObsTable r = load_observations(dir.file("obs.csv"));
    CHECK(r.name == t.name);
    CHECK(r.fps == t.fps);
    CHECK(r.num_frames == t.num_frames);
    CHECK(r.num_cams == t.num_cams);
    CHECK(r.num_sites == t.num_sites);
    REQUIRE(r.rows.size() == t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(r.rows[i].frame == t.rows[i].frame);
        CHECK(r.rows[i].cam == t.rows[i].cam);
        CHECK(r.rows[i].site == t.rows[i].site);
        CHECK(std::memcmp(&r.rows[i].u, &t.rows[i].u, sizeof(double)) == 0);
        CHECK(std::memcmp(&r.rows[i].v, &t.rows[i].v, sizeof(double)) == 0);
        CHECK(std::memcmp(&r.rows[i].score, &t.rows[i].score, sizeof(double)) == 0);
    }
    // sparse frames index correctly
    CHECK(r.at_frame(0).size() == 2);
    CHECK(r.at_frame(1).size() == 0);
    CHECK(r.at_frame(2).size() == 1);
}

TEST_CASE("observation loader rejects malformed tables") {
    TempDir dir;
    {
        std::ofstream f(dir.file("bad.csv"));
        f << "# kinvar obs v1 name=x fps=20 frames=2 cams=1 sites=1\n";
        f << "frame,cam,site,u,v,score\n";
        f << "5,0,0,1,2,0.5\n"; // frame out of range
    }
    CHECK_THROWS_AS(load_observations(dir.file("bad.csv")), ParseError);
    CHECK_THROWS_AS(load_observations(dir.file("missing.csv")), Error);
}

TEST_CASE("models survive a json round trip") {
    TempDir dir;
    const kin::Model m = synth::humanoid_lite();
    kin::save_model(m, dir.file("model.json"));
    const kin::Model r = kin::load_model(dir.file("model.json"));
    CHECK(r.name == m.name);
    REQUIRE(r.segments.size() == m.segments.size());
    REQUIRE(r.sites.size() == m.sites.size());
    CHECK(r.num_scales == m.num_scales);
    CHECK(r.dof_count() == m.dof_count());
    for (std::size_t i = 0; i < m.segments.size(); ++i) {
        CHECK(r.segments[i].name == m.segments[i].name);
        CHECK(r.segments[i].parent == m.segments[i].parent);
        CHECK(r.segments[i].joint.type == m.segments[i].joint.type);
        CHECK(r.segments[i].joint.axis == m.segments[i].joint.axis);
        CHECK(r.segments[i].scale_index == m.segments[i].scale_index);
        CHECK(r.segments[i].offset.x == m.segments[i].offset.x);
        CHECK(r.segments[i].offset.y == m.segments[i].offset.y);
        CHECK(r.segments[i].offset.z == m.segments[i].offset.z);
    }
    for (std::size_t i = 0; i < m.sites.size(); ++i) {
        CHECK(r.sites[i].name == m.sites[i].name);
        CHECK(r.sites[i].segment == m.sites[i].segment);
        CHECK(r.sites[i].offset.x == m.sites[i].offset.x);
    }
    // identical poses give identical kinematics
    std::vector<double> theta(static_cast<std::size_t>(m.dof_count()), 0.1);
    std::vector<double> beta(static_cast<std::size_t>(m.beta_size()), 0.0);
    for (int s = 0; s < m.num_scales; ++s) beta[static_cast<std::size_t>(s)] = 1.0;
    const auto a = kin::site_positions(m, theta, beta);
    const auto b = kin::site_positions(r, theta, beta);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(norm(a[i] - b[i]) == 0.0);
}

TEST_CASE("rigs survive a json round trip with exact extrinsics") {
    TempDir dir;
    cam::Rig rig = synth::make_ring_rig(5, 2.5, {0.1, -0.2, 1.0}, 1280, 720, 900);
    rig.cameras[2].k1 = -0.3;
    rig.cameras[2].k2 = 0.04;
    rig.cameras[2].p1 = 1e-4;
    rig.refine[1] = true;
    rig.refine[3] = true;
    cam::save_rig(rig, dir.file("rig.json"));
    const cam::Rig r = cam::load_rig(dir.file("rig.json"));
    REQUIRE(r.cameras.size() == rig.cameras.size());
    REQUIRE(r.refine.size() == rig.refine.size());
    for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
        const auto& a = rig.cameras[i];
        const auto& b = r.cameras[i];
        CHECK(a.name == b.name);
        CHECK(std::memcmp(&a.rvec, &b.rvec, sizeof(Vec3)) == 0);
        CHECK(std::memcmp(&a.tvec, &b.tvec, sizeof(Vec3)) == 0);
        CHECK(a.fx == b.fx);
        CHECK(a.fy == b.fy);
        CHECK(a.cx == b.cx);
        CHECK(a.cy == b.cy);
        CHECK(a.k1 == b.k1);
        CHECK(a.k2 == b.k2);
        CHECK(a.k3 == b.k3);
        CHECK(a.p1 == b.p1);
        CHECK(a.p2 == b.p2);
        CHECK(a.width == b.width);
        CHECK(a.height == b.height);
        CHECK(rig.refine[i] == r.refine[i]);
    }
}

TEST_CASE("ground-truth csv round trips") {
    TempDir dir;
    const std::vector<double> gt = {0.1, -0.2, 0.30000000000000004, 1e-16, 2.5, -3.75};
    synth::save_ground_truth(gt, 3, 2, dir.file("gt.csv"));
    int frames = 0, K = 0;
    const auto r = synth::load_ground_truth(dir.file("gt.csv"), frames, K);
    CHECK(frames == 3);
    CHECK(K == 2);
    CHECK(bits_equal(r, gt));
}

TEST_CASE("fit configs round trip through json with a stable hash") {
    infer::FitConfig c;
    c.rank = 7;
    c.family = lik::Family::HalfCauchy;
    c.hidden = {32, 64};
    c.train_beta = false;
    c.seed = 99;
    c.schedule.total_steps = 1234;
    c.schedule.warmup_sigma = 4.5;
    c.schedule.enable_score_sigma_at = 77;
    const std::string text = infer::fit_config_to_json_text(c);
    const infer::FitConfig r = infer::fit_config_from_json_text(text);
    CHECK(r.rank == c.rank);
    CHECK(r.family == c.family);
    CHECK(r.hidden == c.hidden);
    CHECK(r.train_beta == c.train_beta);
    CHECK(r.seed == c.seed);
    CHECK(r.schedule.total_steps == c.schedule.total_steps);
    CHECK(r.schedule.warmup_sigma == c.schedule.warmup_sigma);
    CHECK(r.schedule.enable_score_sigma_at == c.schedule.enable_score_sigma_at);
    CHECK(infer::config_hash(r) == infer::config_hash(c));
    infer::FitConfig other = c;
    other.seed = 100;
    CHECK(infer::config_hash(other) != infer::config_hash(c));
    CHECK_THROWS_AS(infer::fit_config_from_json_text("{"), ParseError);
}

TEST_CASE("checkpoints round trip parameters, optimizer state and metadata") {
    TempDir dir;
    synth::SynthConfig scfg;
    scfg.name = "ckpt_trial";
    scfg.model = "pendulum";
    scfg.cameras = 2;
    scfg.duration = 0.5;
    scfg.fps = 10;
    scfg.noise = "none";
    scfg.target = {0.5, 0.0, 1.5};
    const synth::Dataset ds = synth::generate(synth::pendulum(), scfg);

    infer::Problem p;
    p.model = ds.model;
    p.rig = ds.rig;
    p.trials = {ds.obs};

    infer::FitConfig cfg;
    cfg.hidden = {8};
    cfg.rank = 1;
    cfg.schedule.total_steps = 10;
    const infer::Session sess(p, cfg);

    infer::Checkpoint ck;
    ck.config = cfg;
    ck.model = p.model;
    ck.rig = p.rig;
    ck.trials.push_back({ds.obs.name, ds.obs.fps, ds.obs.num_frames, ds.obs.num_cams,
                         ds.obs.num_sites});
    ck.params = sess.init_params();
    ck.step = 5;
    ck.recoveries = 2;
    ck.opt.main.m.assign(ck.params.size(), 0.25);
    ck.opt.main.v.assign(ck.params.size(), 0.5);
    ck.opt.main.t = 5;
    ck.opt.psi.m.assign(3, -1.0);
    ck.opt.psi.v.assign(3, 2.0);
    ck.opt.psi.t = 3;

    infer::save_checkpoint(ck, dir.file("ck.json"));
    const infer::Checkpoint r = infer::load_checkpoint(dir.file("ck.json"));

    CHECK(r.step == 5);
    CHECK(r.recoveries == 2);
    CHECK(infer::config_hash(r.config) == infer::config_hash(cfg));
    CHECK(kin::model_to_json_text(r.model) == kin::model_to_json_text(p.model));
    CHECK(cam::rig_to_json_text(r.rig) == cam::rig_to_json_text(p.rig));
    REQUIRE(r.trials.size() == 1);
    CHECK(r.trials[0].name == ds.obs.name);
    CHECK(r.trials[0].frames == ds.obs.num_frames);

    // groups come back in layout order with exact values
    REQUIRE(r.params.size() == ck.params.size());
    REQUIRE(r.params.groups().size() == ck.params.groups().size());
    for (std::size_t g = 0; g < ck.params.groups().size(); ++g) {
        CHECK(r.params.groups()[g].name == ck.params.groups()[g].name);
        CHECK(r.params.groups()[g].offset == ck.params.groups()[g].offset);
        CHECK(r.params.groups()[g].size == ck.params.groups()[g].size);
    }
    CHECK(std::memcmp(r.params.data(), ck.params.data(), ck.params.size() * sizeof(double)) == 0);
    CHECK(bits_equal(r.opt.main.m, ck.opt.main.m));
    CHECK(bits_equal(r.opt.main.v, ck.opt.main.v));
    CHECK(r.opt.main.t == 5);
    CHECK(bits_equal(r.opt.psi.m, ck.opt.psi.m));
    CHECK(r.opt.psi.t == 3);

    CHECK_THROWS_AS(infer::load_checkpoint(dir.file("nope.json")), Error);
}
