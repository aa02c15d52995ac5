#pragma once

// Synthetic multiview keypoint data: ground-truth trajectories driven by
// per-dof sinusoids, ring/linear camera rigs, and score-dependent radial
// noise from the same families the likelihood models.  The generator is the
// fixture factory for integration tests and ablation sweeps: it emits the
// exact file formats inference consumes, plus the ground truth.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kinvar/camera.hpp"
#include "kinvar/kinematics.hpp"
#include "kinvar/observations.hpp"
#include "kinvar/rng.hpp"

namespace kinvar::synth {

// theta_k(t) = center + amplitude * sin(2*pi*frequency*t + phase)
struct Wave {
    double center = 0;
    double amplitude = 0;
    double frequency = 0;   // Hz
    double phase = 0;
};

// all observations from camera `cam` are dropped for t in [t0, t1)
struct Occlusion {
    int cam = 0;
    double t0 = 0, t1 = 0;
};

struct SynthConfig {
    std::string name = "synthetic";
    // bundled model name ("humanoid_lite" | "humanoid_full" | "pendulum") or
    // a model json path, resolved by the caller via resolve_model()
    std::string model = "humanoid_lite";

    std::string rig_kind = "ring";          // "ring" | "linear"
    int cameras = 8;
    double radius = 3.0;                    // m from the subject
    int image_width = 1920, image_height = 1080;
    double focal = 1200;                    // px
    std::array<double, 3> target{0, 0, 1};  // rig look-at point

    std::vector<Wave> waves;                // per dof; empty = defaults from limits

    double duration = 10.0;                 // s
    double fps = 20.0;

    // "none" | "exponential" | "half_cauchy" | "half_normal" | "gaussian"
    // ("gaussian" = isotropic 2-D normal, i.e. Rayleigh radial error)
    std::string noise = "exponential";
    std::array<double, 3> sigma_coeff{1.0, 2.0, 0.0};  // sigma_true(s) px
    double score_max = 2.0;                 // scores ~ U[0, score_max]
    bool anisotropic = false;               // stressor: squeeze the v component

    std::vector<Occlusion> occlusions;
    double inject_px = 0.0;                 // extra score-blind noise, applied last
    std::vector<std::string> camera_subset; // empty = keep all
    bool require_joint_visibility = false;  // with camera_subset

    std::uint64_t seed = 1;
};

struct Dataset {
    kin::Model model;
    cam::Rig rig;
    ObsTable obs;
    std::vector<double> gt_theta;   // num_frames x K, row-major
    std::vector<double> gt_beta;
    std::vector<double> gt_sites;   // num_frames x J x 3 world positions
    int num_frames = 0;
    int behind = 0;                 // projections dropped behind a camera
};

// cameras on a circle of the given radius around `target`, equally spaced,
// all looking at it
cam::Rig make_ring_rig(int cameras, double radius, const std::array<double, 3>& target,
                       int width, int height, double focal);
// cameras spread along a line at distance `radius`, all looking at `target`
cam::Rig make_linear_rig(int cameras, double radius, const std::array<double, 3>& target,
                         int width, int height, double focal);

// in-limit sinusoids: bounded dofs oscillate about the limit midpoint,
// unbounded root dofs follow a gentle drift around `target`
std::vector<Wave> default_waves(const kin::Model& m, const std::array<double, 3>& target);

// ground truth at frame times; throws if a wave violates its dof's limits
std::vector<double> ground_truth(const kin::Model& m, const std::vector<Wave>& waves,
                                 int num_frames, double fps);

Dataset generate(const kin::Model& model, const SynthConfig& cfg);

// adds independent radial noise (exponential with the given mean, uniform
// direction) to the pixel coordinates; scores are untouched
ObsTable inject_noise(const ObsTable& obs, double extra_px, std::uint64_t seed);

// keeps only the named cameras (renumbered in rig order); optionally keeps
// only frames observed by every retained camera
std::pair<ObsTable, cam::Rig> subset_cameras(const ObsTable& obs, const cam::Rig& rig,
                                             const std::vector<std::string>& names,
                                             bool require_joint_visibility);

// SynthConfig JSON round trip
SynthConfig synth_config_from_json_text(const std::string& text);
std::string synth_config_to_json_text(const SynthConfig& c);

// ground-truth pose CSV (frame, theta_0..theta_{K-1})
void save_ground_truth(std::span<const double> gt_theta, int num_frames, int K,
                       const std::string& path);
std::vector<double> load_ground_truth(const std::string& path, int& num_frames, int& K);

// ---- bundled models ----

// 9 segments / 16 dofs / 21 sites / 4 scale groups: enough articulation to
// exercise every joint type without paper-scale cost
kin::Model humanoid_lite();
// 21 segments / 42 dofs / 63 sites / 8 scale groups, benchmark-sized
kin::Model humanoid_full();
// anchored 1-dof hinge arm with collinear lever sites; with a distant camera
// the observation map is nearly affine in the single angle
kin::Model pendulum();

// bundled name -> builtin model; anything else is treated as a json path
kin::Model resolve_model(const std::string& ref);

} // namespace kinvar::synth
