#pragma once

// Uncertainty summaries over a fitted session: sampled spatial confidence
// intervals per site (radial distance to the geometric median, 50th/95th
// percentile per frame, averaged over time), per-dof posterior-std
// percentiles, and the time-averaged correlation structure.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kinvar/inference.hpp"

namespace kinvar::metrics {

struct SpatialSummary {
    std::vector<std::string> site;      // parallel arrays, one entry per site
    std::vector<double> p50_mm;
    std::vector<double> p95_mm;
    int samples = 0;
    int frames = 0;
    int fallback_frames = 0;            // Weiszfeld fell back to coord median
};

// draws n_samples poses per frame from q_t and summarizes the spread of each
// site position around its geometric median
SpatialSummary spatial_errors(const infer::Session& sess, const ad::ParamVector& params, int trial,
                              int n_samples = 250, std::uint64_t seed = 1);

// marginal posterior std per dof per frame: frames x K row-major, in the
// dof's natural unit (radians / meters).  `frames` empty = all frames.
std::vector<double> posterior_std_series(const infer::Session& sess, const ad::ParamVector& params,
                                         int trial, std::span<const int> frames = {});

// mean H(q_t) over the given frames (empty = all)
double mean_entropy(const infer::Session& sess, const ad::ParamVector& params, int trial,
                    std::span<const int> frames = {});

// frames that still carry at least one observation (e.g. after camera
// subsetting with a joint-visibility filter)
std::vector<int> frames_with_observations(const ObsTable& obs);

struct JointSummary {
    std::vector<double> p50;            // per dof, degrees (translations: mm)
    std::vector<double> p95;
    std::vector<bool> translational;
};

JointSummary joint_angle_summary(const infer::Session& sess, const ad::ParamVector& params,
                                 int trial, std::span<const int> frames = {});

// per-trial mean-over-time correlation matrices, then the elementwise median
// of their absolute values across trials; K x K row-major
std::vector<double> correlation_aggregate(const infer::Session& sess,
                                          const ad::ParamVector& params);

// csv writers for the report command
void save_spatial_summary(const SpatialSummary& s, const std::string& path);
void save_joint_summary(const JointSummary& s, std::span<const std::string> dof_names,
                        const std::string& path);
void save_matrix(std::span<const double> m, int rows, int cols, const std::string& path);

// dof display names derived from segment names ("pelvis.tx", "torso.r0", ...)
std::vector<std::string> dof_names(const kin::Model& m);

} // namespace kinvar::metrics
