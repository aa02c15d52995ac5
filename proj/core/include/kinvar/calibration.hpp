#pragma once

// Keypoint predictive distribution and its calibration.  The pose posterior
// is pushed into image space to first order (covariance J Sigma J^T around
// the exact projection of the mean), combined with the clipped likelihood
// width, and checked against observed errors via the Rayleigh probability
// integral transform: c = 1 - exp(-err^2 / (2 sigma^2)).  ECE is the mean
// absolute gap between the sorted transforms and the diagonal of the p-p
// plot.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kinvar/camera.hpp"
#include "kinvar/inference.hpp"
#include "kinvar/kinematics.hpp"
#include "kinvar/observations.hpp"
#include "kinvar/posterior.hpp"

namespace kinvar::calib {

struct KeypointPredictive {
    int site = 0;
    double u = 0, v = 0;                     // exact projection of the mean
    double cov00 = 0, cov01 = 0, cov11 = 0;  // pushforward covariance, px^2
    bool behind = false;                     // flagged and skipped downstream
};

// one entry per site: mean = project(forward(mu)), covariance = J Sigma J^T
// with J the 2xK Jacobian of projection∘kinematics at mu and
// Sigma = diag(d^2) + U U^T
std::vector<KeypointPredictive> pushforward(const kin::Model& model, std::span<const double> beta,
                                            const cam::Camera& camera, const post::Moments& m,
                                            int rank);

// isotropic predictive scale: posterior pixel variance (diagonal average, or
// squared average of the stds with `average_stds`) plus the clipped
// likelihood width in quadrature
double predictive_scale(double cov00, double cov11, double sigma_like, double sigma_clip,
                        bool average_stds = false);

// indices of the `fraction` lowest-noise-score rows (ties broken by the
// canonical frame/cam/site order); needs at least 20 rows
std::vector<std::size_t> select_pseudo_gt(const ObsTable& obs, double fraction = 0.05);

struct EceCurve {
    double ece = 0;
    int n = 0;
    std::vector<double> c;   // sorted PIT values; plotted against p_i=(i+1)/n
};

// err and sigma aligned; sigma=0 maps err>0 to c=1 and err=0 to c=0
EceCurve ece(std::span<const double> err, std::span<const double> sigma);

// per-keypoint ingredients collected once per fit; clips are applied later
struct PredictivePair {
    int frame = 0, cam = 0, site = 0;
    double err = 0;         // | observed - predicted mean |, px
    double cov_avg = 0;     // posterior pixel variance term, px^2
    double sigma_like = 0;  // learned width at the row's score, px
};

std::vector<PredictivePair> collect_pairs(const infer::Session& sess,
                                          const ad::ParamVector& params, int trial,
                                          double fraction = 0.05, bool average_stds = false);

struct EceReport {
    double sigma_clip = 0;
    double fraction = 0.05;
    EceCurve curve;
};

// pooled over all trials, one report per clip
std::vector<EceReport> ece_report(const infer::Session& sess, const ad::ParamVector& params,
                                  std::span<const double> clips, double fraction = 0.05,
                                  bool average_stds = false);

void save_ece_report(std::span<const EceReport> reports, const std::string& path);

} // namespace kinvar::calib
