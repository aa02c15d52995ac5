#pragma once

// Stochastic variational fit: maximizes a per-timestep-averaged evidence
// lower bound
//   ELBO_t = H(q_t) + E_{theta ~ q_t}[ log p(obs_t | theta) + log p(theta) ]
// over minibatches of timesteps, with reparameterized sampling, AdamW on the
// trajectory nets / shape, a separate Adam for the score-noise parameters,
// and staged unfreezing (fixed-sigma warmup, later score-sigma, later
// extrinsics).

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinvar/camera.hpp"
#include "kinvar/kinematics.hpp"
#include "kinvar/likelihood.hpp"
#include "kinvar/observations.hpp"
#include "kinvar/optim.hpp"
#include "kinvar/param_vector.hpp"
#include "kinvar/posterior.hpp"
#include "kinvar/rng.hpp"
#include "kinvar/tape.hpp"

namespace kinvar::infer {

struct Schedule {
    int total_steps = 30000;
    double lr_start = 1e-3;
    double lr_end = 1e-8;
    double adam_beta1 = 0.8;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-5;     // net weights only
    double psi_lr = 1e-3;
    int enable_score_sigma_at = 2500;
    double warmup_sigma = 10.0;     // pixels, used before score sigma turns on
    int unfreeze_psi_at = 7000;
    int unfreeze_extrinsics_at = 10000;
    int samples_per_step = 8;
    int timesteps_per_step = 100;
    int checkpoint_every = 1000;

    double lr_at(int step) const;   // exponential decay lr_start -> lr_end
};

struct FitConfig {
    Schedule schedule;
    lik::Family family = lik::Family::Exponential;
    int rank = 5;
    std::vector<int> hidden{128, 256, 512, 1024};
    bool train_beta = true;
    std::uint64_t seed = 1;
    int threads = 0;                // 0: KINVAR_THREADS env var, default 1
    int log_every = 50;

    int resolve_threads() const;
};

std::string fit_config_to_json_text(const FitConfig& c);
FitConfig fit_config_from_json_text(const std::string& text);
std::string config_hash(const FitConfig& c); // fnv1a-64 hex of canonical json

struct Problem {
    kin::Model model;
    cam::Rig rig;
    std::vector<ObsTable> trials;
};

// Parameter layout + per-trial nets for one problem/config pair.
// Group order in the flat vector: net0..netN-1, beta, delta, psi.
class Session {
public:
    Session(const Problem& p, const FitConfig& c);

    const Problem& problem() const { return *prob_; }
    const FitConfig& config() const { return cfg_; }
    int trial_count() const { return static_cast<int>(nets_.size()); }
    const post::TrajectoryNet& net(int trial) const { return nets_[static_cast<std::size_t>(trial)]; }

    const std::vector<int>& refined_cams() const { return refined_; }

    ad::ParamVector init_params() const; // deterministic from config seed

    static std::string net_group(int trial) { return "net" + std::to_string(trial); }

private:
    const Problem* prob_;
    FitConfig cfg_;
    std::vector<post::TrajectoryNet> nets_;
    std::vector<int> refined_;
};

// ---- single-block ELBO recording (exposed for tests; fit uses it too) ----

struct BlockFlags {
    bool score_sigma = true;     // false: fixed warmup sigma
    double fixed_sigma = 10.0;
    bool extrinsics = false;     // record refined-camera deltas as inputs
};

struct BlockResult {
    ad::Value loss;              // -(1/n_frames) * sum_f ELBO_f
    double elbo = 0;             // mean over the block's frames
    double entropy = 0;          // mean entropy term
    double loglik = 0;           // mean expected log-likelihood term
    double prior = 0;            // mean expected log-prior term
    int masked = 0;              // observations skipped (behind a camera)
    // tape input ids for gradient extraction
    ad::Tape::id_t in_net = 0, in_beta = 0, in_psi = 0;
    std::vector<ad::Tape::id_t> in_delta; // per refined camera
};

BlockResult record_elbo(ad::Tape& tape, const Session& sess, const ad::ParamVector& params,
                        int trial, std::span<const int> frames, Rng& noise,
                        const BlockFlags& flags);

// ---- fit ----

struct StepStats {
    int step = 0;
    double lr = 0;
    double elbo = 0, entropy = 0, loglik = 0, prior = 0;
    double grad_norm = 0;
    int masked = 0;
    int recoveries = 0;
};

struct FitResult {
    ad::ParamVector params;
    std::vector<StepStats> log;
    int recoveries = 0;
};

// evenly spaced frames with a random phase
std::vector<int> pick_frames(int num_frames, int count, Rng& rng);

FitResult fit(const Problem& p, const FitConfig& c, const std::string& checkpoint_path = "",
              const std::function<void(const StepStats&)>& on_log = nullptr);

// convergence log CSV (step,lr,elbo,entropy,loglik,prior,grad_norm,masked,recoveries)
void save_convergence_log(std::span<const StepStats> log, const std::string& path);

// ---- evaluation at the posterior mean ----

struct TrialEval {
    double mean_reproj = 0;     // pixels, over present in-front observations
    double mean_entropy = 0;    // nats, mean over frames
    int obs_used = 0;
    int obs_behind = 0;
};

TrialEval evaluate_fit(const Session& sess, const ad::ParamVector& params, int trial);

// ---- checkpoints ----

struct OptStateBundle {
    opt::AdamState main, delta, psi;
};

struct Checkpoint {
    FitConfig config;
    kin::Model model;
    cam::Rig rig;
    struct TrialMeta {
        std::string name;
        double fps = 0;
        int frames = 0, cams = 0, sites = 0;
    };
    std::vector<TrialMeta> trials;
    ad::ParamVector params;     // groups as Session lays them out
    int step = 0;
    int recoveries = 0;
    OptStateBundle opt;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace kinvar::infer
