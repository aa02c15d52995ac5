#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <thread>

#include "kinvar/inference.hpp"

namespace kinvar::infer {

namespace {

struct BlockOut {
    std::vector<double> grad;
    double elbo = 0, entropy = 0, loglik = 0, prior = 0;
    int masked = 0;
    int weight = 0; // frames in this block
    bool failed = false;
    std::string error;
};

void run_block(ad::Tape& tape, const Session& sess, const ad::ParamVector& params, int trial,
               std::span<const int> frames, Rng rng, const BlockFlags& flags, double seed_scale,
               BlockOut& out) {
    out.failed = false;
    out.weight = static_cast<int>(frames.size());
    try {
        tape.clear();
        const BlockResult r = record_elbo(tape, sess, params, trial, frames, rng, flags);
        // loss is normalized by this block's frame count; rescale so blocks
        // sum to the batch mean
        tape.backward(r.loss.id, seed_scale * static_cast<double>(frames.size()));
        std::fill(out.grad.begin(), out.grad.end(), 0.0);
        const auto& pg = params.group(Session::net_group(trial));
        tape.add_input_adjoints(r.in_net, {out.grad.data() + pg.offset, pg.size});
        const auto& bg = params.group("beta");
        tape.add_input_adjoints(r.in_beta, {out.grad.data() + bg.offset, bg.size});
        const auto& sg = params.group("psi");
        tape.add_input_adjoints(r.in_psi, {out.grad.data() + sg.offset, sg.size});
        const auto& dg = params.group("delta");
        for (std::size_t i = 0; i < r.in_delta.size(); ++i)
            tape.add_input_adjoints(r.in_delta[i], {out.grad.data() + dg.offset + 3 * i, 3});
        out.elbo = r.elbo * frames.size();
        out.entropy = r.entropy * frames.size();
        out.loglik = r.loglik * frames.size();
        out.prior = r.prior * frames.size();
        out.masked = r.masked;
    } catch (const NumericError& e) {
        out.failed = true;
        out.error = e.what();
    }
}

} // namespace

FitResult fit(const Problem& p, const FitConfig& c, const std::string& checkpoint_path,
              const std::function<void(const StepStats&)>& on_log) {
    Session sess(p, c);
    const Schedule& sch = c.schedule;
    ad::ParamVector params = sess.init_params();
    const std::size_t NP = params.size();

    const auto& beta_g = params.group("beta");
    const auto& delta_g = params.group("delta");
    const auto& psi_g = params.group("psi");
    const std::size_t main_end = c.train_beta ? beta_g.offset + beta_g.size : beta_g.offset;
    const std::size_t wd_end = beta_g.offset; // decay net weights only

    opt::Adam main_opt(main_end, sch.adam_beta1, sch.adam_beta2, sch.adam_eps);
    opt::Adam delta_opt(delta_g.size, sch.adam_beta1, sch.adam_beta2, sch.adam_eps);
    opt::Adam psi_opt(psi_g.size, 0.9, 0.999, sch.adam_eps);

    constexpr int kBlocks = 8; // fixed partition width; also the useful thread cap
    const int NT = std::min(c.resolve_threads(), kBlocks);
    std::vector<std::unique_ptr<ad::Tape>> tapes;
    for (int i = 0; i < NT; ++i) tapes.push_back(std::make_unique<ad::Tape>());
    std::vector<BlockOut> blocks(static_cast<std::size_t>(kBlocks));
    for (auto& b : blocks) b.grad.assign(NP, 0.0);

    std::vector<double> grad(NP, 0.0);
    FitResult result;
    result.params = params;

    Checkpoint ckpt;
    bool have_ckpt = false;
    auto snapshot = [&](int step_now) {
        ckpt.config = c;
        ckpt.model = p.model;
        ckpt.rig = p.rig;
        ckpt.trials.clear();
        for (const ObsTable& t : p.trials)
            ckpt.trials.push_back({t.name, t.fps, t.num_frames, t.num_cams, t.num_sites});
        ckpt.params = params;
        ckpt.step = step_now;
        ckpt.recoveries = result.recoveries;
        ckpt.opt.main = main_opt.state();
        ckpt.opt.delta = delta_opt.state();
        ckpt.opt.psi = psi_opt.state();
        have_ckpt = true;
        if (!checkpoint_path.empty()) save_checkpoint(ckpt, checkpoint_path);
    };

    int step = 0;
    while (step < sch.total_steps) {
        const double lr = sch.lr_at(step);
        BlockFlags flags;
        flags.score_sigma = step >= sch.enable_score_sigma_at;
        flags.fixed_sigma = sch.warmup_sigma;
        flags.extrinsics = step >= sch.unfreeze_extrinsics_at && !sess.refined_cams().empty();

        const std::uint64_t step_key =
            (static_cast<std::uint64_t>(result.recoveries) << 40) ^ static_cast<std::uint64_t>(step);
        Rng step_rng = Rng(c.seed).substream(step_key);

        std::fill(grad.begin(), grad.end(), 0.0);
        double st_elbo = 0, st_entropy = 0, st_loglik = 0, st_prior = 0;
        int st_masked = 0, st_frames = 0;
        bool diverged = false;
        std::string divergence_msg;

        for (int trial = 0; trial < sess.trial_count() && !diverged; ++trial) {
            Rng trial_rng = step_rng.substream(static_cast<std::uint64_t>(trial));
            Rng frame_rng = trial_rng.substream(99);
            const ObsTable& obs = p.trials[static_cast<std::size_t>(trial)];
            const std::vector<int> batch =
                pick_frames(obs.num_frames, sch.timesteps_per_step, frame_rng);
            const int B = static_cast<int>(batch.size());
            st_frames += B;

            // contiguous partition into a fixed number of blocks.  The block
            // structure (and the in-order reduction below) must not depend on
            // the thread count, so results are bitwise identical for any NT;
            // threads just pick up blocks round-robin.
            std::vector<std::pair<int, int>> spans;
            const int base = B / kBlocks, rem = B % kBlocks;
            int at = 0;
            for (int b = 0; b < kBlocks; ++b) {
                const int len = base + (b < rem ? 1 : 0);
                if (len > 0) spans.push_back({at, len});
                at += len;
            }

            auto work = [&](std::size_t worker) {
                for (std::size_t bi = worker; bi < spans.size(); bi += static_cast<std::size_t>(NT)) {
                    const auto [off, len] = spans[bi];
                    // same base stream everywhere; record_elbo re-keys per frame
                    Rng brng = trial_rng.substream(100);
                    run_block(*tapes[worker], sess, params, trial,
                              std::span<const int>(batch.data() + off, static_cast<std::size_t>(len)),
                              brng, flags, 1.0 / static_cast<double>(B), blocks[bi]);
                }
            };

            if (NT == 1 || spans.size() == 1) {
                work(0);
            } else {
                std::vector<std::thread> threads;
                const std::size_t workers = std::min(spans.size(), static_cast<std::size_t>(NT));
                for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work, w);
                work(0);
                for (auto& t : threads) t.join();
            }

            for (std::size_t bi = 0; bi < spans.size(); ++bi) {
                BlockOut& bo = blocks[bi];
                if (bo.failed) {
                    diverged = true;
                    divergence_msg = bo.error;
                    break;
                }
                for (std::size_t i = 0; i < NP; ++i) grad[i] += bo.grad[i];
                st_elbo += bo.elbo;
                st_entropy += bo.entropy;
                st_loglik += bo.loglik;
                st_prior += bo.prior;
                st_masked += bo.masked;
            }
        }

        if (diverged) {
            ++result.recoveries;
            if (result.recoveries > 50) {
                if (!checkpoint_path.empty() && !have_ckpt) snapshot(step);
                throw DivergenceError("fit: too many divergence recoveries; last failure: " +
                                      divergence_msg);
            }
            if (have_ckpt) {
                params = ckpt.params;
                main_opt.load(ckpt.opt.main);
                delta_opt.load(ckpt.opt.delta);
                psi_opt.load(ckpt.opt.psi);
                step = ckpt.step;
            } else {
                params = sess.init_params();
                main_opt = opt::Adam(main_end, sch.adam_beta1, sch.adam_beta2, sch.adam_eps);
                delta_opt = opt::Adam(delta_g.size, sch.adam_beta1, sch.adam_beta2, sch.adam_eps);
                psi_opt = opt::Adam(psi_g.size, 0.9, 0.999, sch.adam_eps);
                step = 0;
            }
            continue;
        }

        // gradient ascent on the elbo == descent on the recorded loss
        main_opt.step({params.data(), main_end}, {grad.data(), main_end}, lr,
                      sch.weight_decay, wd_end);
        if (flags.extrinsics && delta_g.size > 0)
            delta_opt.step(params.span("delta"), {grad.data() + delta_g.offset, delta_g.size}, lr,
                           0.0, 0);
        if (flags.score_sigma && step >= sch.unfreeze_psi_at)
            psi_opt.step(params.span("psi"), {grad.data() + psi_g.offset, psi_g.size}, sch.psi_lr,
                         0.0, 0);

        if (step % c.log_every == 0 || step + 1 == sch.total_steps) {
            StepStats ss;
            ss.step = step;
            ss.lr = lr;
            const double nf = st_frames > 0 ? static_cast<double>(st_frames) : 1.0;
            ss.elbo = st_elbo / nf;
            ss.entropy = st_entropy / nf;
            ss.loglik = st_loglik / nf;
            ss.prior = st_prior / nf;
            double g2 = 0;
            for (double g : grad) g2 += g * g;
            ss.grad_norm = std::sqrt(g2);
            ss.masked = st_masked;
            ss.recoveries = result.recoveries;
            result.log.push_back(ss);
            if (on_log) on_log(ss);
        }

        ++step;
        if (step % sch.checkpoint_every == 0 || step == sch.total_steps) snapshot(step);
    }

    result.params = params;
    return result;
}

void save_convergence_log(std::span<const StepStats> log, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write convergence log '" + path + "'");
    std::fprintf(f, "# kinvar convergence v1\n");
    std::fprintf(f, "step,lr,elbo,entropy,loglik,prior,grad_norm,masked,recoveries\n");
    for (const StepStats& s : log)
        std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", s.step, s.lr, s.elbo,
                     s.entropy, s.loglik, s.prior, s.grad_norm, s.masked, s.recoveries);
    std::fclose(f);
}

} // namespace kinvar::infer
