#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "kinvar/inference.hpp"
#include "kinvar/scalar_ops.hpp"

namespace kinvar::infer {

using nlohmann::json;
using ad::Tape;
using ad::Value;

double Schedule::lr_at(int step) const {
    if (total_steps <= 1) return lr_start;
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return lr_start * std::pow(lr_end / lr_start, frac);
}

int FitConfig::resolve_threads() const {
    if (threads > 0) return threads;
    if (const char* e = std::getenv("KINVAR_THREADS")) {
        const int n = std::atoi(e);
        if (n > 0) return n;
    }
    return 1;
}

// ---- config json ----

static json schedule_to_json(const Schedule& s) {
    json j;
    j["total_steps"] = s.total_steps;
    j["lr_start"] = s.lr_start;
    j["lr_end"] = s.lr_end;
    j["adam_beta1"] = s.adam_beta1;
    j["adam_beta2"] = s.adam_beta2;
    j["adam_eps"] = s.adam_eps;
    j["weight_decay"] = s.weight_decay;
    j["psi_lr"] = s.psi_lr;
    j["enable_score_sigma_at"] = s.enable_score_sigma_at;
    j["warmup_sigma"] = s.warmup_sigma;
    j["unfreeze_psi_at"] = s.unfreeze_psi_at;
    j["unfreeze_extrinsics_at"] = s.unfreeze_extrinsics_at;
    j["samples_per_step"] = s.samples_per_step;
    j["timesteps_per_step"] = s.timesteps_per_step;
    j["checkpoint_every"] = s.checkpoint_every;
    return j;
}

static Schedule schedule_from_json(const json& j) {
    Schedule s;
    s.total_steps = j.value("total_steps", s.total_steps);
    s.lr_start = j.value("lr_start", s.lr_start);
    s.lr_end = j.value("lr_end", s.lr_end);
    s.adam_beta1 = j.value("adam_beta1", s.adam_beta1);
    s.adam_beta2 = j.value("adam_beta2", s.adam_beta2);
    s.adam_eps = j.value("adam_eps", s.adam_eps);
    s.weight_decay = j.value("weight_decay", s.weight_decay);
    s.psi_lr = j.value("psi_lr", s.psi_lr);
    s.enable_score_sigma_at = j.value("enable_score_sigma_at", s.enable_score_sigma_at);
    s.warmup_sigma = j.value("warmup_sigma", s.warmup_sigma);
    s.unfreeze_psi_at = j.value("unfreeze_psi_at", s.unfreeze_psi_at);
    s.unfreeze_extrinsics_at = j.value("unfreeze_extrinsics_at", s.unfreeze_extrinsics_at);
    s.samples_per_step = j.value("samples_per_step", s.samples_per_step);
    s.timesteps_per_step = j.value("timesteps_per_step", s.timesteps_per_step);
    s.checkpoint_every = j.value("checkpoint_every", s.checkpoint_every);
    return s;
}

json fit_config_to_json(const FitConfig& c) {
    json j;
    j["schedule"] = schedule_to_json(c.schedule);
    j["family"] = lik::family_name(c.family);
    j["rank"] = c.rank;
    j["hidden"] = c.hidden;
    j["train_beta"] = c.train_beta;
    j["seed"] = c.seed;
    j["log_every"] = c.log_every;
    return j;
}

std::string fit_config_to_json_text(const FitConfig& c) { return fit_config_to_json(c).dump(2) + "\n"; }

FitConfig fit_config_from_json_obj(const json& j) {
    FitConfig c;
    if (j.contains("schedule")) c.schedule = schedule_from_json(j["schedule"]);
    if (j.contains("family")) c.family = lik::family_from_string(j["family"].get<std::string>());
    c.rank = j.value("rank", c.rank);
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<int>>();
    c.train_beta = j.value("train_beta", c.train_beta);
    c.seed = j.value("seed", c.seed);
    c.log_every = j.value("log_every", c.log_every);
    if (c.rank < 0) throw ParseError("config: rank must be >= 0");
    if (c.hidden.empty()) throw ParseError("config: hidden layers must be non-empty");
    return c;
}

FitConfig fit_config_from_json_text(const std::string& text) {
    try {
        return fit_config_from_json_obj(json::parse(text));
    } catch (const json::exception& e) {
        throw ParseError(std::string("config json: ") + e.what());
    }
}

std::string config_hash(const FitConfig& c) {
    const std::string s = fit_config_to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- session ----

Session::Session(const Problem& p, const FitConfig& c) : prob_(&p), cfg_(c) {
    if (p.trials.empty()) throw Error("session: no trials");
    p.rig.validate();
    std::vector<post::Bound> bounds;
    for (const kin::Dof& d : p.model.dofs) bounds.push_back({d.bounded, d.lo, d.hi});
    for (const ObsTable& t : p.trials) {
        if (t.num_sites != p.model.site_count())
            throw Error("trial '" + t.name + "': site count does not match the model");
        if (t.num_cams != static_cast<int>(p.rig.cameras.size()))
            throw Error("trial '" + t.name + "': camera count does not match the rig");
        post::NetConfig nc;
        nc.K = p.model.dof_count();
        nc.R = c.rank;
        nc.hidden = c.hidden;
        nc.duration = t.duration();
        nc.enc_B = post::NetConfig::freq_bands(nc.duration);
        nc.bounds = bounds;
        nets_.emplace_back(nc);
    }
    for (std::size_t i = 0; i < p.rig.cameras.size(); ++i)
        if (i < p.rig.refine.size() && p.rig.refine[i]) refined_.push_back(static_cast<int>(i));
}

ad::ParamVector Session::init_params() const {
    ad::ParamVector pv;
    Rng root(cfg_.seed);
    for (int i = 0; i < trial_count(); ++i) {
        pv.add_group(net_group(i), nets_[static_cast<std::size_t>(i)].weight_count());
        Rng r = root.substream(0x11000 + static_cast<std::uint64_t>(i));
        nets_[static_cast<std::size_t>(i)].init_weights(pv.span(net_group(i)), r);
    }
    pv.add_group("beta", static_cast<std::size_t>(prob_->model.beta_size()));
    {
        auto b = pv.span("beta");
        for (int s = 0; s < prob_->model.num_scales; ++s) b[static_cast<std::size_t>(s)] = 1.0;
    }
    pv.add_group("delta", 3 * refined_.size());
    pv.add_group("psi", static_cast<std::size_t>(lik::kPsiSize));
    return pv;
}

// ---- ELBO recording ----

namespace {

struct CamOnTape {
    const cam::Camera* cam = nullptr;
    bool refined = false;
    // refined path: rotation entries and translation as tape nodes
    M3<Value> R;
    V3<Value> t;
    // fixed path: plain constants
    Mat3 R0;
};

// log p(theta): zero inside the limits, steep quadratic just outside
constexpr double kPriorWidth = 0.01; // radians of slack per unit penalty
constexpr double kPriorCoef = -1.0 / (kPriorWidth * kPriorWidth);

} // namespace

BlockResult record_elbo(Tape& tape, const Session& sess, const ad::ParamVector& params,
                        int trial, std::span<const int> frames, Rng& noise,
                        const BlockFlags& flags) {
    const Problem& prob = sess.problem();
    const post::TrajectoryNet& net = sess.net(trial);
    const kin::Model& model = prob.model;
    const ObsTable& obs = prob.trials[static_cast<std::size_t>(trial)];
    const lik::Family family = sess.config().family;
    const int K = model.dof_count();
    const int R = sess.config().rank;
    const int S = sess.config().schedule.samples_per_step;

    BlockResult out;

    // load inputs (contiguous per group)
    out.in_net = tape.inputs(params.span(Session::net_group(trial)));
    out.in_beta = tape.inputs(params.span("beta"));
    out.in_psi = tape.inputs(params.span("psi"));
    std::vector<Value> beta_vals(static_cast<std::size_t>(model.beta_size()));
    for (std::size_t i = 0; i < beta_vals.size(); ++i)
        beta_vals[i] = Value{&tape, static_cast<Tape::id_t>(out.in_beta + i)};

    // cameras: fixed extrinsics use constants; refined ones get delta inputs
    std::vector<CamOnTape> cams(prob.rig.cameras.size());
    {
        std::size_t r_idx = 0;
        for (std::size_t ci = 0; ci < prob.rig.cameras.size(); ++ci) {
            CamOnTape& ct = cams[ci];
            ct.cam = &prob.rig.cameras[ci];
            ct.R0 = rodrigues(ct.cam->rvec);
            const bool want = flags.extrinsics && ci < prob.rig.refine.size() && prob.rig.refine[ci];
            if (want) {
                const double* dsrc = params.span("delta").data() + 3 * r_idx;
                const Tape::id_t d0 = tape.inputs(std::span<const double>(dsrc, 3));
                out.in_delta.push_back(d0);
                ++r_idx;
                tape.push_scope("extrinsics");
                const V3<Value> dv{Value{&tape, d0}, Value{&tape, d0 + 1}, Value{&tape, d0 + 2}};
                const M3<Value> Rd = cam::delta_rotation<Value>(dv);
                ct.R = mat_mul_const(Rd, ct.R0);
                for (int row = 0; row < 3; ++row) {
                    const double tx = ct.cam->tvec.x, ty = ct.cam->tvec.y, tz = ct.cam->tvec.z;
                    Value* slot = row == 0 ? &ct.t.x : row == 1 ? &ct.t.y : &ct.t.z;
                    *slot = lincomb3(Rd.m[3 * row], Rd.m[3 * row + 1], Rd.m[3 * row + 2], tx, ty, tz);
                }
                tape.pop_scope();
                ct.refined = true;
            }
        }
    }

    // score-sigma pieces shared across the block
    Value sp0, sp1, sp2, warm_sigma;
    if (flags.score_sigma) {
        sp0 = softplus(Value{&tape, out.in_psi});
        sp1 = softplus(Value{&tape, static_cast<Tape::id_t>(out.in_psi + 1)});
        sp2 = softplus(Value{&tape, static_cast<Tape::id_t>(out.in_psi + 2)});
    } else {
        warm_sigma = Value{&tape, tape.constant(flags.fixed_sigma)};
    }

    // trajectory moments for the whole block at once
    std::vector<double> times(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) times[i] = obs.frame_time(frames[i]);
    const auto moments = net.record_batch(tape, out.in_net, times);

    std::vector<double> eps1(static_cast<std::size_t>(K));
    std::vector<double> eps2(static_cast<std::size_t>(R));
    std::vector<Value> theta(static_cast<std::size_t>(K));
    kin::FkOut<Value> fk;

    Value total; // sum over frames of per-frame elbo
    bool have_total = false;
    double acc_entropy = 0, acc_loglik = 0, acc_prior = 0;

    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
        const int frame = frames[fi];
        const auto rows = obs.at_frame(frame);

        const Value H = net.record_entropy(tape, moments[fi]);
        acc_entropy += H.v();

        // noise keyed by frame id, not draw order: any contiguous partition
        // of a batch (thread blocks) then samples identically
        Rng frame_rng = noise.substream(static_cast<std::uint64_t>(frame));

        Value sample_sum;
        bool have_sum = false;
        double frame_ll = 0, frame_prior = 0;

        for (int s = 0; s < S; ++s) {
            for (int k = 0; k < K; ++k) eps1[static_cast<std::size_t>(k)] = frame_rng.normal();
            for (int r = 0; r < R; ++r) eps2[static_cast<std::size_t>(r)] = frame_rng.normal();
            const Tape::id_t th0 = net.record_sample(tape, moments[fi], eps1, eps2);
            for (int k = 0; k < K; ++k)
                theta[static_cast<std::size_t>(k)] = Value{&tape, th0 + static_cast<Tape::id_t>(k)};

            tape.push_scope("kinematics");
            kin::forward<Value>(model, theta, beta_vals, fk);
            tape.pop_scope();

            // log-prior: quadratic penalty outside the joint range
            Value term;
            bool have_term = false;
            double prior_val = 0;
            for (int k = 0; k < K; ++k) {
                const kin::Dof& dof = model.dofs[static_cast<std::size_t>(k)];
                if (!dof.bounded) continue;
                const double tv = theta[static_cast<std::size_t>(k)].v();
                if (tv <= dof.hi && tv >= dof.lo) continue; // exactly zero penalty, no nodes
                const Value th = theta[static_cast<std::size_t>(k)];
                const Value over = relu(lin1s(th, 1.0, -dof.hi));
                const Value under = relu(lin1s(th, -1.0, dof.lo));
                const Value pen = lin2s(square(over), square(under), kPriorCoef, kPriorCoef, 0.0);
                term = have_term ? term + pen : pen;
                have_term = true;
            }
            if (have_term) prior_val = term.v();

            // likelihood over present, in-front observations
            tape.push_scope("likelihood");
            for (const Obs& o : rows) {
                const CamOnTape& ct = cams[static_cast<std::size_t>(o.cam)];
                const std::size_t sp = 3 * static_cast<std::size_t>(o.site);
                const V3<Value> X{fk.site_pos[sp], fk.site_pos[sp + 1], fk.site_pos[sp + 2]};
                V3<Value> xc;
                if (ct.refined) {
                    const V3<Value> rx = mat_vec(ct.R, X);
                    xc = {rx.x + ct.t.x, rx.y + ct.t.y, rx.z + ct.t.z};
                } else {
                    xc = const_mat_vec_add(ct.R0, X, ct.cam->tvec);
                }
                const auto pix = cam::project_camera_point<Value>(*ct.cam, xc);
                if (pix.behind) {
                    ++out.masked;
                    continue;
                }
                const Value du = lin1s(pix.u, 1.0, -o.u);
                const Value dv = lin1s(pix.v, 1.0, -o.v);
                const Value ss = square(du) + square(dv);
                Value eps;
                if (ss.v() <= 0.0)
                    eps = Value{&tape, tape.constant(1e-12)}; // exact hit; keep sqrt grad finite
                else
                    eps = sqrt(ss);

                Value sigma;
                if (flags.score_sigma) {
                    const Value poly =
                        sp0 + lin2s(sp1, sp2, o.score, o.score * o.score, 0.0);
                    sigma = poly.v() < lik::kSigmaFloor
                                ? Value{&tape, tape.constant(lik::kSigmaFloor)}
                                : poly;
                } else {
                    sigma = warm_sigma;
                }
                const Value ll = lik::log_density<Value>(family, eps, sigma);
                term = have_term ? term + ll : ll;
                have_term = true;
            }
            tape.pop_scope();

            if (have_term) {
                frame_ll += term.v() - prior_val;
                frame_prior += prior_val;
                sample_sum = have_sum ? sample_sum + term : term;
                have_sum = true;
            }
        }

        Value felbo = H;
        if (have_sum) {
            const Value mean_term = lin1s(sample_sum, 1.0 / static_cast<double>(S), 0.0);
            felbo = H + mean_term;
        }
        acc_loglik += frame_ll / static_cast<double>(S);
        acc_prior += frame_prior / static_cast<double>(S);

        total = have_total ? total + felbo : felbo;
        have_total = true;
    }

    const double nf = static_cast<double>(frames.size());
    out.loss = lin1s(total, -1.0 / nf, 0.0);
    out.elbo = -out.loss.v();
    out.entropy = acc_entropy / nf;
    out.loglik = acc_loglik / nf;
    out.prior = acc_prior / nf;
    return out;
}

// ---- evaluation at the posterior mean ----

TrialEval evaluate_fit(const Session& sess, const ad::ParamVector& params, int trial) {
    const Problem& prob = sess.problem();
    const ObsTable& obs = prob.trials[static_cast<std::size_t>(trial)];
    const post::TrajectoryNet& net = sess.net(trial);
    const kin::Model& model = prob.model;

    // fold any refined extrinsics into effective cameras
    std::vector<cam::Camera> cams = prob.rig.cameras;
    const auto d = params.span("delta");
    for (std::size_t i = 0; i < sess.refined_cams().size(); ++i) {
        const int ci = sess.refined_cams()[i];
        cams[static_cast<std::size_t>(ci)] = cam::compose_delta(
            cams[static_cast<std::size_t>(ci)], {d[3 * i], d[3 * i + 1], d[3 * i + 2]});
    }

    TrialEval ev;
    post::Moments mom;
    double err_sum = 0, ent_sum = 0;
    const auto w = params.span(Session::net_group(trial));
    const auto beta = params.span("beta");
    for (int f = 0; f < obs.num_frames; ++f) {
        net.eval(w, obs.frame_time(f), mom);
        ent_sum += net.entropy(mom);
        const auto rows = obs.at_frame(f);
        if (rows.empty()) continue;
        const auto pts = kin::site_positions(model, mom.mu, beta);
        for (const Obs& o : rows) {
            const auto pix = cam::project(cams[static_cast<std::size_t>(o.cam)],
                                          pts[static_cast<std::size_t>(o.site)]);
            if (pix.behind) {
                ++ev.obs_behind;
                continue;
            }
            err_sum += std::sqrt(sq(pix.u - o.u) + sq(pix.v - o.v));
            ++ev.obs_used;
        }
    }
    ev.mean_reproj = ev.obs_used > 0 ? err_sum / ev.obs_used : 0.0;
    ev.mean_entropy = obs.num_frames > 0 ? ent_sum / obs.num_frames : 0.0;
    return ev;
}

// ---- frame batching ----

std::vector<int> pick_frames(int num_frames, int count, Rng& rng) {
    std::vector<int> out;
    if (count >= num_frames) {
        out.resize(static_cast<std::size_t>(num_frames));
        for (int i = 0; i < num_frames; ++i) out[static_cast<std::size_t>(i)] = i;
        return out;
    }
    const double stride = static_cast<double>(num_frames) / static_cast<double>(count);
    const double phase = rng.uniform(0.0, stride);
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        int f = static_cast<int>(phase + stride * static_cast<double>(i));
        if (f >= num_frames) f = num_frames - 1;
        out.push_back(f);
    }
    return out;
}

} // namespace kinvar::infer
