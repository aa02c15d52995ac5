#include "kinvar/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "kinvar/likelihood.hpp"
#include "kinvar/tape.hpp"

namespace kinvar::calib {

std::vector<KeypointPredictive> pushforward(const kin::Model& model, std::span<const double> beta,
                                            const cam::Camera& camera, const post::Moments& m,
                                            int rank) {
    const int K = model.dof_count();
    const int J = model.site_count();
    const int R = rank;

    ad::Tape tape;
    const ad::Tape::id_t th0 = tape.inputs(std::span<const double>(m.mu));
    std::vector<ad::Value> th(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
        th[static_cast<std::size_t>(k)] = {&tape, th0 + static_cast<ad::Tape::id_t>(k)};
    std::vector<ad::Value> bt(beta.size());
    for (std::size_t i = 0; i < beta.size(); ++i) bt[i] = {&tape, tape.constant(beta[i])};

    kin::FkOut<ad::Value> fk;
    kin::forward<ad::Value>(model, th, bt, fk);
    const Mat3 R0 = rodrigues(camera.rvec);

    std::vector<KeypointPredictive> out(static_cast<std::size_t>(J));
    std::vector<double> ju(static_cast<std::size_t>(K)), jv(static_cast<std::size_t>(K));
    for (int j = 0; j < J; ++j) {
        KeypointPredictive& kp = out[static_cast<std::size_t>(j)];
        kp.site = j;
        const V3<ad::Value> xw{fk.site_pos[3 * static_cast<std::size_t>(j)],
                               fk.site_pos[3 * static_cast<std::size_t>(j) + 1],
                               fk.site_pos[3 * static_cast<std::size_t>(j) + 2]};
        const V3<ad::Value> xc = const_mat_vec_add(R0, xw, camera.tvec);
        const auto pix = cam::project_camera_point<ad::Value>(camera, xc);
        if (pix.behind) {
            kp.behind = true;
            continue;
        }
        kp.u = pix.u.v();
        kp.v = pix.v.v();

        std::fill(ju.begin(), ju.end(), 0.0);
        tape.backward(pix.u.id);
        tape.add_input_adjoints(th0, ju);
        std::fill(jv.begin(), jv.end(), 0.0);
        tape.backward(pix.v.id);
        tape.add_input_adjoints(th0, jv);

        // J Sigma J^T with Sigma = diag(d^2) + U U^T, as (J d)·(J d) plus
        // rank-by-rank (J u_r) outer terms
        double c00 = 0, c01 = 0, c11 = 0;
        for (int k = 0; k < K; ++k) {
            const double a = ju[static_cast<std::size_t>(k)] * m.d[static_cast<std::size_t>(k)];
            const double b = jv[static_cast<std::size_t>(k)] * m.d[static_cast<std::size_t>(k)];
            c00 += a * a;
            c01 += a * b;
            c11 += b * b;
        }
        for (int r = 0; r < R; ++r) {
            double su = 0, sv = 0;
            for (int k = 0; k < K; ++k) {
                const double urk = m.U[static_cast<std::size_t>(k) * static_cast<std::size_t>(R) +
                                       static_cast<std::size_t>(r)];
                su += ju[static_cast<std::size_t>(k)] * urk;
                sv += jv[static_cast<std::size_t>(k)] * urk;
            }
            c00 += su * su;
            c01 += su * sv;
            c11 += sv * sv;
        }
        kp.cov00 = c00;
        kp.cov01 = c01;
        kp.cov11 = c11;
    }
    return out;
}

double predictive_scale(double cov00, double cov11, double sigma_like, double sigma_clip,
                        bool average_stds) {
    const double var_post = average_stds
                                ? sq(0.5 * (std::sqrt(cov00) + std::sqrt(cov11)))
                                : 0.5 * (cov00 + cov11);
    const double w = std::min(sigma_like, sigma_clip);
    return std::sqrt(var_post + w * w);
}

std::vector<std::size_t> select_pseudo_gt(const ObsTable& obs, double fraction) {
    const std::size_t n = obs.rows.size();
    if (n < 20) throw Error("select_pseudo_gt: need at least 20 observations");
    if (fraction <= 0 || fraction > 1) throw Error("select_pseudo_gt: fraction must be in (0, 1]");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // rows are already in canonical (frame, cam, site) order; stable sort
    // keeps that order among equal scores
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return obs.rows[a].score < obs.rows[b].score;
    });
    std::size_t count = static_cast<std::size_t>(fraction * static_cast<double>(n));
    if (count < 1) count = 1;
    if (count > n) count = n;
    idx.resize(count);
    std::sort(idx.begin(), idx.end()); // back to canonical order
    return idx;
}

EceCurve ece(std::span<const double> err, std::span<const double> sigma) {
    if (err.size() != sigma.size() || err.empty())
        throw Error("ece: need matching non-empty err/sigma lists");
    EceCurve out;
    out.n = static_cast<int>(err.size());
    out.c.resize(err.size());
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double s = sigma[i];
        if (s < 0) throw Error("ece: negative sigma");
        if (s == 0)
            out.c[i] = err[i] > 0 ? 1.0 : 0.0;
        else
            out.c[i] = 1.0 - std::exp(-(err[i] * err[i]) / (2.0 * s * s));
    }
    std::sort(out.c.begin(), out.c.end());
    double acc = 0;
    const double n = static_cast<double>(out.c.size());
    for (std::size_t i = 0; i < out.c.size(); ++i)
        acc += std::abs(out.c[i] - static_cast<double>(i + 1) / n);
    out.ece = acc / n;
    return out;
}

std::vector<PredictivePair> collect_pairs(const infer::Session& sess,
                                          const ad::ParamVector& params, int trial,
                                          double fraction, bool average_stds) {
    const infer::Problem& p = sess.problem();
    const ObsTable& obs = p.trials[static_cast<std::size_t>(trial)];
    const post::TrajectoryNet& net = sess.net(trial);
    const int R = sess.config().rank;
    const auto beta = params.span("beta");
    const auto w = params.span(infer::Session::net_group(trial));
    const auto psi = params.span("psi");

    // likelihood width as the fit last used it: learned score polynomial, or
    // the fixed warmup width if score conditioning never turned on
    const infer::Schedule& sch = sess.config().schedule;
    const bool scored = sch.enable_score_sigma_at < sch.total_steps;

    // refined extrinsics folded in
    std::vector<cam::Camera> cams;
    for (const cam::Camera& c : p.rig.cameras) cams.push_back(c);
    const auto delta = params.span("delta");
    for (std::size_t i = 0; i < sess.refined_cams().size(); ++i) {
        const int ci = sess.refined_cams()[i];
        cams[static_cast<std::size_t>(ci)] = cam::compose_delta(
            cams[static_cast<std::size_t>(ci)],
            {delta[3 * i], delta[3 * i + 1], delta[3 * i + 2]});
    }

    const std::vector<std::size_t> picked = select_pseudo_gt(obs, fraction);

    std::vector<PredictivePair> pairs;
    pairs.reserve(picked.size());
    post::Moments mom;
    int cur_frame = -1;
    int cur_cam = -1;
    std::vector<KeypointPredictive> push;
    for (const std::size_t ri : picked) {
        const Obs& row = obs.rows[ri];
        if (row.frame != cur_frame) {
            net.eval(w, obs.frame_time(row.frame), mom);
            cur_frame = row.frame;
            cur_cam = -1;
        }
        if (row.cam != cur_cam) {
            push = pushforward(p.model, beta, cams[static_cast<std::size_t>(row.cam)], mom, R);
            cur_cam = row.cam;
        }
        const KeypointPredictive& kp = push[static_cast<std::size_t>(row.site)];
        if (kp.behind) continue;
        PredictivePair pr;
        pr.frame = row.frame;
        pr.cam = row.cam;
        pr.site = row.site;
        pr.err = std::sqrt(sq(row.u - kp.u) + sq(row.v - kp.v));
        pr.cov_avg = average_stds ? sq(0.5 * (std::sqrt(kp.cov00) + std::sqrt(kp.cov11)))
                                  : 0.5 * (kp.cov00 + kp.cov11);
        pr.sigma_like = scored ? lik::sigma_from_raw(psi, row.score) : sch.warmup_sigma;
        pairs.push_back(pr);
    }
    return pairs;
}

std::vector<EceReport> ece_report(const infer::Session& sess, const ad::ParamVector& params,
                                  std::span<const double> clips, double fraction,
                                  bool average_stds) {
    std::vector<PredictivePair> pooled;
    for (int t = 0; t < sess.trial_count(); ++t) {
        const auto pairs = collect_pairs(sess, params, t, fraction, average_stds);
        pooled.insert(pooled.end(), pairs.begin(), pairs.end());
    }
    if (pooled.empty()) throw Error("ece_report: no usable keypoints");

    std::vector<EceReport> reports;
    std::vector<double> err(pooled.size()), sigma(pooled.size());
    for (std::size_t i = 0; i < pooled.size(); ++i) err[i] = pooled[i].err;
    for (const double clip : clips) {
        for (std::size_t i = 0; i < pooled.size(); ++i) {
            const double wlik = std::min(pooled[i].sigma_like, clip);
            sigma[i] = std::sqrt(pooled[i].cov_avg + wlik * wlik);
        }
        EceReport r;
        r.sigma_clip = clip;
        r.fraction = fraction;
        r.curve = ece(err, sigma);
        reports.push_back(std::move(r));
    }
    return reports;
}

void save_ece_report(std::span<const EceReport> reports, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write ece report '" + path + "'");
    std::fprintf(f, "# kinvar ece report v1\n");
    for (const EceReport& r : reports) {
        std::fprintf(f, "clip=%.17g n=%d fraction=%.17g ece=%.17g\n", r.sigma_clip, r.curve.n,
                     r.fraction, r.curve.ece);
        std::fprintf(f, "c,p\n");
        const double n = static_cast<double>(r.curve.n);
        for (std::size_t i = 0; i < r.curve.c.size(); ++i)
            std::fprintf(f, "%.17g,%.17g\n", r.curve.c[i], static_cast<double>(i + 1) / n);
    }
    std::fclose(f);
}

} // namespace kinvar::calib
