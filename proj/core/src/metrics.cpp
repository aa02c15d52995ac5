#include "kinvar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace kinvar::metrics {

namespace {

// theta = mu + d.*eps1 + U eps2
void sample_pose(const post::Moments& m, int K, int R, Rng& rng, std::vector<double>& eps2,
                 std::vector<double>& theta) {
    eps2.resize(static_cast<std::size_t>(R));
    for (int r = 0; r < R; ++r) eps2[static_cast<std::size_t>(r)] = rng.normal();
    theta.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        double v = m.mu[static_cast<std::size_t>(k)] +
                   m.d[static_cast<std::size_t>(k)] * rng.normal();
        for (int r = 0; r < R; ++r)
            v += m.U[static_cast<std::size_t>(k) * static_cast<std::size_t>(R) +
                     static_cast<std::size_t>(r)] *
                 eps2[static_cast<std::size_t>(r)];
        theta[static_cast<std::size_t>(k)] = v;
    }
}

} // namespace

SpatialSummary spatial_errors(const infer::Session& sess, const ad::ParamVector& params, int trial,
                              int n_samples, std::uint64_t seed) {
    if (n_samples < 2) throw Error("spatial_errors: need at least 2 samples");
    const infer::Problem& p = sess.problem();
    const ObsTable& obs = p.trials[static_cast<std::size_t>(trial)];
    const post::TrajectoryNet& net = sess.net(trial);
    const int K = p.model.dof_count();
    const int J = p.model.site_count();
    const int R = sess.config().rank;
    const auto w = params.span(infer::Session::net_group(trial));
    const auto beta = params.span("beta");

    SpatialSummary out;
    for (const kin::Site& s : p.model.sites) out.site.push_back(s.name);
    out.p50_mm.assign(static_cast<std::size_t>(J), 0.0);
    out.p95_mm.assign(static_cast<std::size_t>(J), 0.0);
    out.samples = n_samples;
    out.frames = obs.num_frames;

    Rng rng = Rng(seed).substream(0x5a71a1u + static_cast<std::uint64_t>(trial));
    post::Moments mom;
    std::vector<double> eps2, theta;
    // per-sample site positions for the current frame
    std::vector<Vec3> pts(static_cast<std::size_t>(n_samples) * static_cast<std::size_t>(J));
    std::vector<Vec3> one(static_cast<std::size_t>(n_samples));
    std::vector<double> dist(static_cast<std::size_t>(n_samples));

    for (int f = 0; f < obs.num_frames; ++f) {
        net.eval(w, obs.frame_time(f), mom);
        for (int s = 0; s < n_samples; ++s) {
            sample_pose(mom, K, R, rng, eps2, theta);
            const std::vector<Vec3> sites = kin::site_positions(p.model, theta, beta);
            for (int j = 0; j < J; ++j)
                pts[static_cast<std::size_t>(s) * static_cast<std::size_t>(J) +
                    static_cast<std::size_t>(j)] = sites[static_cast<std::size_t>(j)];
        }
        bool frame_fallback = false;
        for (int j = 0; j < J; ++j) {
            for (int s = 0; s < n_samples; ++s)
                one[static_cast<std::size_t>(s)] =
                    pts[static_cast<std::size_t>(s) * static_cast<std::size_t>(J) +
                        static_cast<std::size_t>(j)];
            bool ok = true;
            const Vec3 med = geometric_median(one, 1e-9, 200, &ok);
            if (!ok) frame_fallback = true;
            for (int s = 0; s < n_samples; ++s)
                dist[static_cast<std::size_t>(s)] = norm(one[static_cast<std::size_t>(s)] - med);
            out.p50_mm[static_cast<std::size_t>(j)] += quantile(dist, 0.50);
            out.p95_mm[static_cast<std::size_t>(j)] += quantile(dist, 0.95);
        }
        if (frame_fallback) ++out.fallback_frames;
    }
    const double scale = 1000.0 / static_cast<double>(obs.num_frames); // m -> mm, time average
    for (int j = 0; j < J; ++j) {
        out.p50_mm[static_cast<std::size_t>(j)] *= scale;
        out.p95_mm[static_cast<std::size_t>(j)] *= scale;
    }
    return out;
}

std::vector<double> posterior_std_series(const infer::Session& sess, const ad::ParamVector& params,
                                         int trial, std::span<const int> frames) {
    const infer::Problem& p = sess.problem();
    const ObsTable& obs = p.trials[static_cast<std::size_t>(trial)];
    const post::TrajectoryNet& net = sess.net(trial);
    const int K = p.model.dof_count();
    const int R = sess.config().rank;
    const auto w = params.span(infer::Session::net_group(trial));

    std::vector<int> all;
    if (frames.empty()) {
        all.resize(static_cast<std::size_t>(obs.num_frames));
        for (int f = 0; f < obs.num_frames; ++f) all[static_cast<std::size_t>(f)] = f;
        frames = all;
    }

    std::vector<double> out(frames.size() * static_cast<std::size_t>(K));
    post::Moments mom;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        net.eval(w, obs.frame_time(frames[i]), mom);
        const std::vector<double> std_k = post::TrajectoryNet::marginal_std(mom, K, R);
        std::copy(std_k.begin(), std_k.end(), out.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(K)));
    }
    return out;
}

double mean_entropy(const infer::Session& sess, const ad::ParamVector& params, int trial,
                    std::span<const int> frames) {
    const ObsTable& obs = sess.problem().trials[static_cast<std::size_t>(trial)];
    const post::TrajectoryNet& net = sess.net(trial);
    const auto w = params.span(infer::Session::net_group(trial));

    std::vector<int> all;
    if (frames.empty()) {
        all.resize(static_cast<std::size_t>(obs.num_frames));
        for (int f = 0; f < obs.num_frames; ++f) all[static_cast<std::size_t>(f)] = f;
        frames = all;
    }
    post::Moments mom;
    double acc = 0;
    for (const int f : frames) {
        net.eval(w, obs.frame_time(f), mom);
        acc += net.entropy(mom);
    }
    return acc / static_cast<double>(frames.size());
}

std::vector<int> frames_with_observations(const ObsTable& obs) {
    std::vector<int> out;
    for (int f = 0; f < obs.num_frames; ++f)
        if (!obs.at_frame(f).empty()) out.push_back(f);
    return out;
}

JointSummary joint_angle_summary(const infer::Session& sess, const ad::ParamVector& params,
                                 int trial, std::span<const int> frames) {
    const kin::Model& model = sess.problem().model;
    const int K = model.dof_count();
    const std::vector<double> series = posterior_std_series(sess, params, trial, frames);
    const std::size_t nf = series.size() / static_cast<std::size_t>(K);

    JointSummary out;
    out.p50.resize(static_cast<std::size_t>(K));
    out.p95.resize(static_cast<std::size_t>(K));
    out.translational.resize(static_cast<std::size_t>(K));
    const bool free_root = model.segments[0].joint.type == kin::JointType::FreeRoot;
    std::vector<double> col(nf);
    for (int k = 0; k < K; ++k) {
        const bool tr = free_root && k < 3;
        out.translational[static_cast<std::size_t>(k)] = tr;
        const double unit = tr ? 1000.0 : 180.0 / kPi;
        for (std::size_t f = 0; f < nf; ++f)
            col[f] = unit * series[f * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)];
        out.p50[static_cast<std::size_t>(k)] = quantile(col, 0.50);
        out.p95[static_cast<std::size_t>(k)] = quantile(col, 0.95);
    }
    return out;
}

std::vector<double> correlation_aggregate(const infer::Session& sess,
                                          const ad::ParamVector& params) {
    const kin::Model& model = sess.problem().model;
    const int K = model.dof_count();
    const int R = sess.config().rank;
    const std::size_t KK = static_cast<std::size_t>(K) * static_cast<std::size_t>(K);

    std::vector<std::vector<double>> per_trial;
    post::Moments mom;
    for (int t = 0; t < sess.trial_count(); ++t) {
        const ObsTable& obs = sess.problem().trials[static_cast<std::size_t>(t)];
        const auto w = params.span(infer::Session::net_group(t));
        std::vector<double> acc(KK, 0.0);
        for (int f = 0; f < obs.num_frames; ++f) {
            sess.net(t).eval(w, obs.frame_time(f), mom);
            const std::vector<double> corr = post::TrajectoryNet::correlation(mom, K, R);
            for (std::size_t i = 0; i < KK; ++i) acc[i] += corr[i];
        }
        for (double& v : acc) v = std::abs(v / static_cast<double>(obs.num_frames));
        per_trial.push_back(std::move(acc));
    }

    std::vector<double> agg(KK);
    std::vector<double> vals(per_trial.size());
    for (std::size_t i = 0; i < KK; ++i) {
        for (std::size_t t = 0; t < per_trial.size(); ++t) vals[t] = per_trial[t][i];
        agg[i] = median(vals);
    }
    return agg;
}

// ---- files ----

void save_spatial_summary(const SpatialSummary& s, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write spatial summary '" + path + "'");
    std::fprintf(f, "# kinvar spatial summary v1 samples=%d frames=%d fallback_frames=%d\n",
                 s.samples, s.frames, s.fallback_frames);
    std::fprintf(f, "site,p50_mm,p95_mm\n");
    for (std::size_t j = 0; j < s.site.size(); ++j)
        std::fprintf(f, "%s,%.17g,%.17g\n", s.site[j].c_str(), s.p50_mm[j], s.p95_mm[j]);
    std::fclose(f);
}

void save_joint_summary(const JointSummary& s, std::span<const std::string> names,
                        const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write joint summary '" + path + "'");
    std::fprintf(f, "# kinvar joint summary v1\n");
    std::fprintf(f, "dof,unit,p50,p95\n");
    for (std::size_t k = 0; k < s.p50.size(); ++k)
        std::fprintf(f, "%s,%s,%.17g,%.17g\n",
                     k < names.size() ? names[k].c_str() : "?",
                     s.translational[k] ? "mm" : "deg", s.p50[k], s.p95[k]);
    std::fclose(f);
}

void save_matrix(std::span<const double> m, int rows, int cols, const std::string& path) {
    if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) != m.size())
        throw Error("save_matrix: shape mismatch");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write matrix '" + path + "'");
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c)
            std::fprintf(f, c ? ",%.17g" : "%.17g",
                         m[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
                           static_cast<std::size_t>(c)]);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

std::vector<std::string> dof_names(const kin::Model& m) {
    std::vector<std::string> names;
    std::vector<int> seen(m.segments.size(), 0);
    for (const kin::Dof& d : m.dofs) {
        const kin::Segment& s = m.segments[static_cast<std::size_t>(d.segment)];
        std::string n = s.name;
        if (s.joint.type == kin::JointType::FreeRoot) {
            static const char* tag[6] = {".tx", ".ty", ".tz", ".rx", ".ry", ".rz"};
            n += tag[seen[static_cast<std::size_t>(d.segment)]++];
        } else if (s.joint.type == kin::JointType::Ball) {
            n += ".r" + std::to_string(seen[static_cast<std::size_t>(d.segment)]++);
        }
        names.push_back(std::move(n));
    }
    return names;
}

} // namespace kinvar::metrics
