// Microbenchmarks for the hot paths: taped net evaluation, forward
// kinematics, projection, and a full objective record+backward step.

#include <benchmark/benchmark.h>

#include <vector>

#include "kinvar/inference.hpp"
#include "kinvar/kinematics.hpp"
#include "kinvar/posterior.hpp"
#include "kinvar/scalar_ops.hpp"
#include "kinvar/synth.hpp"

using namespace kinvar;

namespace {

// record a 100-timestep batch through the trajectory net and pull gradients
// back through the summed entropies
void BM_net_batch(benchmark::State& state) {
    post::NetConfig nc;
    nc.K = 16;
    nc.R = 5;
    nc.hidden = {static_cast<int>(state.range(0)), static_cast<int>(2 * state.range(0))};
    nc.duration = 10.0;
    nc.bounds.resize(static_cast<std::size_t>(nc.K));
    const post::TrajectoryNet net(nc);

    std::vector<double> w(net.weight_count());
    Rng rng(1);
    net.init_weights(w, rng);

    std::vector<double> times(100);
    for (std::size_t i = 0; i < times.size(); ++i)
        times[i] = nc.duration * static_cast<double>(i) / static_cast<double>(times.size());

    for (auto _ : state) {
        ad::Tape tape;
        const auto w0 = tape.inputs(w);
        const auto tms = net.record_batch(tape, w0, times);
        ad::Value h = net.record_entropy(tape, tms[0]);
        for (std::size_t i = 1; i < tms.size(); ++i)
            h = {&tape, tape.add(h.id, net.record_entropy(tape, tms[i]).id)};
        tape.backward(h.id);
        benchmark::DoNotOptimize(tape.adjoint(w0));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(times.size()));
}

void bench_fk(benchmark::State& state, const kin::Model& model) {
    std::vector<double> theta(static_cast<std::size_t>(model.dof_count()), 0.05);
    std::vector<double> beta(static_cast<std::size_t>(model.beta_size()), 0.0);
    for (int i = 0; i < model.num_scales; ++i) beta[static_cast<std::size_t>(i)] = 1.0;
    for (auto _ : state) {
        auto sites = kin::site_positions(model, theta, beta);
        benchmark::DoNotOptimize(sites.data());
    }
    state.SetItemsProcessed(state.iterations() * model.site_count());
}

void BM_fk_lite(benchmark::State& state) { bench_fk(state, synth::humanoid_lite()); }
void BM_fk_full(benchmark::State& state) { bench_fk(state, synth::humanoid_full()); }

void BM_project(benchmark::State& state) {
    cam::Camera c;
    c.fx = 1150;
    c.fy = 1140;
    c.cx = 960;
    c.cy = 540;
    c.k1 = -0.28;
    c.k2 = 0.07;
    c.k3 = -0.004;
    c.p1 = 1e-4;
    c.p2 = -2e-4;
    c.rvec = {0.2, -0.1, 0.05};
    c.tvec = {0.1, 0.2, 4.0};
    Vec3 x{0.3, -0.2, 1.1};
    for (auto _ : state) {
        auto pix = cam::project(c, x);
        benchmark::DoNotOptimize(pix.u);
        x.x = -x.x; // defeat value caching across iterations
    }
}

// one stochastic objective step: record, backward, gradient pull
void bench_elbo_step(benchmark::State& state, const char* model_name, int cams) {
    synth::SynthConfig scfg;
    scfg.model = model_name;
    scfg.cameras = cams;
    scfg.radius = 3.5;
    scfg.duration = 2.0;
    scfg.fps = 20;
    scfg.sigma_coeff = {1.0, 1.0, 0.0};
    scfg.seed = 3;
    const synth::Dataset ds = synth::generate(synth::resolve_model(model_name), scfg);

    infer::Problem prob;
    prob.model = ds.model;
    prob.rig = ds.rig;
    prob.trials = {ds.obs};

    infer::FitConfig cfg;
    cfg.hidden = {64, 128};
    cfg.rank = 5;
    cfg.schedule.samples_per_step = 2;
    const infer::Session sess(prob, cfg);
    const ad::ParamVector params = sess.init_params();
    std::vector<double> grad(params.size());

    const std::vector<int> frames = {0, 4, 8, 12, 16, 20, 24, 28, 32, 36};
    infer::BlockFlags flags;
    flags.score_sigma = true;

    Rng noise(7);
    for (auto _ : state) {
        ad::Tape tape;
        const auto res = infer::record_elbo(tape, sess, params, 0, frames, noise, flags);
        tape.backward(res.loss.id);
        std::fill(grad.begin(), grad.end(), 0.0);
        tape.add_input_adjoints(res.in_net, grad);
        benchmark::DoNotOptimize(grad.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}

void BM_elbo_step_lite(benchmark::State& state) { bench_elbo_step(state, "humanoid_lite", 4); }
void BM_elbo_step_full(benchmark::State& state) { bench_elbo_step(state, "humanoid_full", 6); }

void BM_entropy(benchmark::State& state) {
    const int K = 42, R = 5;
    post::NetConfig nc;
    nc.K = K;
    nc.R = R;
    nc.bounds.resize(K);
    const post::TrajectoryNet net(nc);
    post::Moments m;
    m.mu.assign(K, 0.0);
    m.d.assign(K, 0.1);
    m.U.resize(static_cast<std::size_t>(K) * R);
    Rng rng(9);
    for (double& u : m.U) u = 0.05 * rng.normal();
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.entropy(m));
    }
}

BENCHMARK(BM_net_batch)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fk_lite);
BENCHMARK(BM_fk_full);
BENCHMARK(BM_project);
BENCHMARK(BM_entropy);
BENCHMARK(BM_elbo_step_lite)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_elbo_step_full)->Unit(benchmark::kMillisecond);

} // namespace
