// kinvar command line: synth | fit | report | ablate.
// Exit codes: 0 ok, 2 config/input error, 3 numeric divergence.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kinvar/calibration.hpp"
#include "kinvar/inference.hpp"
#include "kinvar/likelihood.hpp"
#include "kinvar/metrics.hpp"
#include "kinvar/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kinvar;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << text;
}

std::string fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void write_manifest(const fs::path& dir, const std::string& command,
                    const std::string& config_hash, std::uint64_t seed,
                    const std::vector<std::string>& outputs, double wall) {
    json j;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["version"] = "0.1.0";
    j["outputs"] = outputs;
    j["wall_clock_s"] = wall;
    spit(dir / "manifest.json", j.dump(2) + "\n");
}

// ---- session files: model/rig/trial paths plus a fit config ----

struct SessionSpec {
    kin::Model model;
    cam::Rig rig;
    std::vector<std::string> trial_paths;
    infer::FitConfig config;
};

SessionSpec load_session(const fs::path& path) {
    json j;
    try {
        j = json::parse(slurp(path));
    } catch (const json::exception& e) {
        throw ParseError("session '" + path.string() + "': " + e.what());
    }
    const fs::path base = path.parent_path();
    try {
        SessionSpec s;
        s.model = kin::load_model((base / j.at("model").get<std::string>()).string());
        s.rig = cam::load_rig((base / j.at("rig").get<std::string>()).string());
        for (const auto& t : j.at("trials"))
            s.trial_paths.push_back((base / t.get<std::string>()).string());
        if (s.trial_paths.empty()) throw ParseError("session lists no trials");
        if (j.contains("config"))
            s.config = infer::fit_config_from_json_text(j["config"].dump());
        return s;
    } catch (const json::exception& e) {
        throw ParseError("session '" + path.string() + "': " + e.what());
    }
}

infer::Problem load_problem(const SessionSpec& s) {
    infer::Problem p;
    p.model = s.model;
    p.rig = s.rig;
    for (const std::string& tp : s.trial_paths) p.trials.push_back(load_observations(tp));
    return p;
}

void print_step(const infer::StepStats& s) {
    std::printf("step %6d  lr %9.3e  elbo %12.4f  H %9.3f  loglik %12.4f  prior %9.4f  |g| %9.3e%s\n",
                s.step, s.lr, s.elbo, s.entropy, s.loglik, s.prior, s.grad_norm,
                s.recoveries ? ("  recoveries " + std::to_string(s.recoveries)).c_str() : "");
    std::fflush(stdout);
}

// ---- synth ----

int cmd_synth(const std::string& config_path, const std::string& out) {
    Timer timer;
    synth::SynthConfig cfg = synth::synth_config_from_json_text(slurp(config_path));
    kin::Model model;
    if (cfg.model == "humanoid_lite" || cfg.model == "humanoid_full" || cfg.model == "pendulum")
        model = synth::resolve_model(cfg.model);
    else
        model = kin::load_model((fs::path(config_path).parent_path() / cfg.model).string());

    const synth::Dataset ds = synth::generate(model, cfg);

    const fs::path dir(out);
    fs::create_directories(dir);
    kin::save_model(ds.model, (dir / "model.json").string());
    cam::save_rig(ds.rig, (dir / "rig.json").string());
    save_observations(ds.obs, (dir / "obs.csv").string());
    synth::save_ground_truth(ds.gt_theta, ds.num_frames, ds.model.dof_count(),
                             (dir / "gt.csv").string());
    spit(dir / "synth_config.json", synth::synth_config_to_json_text(cfg));

    json ses;
    ses["model"] = "model.json";
    ses["rig"] = "rig.json";
    ses["trials"] = json::array({"obs.csv"});
    ses["config"] = json::parse(infer::fit_config_to_json_text(infer::FitConfig{}));
    spit(dir / "session.json", ses.dump(2) + "\n");

    write_manifest(dir, "synth", fnv1a64(synth::synth_config_to_json_text(cfg)), cfg.seed,
                   {"model.json", "rig.json", "obs.csv", "gt.csv", "synth_config.json",
                    "session.json"},
                   timer.seconds());
    std::printf("synth: %d frames, %zu cameras, %d sites, %zu observations (%d behind)\n",
                ds.num_frames, ds.rig.cameras.size(), ds.model.site_count(), ds.obs.rows.size(),
                ds.behind);
    return 0;
}

// ---- fit ----

struct FitOverrides {
    int rank = -1;
    std::string family;
    int steps = -1;
    std::int64_t seed = -1;
    int threads = -1;
};

void apply_overrides(infer::FitConfig& c, const FitOverrides& o) {
    if (o.rank >= 0) c.rank = o.rank;
    if (!o.family.empty()) c.family = lik::family_from_string(o.family);
    if (o.steps >= 0) c.schedule.total_steps = o.steps;
    if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
    if (o.threads >= 0) c.threads = o.threads;
}

int cmd_fit(const std::string& session_path, const std::string& out, const FitOverrides& ov,
            bool quiet) {
    Timer timer;
    SessionSpec spec = load_session(session_path);
    apply_overrides(spec.config, ov);
    if (spec.config.family == lik::Family::HalfNormal)
        std::fprintf(stderr,
                     "warning: half_normal likelihood fits are prone to optimizer divergence; "
                     "automatic recovery restarts may kick in\n");

    infer::Problem p = load_problem(spec);
    const fs::path dir(out);
    fs::create_directories(dir);
    spit(dir / "fit_config.json", infer::fit_config_to_json_text(spec.config));

    const infer::FitResult res =
        infer::fit(p, spec.config, (dir / "checkpoint.json").string(),
                   quiet ? std::function<void(const infer::StepStats&)>() : print_step);
    infer::save_convergence_log(res.log, (dir / "convergence.csv").string());

    infer::Session sess(p, spec.config);
    for (int t = 0; t < sess.trial_count(); ++t) {
        const infer::TrialEval ev = infer::evaluate_fit(sess, res.params, t);
        std::printf("trial %s: mean reprojection %.3f px over %d keypoints (%d behind), "
                    "mean entropy %.3f nats\n",
                    p.trials[static_cast<std::size_t>(t)].name.c_str(), ev.mean_reproj,
                    ev.obs_used, ev.obs_behind, ev.mean_entropy);
    }
    if (res.recoveries)
        std::printf("fit finished with %d divergence recoveries\n", res.recoveries);

    write_manifest(dir, "fit", infer::config_hash(spec.config), spec.config.seed,
                   {"fit_config.json", "checkpoint.json", "convergence.csv"}, timer.seconds());
    return 0;
}

// ---- report ----

int cmd_report(const std::string& checkpoint_path, const std::vector<std::string>& obs_paths,
               const std::string& out, std::vector<double> clips, int samples,
               std::uint64_t seed) {
    Timer timer;
    const infer::Checkpoint ck = infer::load_checkpoint(checkpoint_path);
    if (obs_paths.size() != ck.trials.size())
        throw Error("report: checkpoint has " + std::to_string(ck.trials.size()) +
                    " trials but " + std::to_string(obs_paths.size()) + " --obs given");

    infer::Problem p;
    p.model = ck.model;
    p.rig = ck.rig;
    for (std::size_t i = 0; i < obs_paths.size(); ++i) {
        ObsTable t = load_observations(obs_paths[i]);
        const auto& m = ck.trials[i];
        if (t.num_frames != m.frames || t.num_cams != m.cams || t.num_sites != m.sites ||
            t.fps != m.fps)
            throw Error("report: '" + obs_paths[i] + "' does not match checkpoint trial '" +
                        m.name + "'");
        p.trials.push_back(std::move(t));
    }

    infer::Session sess(p, ck.config);
    const ad::ParamVector& params = ck.params;
    const int K = p.model.dof_count();
    const int R = ck.config.rank;

    const fs::path dir(out);
    fs::create_directories(dir);
    std::vector<std::string> outputs;

    if (clips.empty()) clips = {0.0, 1.0, 2.0, 5.0};
    const auto reports = calib::ece_report(sess, params, clips);
    calib::save_ece_report(reports, (dir / "ece.txt").string());
    outputs.push_back("ece.txt");
    for (const auto& r : reports)
        std::printf("ece (clip %g px): %.6f over %d keypoints\n", r.sigma_clip, r.curve.ece,
                    r.curve.n);

    const std::vector<std::string> names = metrics::dof_names(p.model);
    post::Moments mom;
    for (int t = 0; t < sess.trial_count(); ++t) {
        const std::string& tn = p.trials[static_cast<std::size_t>(t)].name;

        const metrics::SpatialSummary sp = metrics::spatial_errors(sess, params, t, samples, seed);
        metrics::save_spatial_summary(sp, (dir / ("spatial_" + tn + ".csv")).string());
        outputs.push_back("spatial_" + tn + ".csv");

        const metrics::JointSummary js = metrics::joint_angle_summary(sess, params, t);
        metrics::save_joint_summary(js, names, (dir / ("joints_" + tn + ".csv")).string());
        outputs.push_back("joints_" + tn + ".csv");

        // per-frame mean and 95% band per dof
        const ObsTable& obs = p.trials[static_cast<std::size_t>(t)];
        const auto w = params.span(infer::Session::net_group(t));
        std::FILE* f = std::fopen((dir / ("timeseries_" + tn + ".csv")).string().c_str(), "w");
        if (!f) throw Error("cannot write timeseries for '" + tn + "'");
        std::fprintf(f, "frame,dof,mean,std,lo95,hi95\n");
        for (int fr = 0; fr < obs.num_frames; ++fr) {
            sess.net(t).eval(w, obs.frame_time(fr), mom);
            const auto stds = post::TrajectoryNet::marginal_std(mom, K, R);
            for (int k = 0; k < K; ++k) {
                const double mu = mom.mu[static_cast<std::size_t>(k)];
                const double sd = stds[static_cast<std::size_t>(k)];
                std::fprintf(f, "%d,%s,%.17g,%.17g,%.17g,%.17g\n", fr,
                             names[static_cast<std::size_t>(k)].c_str(), mu, sd,
                             mu - 1.96 * sd, mu + 1.96 * sd);
            }
        }
        std::fclose(f);
        outputs.push_back("timeseries_" + tn + ".csv");

        const infer::TrialEval ev = infer::evaluate_fit(sess, params, t);
        std::printf("trial %s: mean reprojection %.3f px, mean entropy %.3f nats\n", tn.c_str(),
                    ev.mean_reproj, ev.mean_entropy);
    }

    const auto corr = metrics::correlation_aggregate(sess, params);
    metrics::save_matrix(corr, K, K, (dir / "correlation.csv").string());
    outputs.push_back("correlation.csv");

    write_manifest(dir, "report", infer::config_hash(ck.config), seed, outputs, timer.seconds());
    return 0;
}

// ---- ablate ----

struct SweepRow {
    std::string mode;
    double cell = 0;
    std::uint64_t seed = 0;
    std::string status = "ok";
    double elbo = 0, entropy = 0, sigma0 = 0, med_joint_std_deg = 0, med_spatial_p50_mm = 0,
           ece0 = 0;
    std::string message;
};

double median_of(std::vector<double> v) {
    if (v.empty()) return 0;
    return median(v);
}

int cmd_ablate(const std::string& session_path, const std::string& mode,
               const std::vector<double>& grid, const std::string& out, int seeds, int steps,
               bool quiet) {
    Timer timer;
    if (grid.empty()) throw Error("ablate: empty grid");
    if (mode != "noise" && mode != "cameras" && mode != "rank")
        throw Error("ablate: mode must be noise, cameras, or rank");
    if (seeds < 1) throw Error("ablate: seeds must be >= 1");

    SessionSpec spec = load_session(session_path);
    if (steps >= 0) spec.config.schedule.total_steps = steps;
    const infer::Problem base = load_problem(spec);
    const fs::path dir(out);
    fs::create_directories(dir);

    std::vector<SweepRow> rows;
    for (const double cell : grid) {
        for (int si = 0; si < seeds; ++si) {
            SweepRow row;
            row.mode = mode;
            row.cell = cell;
            infer::FitConfig cfg = spec.config;
            cfg.seed = spec.config.seed + static_cast<std::uint64_t>(si);
            row.seed = cfg.seed;
            char cellname[64];
            std::snprintf(cellname, sizeof cellname, "%s_%g_seed%llu", mode.c_str(), cell,
                          static_cast<unsigned long long>(cfg.seed));
            try {
                infer::Problem p = base;
                if (mode == "noise") {
                    if (cell < 0) throw Error("ablate: negative noise level");
                    for (std::size_t i = 0; i < p.trials.size(); ++i) {
                        std::uint64_t key =
                            cfg.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(i) + 1));
                        p.trials[i] = synth::inject_noise(p.trials[i], cell, splitmix64(key));
                    }
                } else if (mode == "cameras") {
                    const int n = static_cast<int>(cell);
                    if (n < 2 || n > static_cast<int>(base.rig.cameras.size()))
                        throw Error("ablate: camera count out of range");
                    std::vector<std::string> names;
                    for (int i = 0; i < n; ++i)
                        names.push_back(base.rig.cameras[static_cast<std::size_t>(i)].name);
                    for (std::size_t i = 0; i < p.trials.size(); ++i) {
                        auto [o, r] = synth::subset_cameras(p.trials[i], base.rig, names, true);
                        p.trials[i] = std::move(o);
                        p.rig = std::move(r);
                    }
                } else {
                    if (cell < 0) throw Error("ablate: negative rank");
                    cfg.rank = static_cast<int>(cell);
                }

                const fs::path cdir = dir / cellname;
                fs::create_directories(cdir);
                const infer::FitResult res =
                    infer::fit(p, cfg, (cdir / "checkpoint.json").string(),
                               quiet ? std::function<void(const infer::StepStats&)>() : print_step);
                infer::save_convergence_log(res.log, (cdir / "convergence.csv").string());

                infer::Session sess(p, cfg);
                row.elbo = res.log.empty() ? 0.0 : res.log.back().elbo;

                const bool scored = cfg.schedule.enable_score_sigma_at < cfg.schedule.total_steps;
                row.sigma0 = scored ? lik::sigma_from_raw(res.params.span("psi"), 0.0)
                                    : cfg.schedule.warmup_sigma;

                const bool free_root =
                    p.model.segments[0].joint.type == kin::JointType::FreeRoot;
                std::vector<double> ents, stds, spat;
                for (int t = 0; t < sess.trial_count(); ++t) {
                    std::vector<int> frames;
                    if (mode == "cameras")
                        frames = metrics::frames_with_observations(
                            p.trials[static_cast<std::size_t>(t)]);
                    ents.push_back(metrics::mean_entropy(sess, res.params, t, frames));
                    const auto series = metrics::posterior_std_series(sess, res.params, t, frames);
                    const int K = p.model.dof_count();
                    const std::size_t nf = series.size() / static_cast<std::size_t>(K);
                    for (std::size_t fr = 0; fr < nf; ++fr)
                        for (int k = 0; k < K; ++k) {
                            if (free_root && k < 3) continue; // angles only
                            stds.push_back(series[fr * static_cast<std::size_t>(K) +
                                                  static_cast<std::size_t>(k)] *
                                           180.0 / kPi);
                        }
                    const auto sp = metrics::spatial_errors(sess, res.params, t, 100, cfg.seed);
                    for (const double v : sp.p50_mm) spat.push_back(v);
                }
                row.entropy = median_of(ents);
                row.med_joint_std_deg = median_of(stds);
                row.med_spatial_p50_mm = median_of(spat);
                const double clip0[] = {0.0};
                row.ece0 = calib::ece_report(sess, res.params, clip0)[0].curve.ece;
            } catch (const Error& e) {
                row.status = "failed";
                row.message = e.what();
                for (char& c : row.message)
                    if (c == ',' || c == '\n') c = ';';
            }
            rows.push_back(row);
            std::printf("cell %s: %s\n", cellname, row.status.c_str());
            std::fflush(stdout);
        }
    }

    std::FILE* f = std::fopen((dir / "sweep.csv").string().c_str(), "w");
    if (!f) throw Error("cannot write sweep.csv");
    std::fprintf(f, "mode,cell,seed,status,elbo,entropy,sigma0,median_joint_std_deg,"
                    "median_spatial_p50_mm,ece0,message\n");
    for (const SweepRow& r : rows)
        std::fprintf(f, "%s,%.17g,%llu,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n",
                     r.mode.c_str(), r.cell, static_cast<unsigned long long>(r.seed),
                     r.status.c_str(), r.elbo, r.entropy, r.sigma0, r.med_joint_std_deg,
                     r.med_spatial_p50_mm, r.ece0, r.message.c_str());
    std::fclose(f);

    write_manifest(dir, "ablate", infer::config_hash(spec.config), spec.config.seed,
                   {"sweep.csv"}, timer.seconds());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"variational joint-uncertainty estimation from multiview keypoints"};
    app.require_subcommand(1);
    std::function<int()> run;

    // synth
    auto* s_synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string sy_config, sy_out;
    s_synth->add_option("--config", sy_config, "synth config json")->required();
    s_synth->add_option("--out", sy_out, "output directory")->required();
    s_synth->callback([&] { run = [&] { return cmd_synth(sy_config, sy_out); }; });

    // fit
    auto* s_fit = app.add_subcommand("fit", "fit the variational posterior to a session");
    std::string f_session, f_out;
    FitOverrides f_ov;
    bool f_quiet = false;
    s_fit->add_option("--session", f_session, "session json")->required();
    s_fit->add_option("--out", f_out, "output directory")->required();
    s_fit->add_option("--rank", f_ov.rank, "posterior covariance rank override");
    s_fit->add_option("--family", f_ov.family,
                      "likelihood family override (exponential|half_cauchy|half_normal)");
    s_fit->add_option("--steps", f_ov.steps, "total optimization steps override");
    s_fit->add_option("--seed", f_ov.seed, "seed override");
    s_fit->add_option("--threads", f_ov.threads, "thread count override (0 = env)");
    s_fit->add_flag("--quiet", f_quiet, "suppress per-step logging");
    s_fit->callback([&] { run = [&] { return cmd_fit(f_session, f_out, f_ov, f_quiet); }; });

    // report
    auto* s_report = app.add_subcommand("report", "uncertainty and calibration reports");
    std::string r_ck, r_out;
    std::vector<std::string> r_obs;
    std::vector<double> r_clips;
    int r_samples = 250;
    std::uint64_t r_seed = 1;
    s_report->add_option("--checkpoint", r_ck, "checkpoint json")->required();
    s_report->add_option("--obs", r_obs, "observation csv per trial (order as fitted)")
        ->required();
    s_report->add_option("--out", r_out, "output directory")->required();
    s_report->add_option("--ece-clips", r_clips, "likelihood width clips, px (default 0 1 2 5)");
    s_report->add_option("--samples", r_samples, "samples per frame for spatial intervals");
    s_report->add_option("--seed", r_seed, "sampling seed");
    s_report->callback(
        [&] { run = [&] { return cmd_report(r_ck, r_obs, r_out, r_clips, r_samples, r_seed); }; });

    // ablate
    auto* s_ablate = app.add_subcommand("ablate", "sweep noise level, camera count, or rank");
    std::string a_session, a_mode, a_out;
    std::vector<double> a_grid;
    int a_seeds = 1, a_steps = -1;
    bool a_quiet = true;
    s_ablate->add_option("--session", a_session, "session json")->required();
    s_ablate->add_option("--mode", a_mode, "noise | cameras | rank")->required();
    s_ablate->add_option("--grid", a_grid, "grid values (px, camera counts, or ranks)")
        ->required();
    s_ablate->add_option("--out", a_out, "output directory")->required();
    s_ablate->add_option("--seeds", a_seeds, "repeats per cell with consecutive seeds");
    s_ablate->add_option("--steps", a_steps, "total optimization steps override");
    s_ablate->add_flag("!--verbose", a_quiet, "per-step logging for every cell");
    s_ablate->callback([&] {
        run = [&] { return cmd_ablate(a_session, a_mode, a_grid, a_out, a_seeds, a_steps, a_quiet); };
    });

    CLI11_PARSE(app, argc, argv);

    try {
        return run();
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
}
