#include "kinvar/posterior.hpp"

#include <cmath>

#include "kinvar/scalar_ops.hpp"

namespace kinvar::post {

int NetConfig::freq_bands(double duration) {
    if (!(duration > 0)) throw Error("posterior: duration must be positive");
    const int b = static_cast<int>(std::ceil(std::log2(2.0 * 80.0 * duration)));
    return b < 1 ? 1 : b;
}

std::vector<int> NetConfig::layer_sizes() const {
    std::vector<int> s;
    s.push_back(enc_dim());
    for (int h : hidden) s.push_back(h);
    s.push_back(out_dim());
    return s;
}

std::size_t NetConfig::weight_count() const {
    const auto s = layer_sizes();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < s.size(); ++l)
        n += static_cast<std::size_t>(s[l]) * static_cast<std::size_t>(s[l + 1]) +
             static_cast<std::size_t>(s[l + 1]);
    return n;
}

void encode_time(double t, double duration, int B, std::span<double> out) {
    const double tau = kPi * t / duration;
    out[0] = tau;
    double f = 1.0;
    for (int i = 0; i < B; ++i) {
        out[static_cast<std::size_t>(1 + 2 * i)] = std::sin(f * tau);
        out[static_cast<std::size_t>(2 + 2 * i)] = std::cos(f * tau);
        f *= 2.0;
    }
}

TrajectoryNet::TrajectoryNet(NetConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.K <= 0) throw Error("posterior: K must be positive");
    if (cfg_.R < 0) throw Error("posterior: R must be non-negative");
    if (static_cast<int>(cfg_.bounds.size()) != cfg_.K)
        throw Error("posterior: bounds size must equal K");
    sizes_ = cfg_.layer_sizes();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const std::size_t in = static_cast<std::size_t>(sizes_[l]);
        const std::size_t out = static_cast<std::size_t>(sizes_[l + 1]);
        w_off_.push_back(off);
        off += in * out;
        b_off_.push_back(off);
        off += out;
    }
    n_weights_ = off;
}

void TrajectoryNet::init_weights(std::span<double> w, Rng& rng) const {
    const std::size_t L = w_off_.size();
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t in = static_cast<std::size_t>(sizes_[l]);
        const std::size_t out = static_cast<std::size_t>(sizes_[l + 1]);
        if (l + 1 == L) {
            // zero output layer: moments start at the center of their ranges
            for (std::size_t i = 0; i < in * out + out; ++i) w[w_off_[l] + i] = 0.0;
        } else {
            const double lim = std::sqrt(6.0 / static_cast<double>(in));
            for (std::size_t i = 0; i < in * out; ++i) w[w_off_[l] + i] = rng.uniform(-lim, lim);
            for (std::size_t i = 0; i < out; ++i) w[b_off_[l] + i] = 0.0;
        }
    }
}

void TrajectoryNet::eval(std::span<const double> w, double t, Moments& out) const {
    thread_local std::vector<double> x, y;
    const int E = cfg_.enc_dim();
    x.resize(static_cast<std::size_t>(E));
    encode_time(t, cfg_.duration, cfg_.enc_B, x);

    const std::size_t L = w_off_.size();
    for (std::size_t l = 0; l < L; ++l) {
        const std::uint32_t in = static_cast<std::uint32_t>(sizes_[l]);
        const std::size_t nout = static_cast<std::size_t>(sizes_[l + 1]);
        y.resize(nout);
        const double* wl = w.data() + w_off_[l];
        const double* bl = w.data() + b_off_[l];
        for (std::size_t i = 0; i < nout; ++i)
            y[i] = ad::detail::dot_kernel(x.data(), wl + i * in, in) + bl[i];
        if (l + 1 < L)
            for (double& v : y) v = v > 0 ? v : 0.0;
        std::swap(x, y);
    }

    const int K = cfg_.K, R = cfg_.R;
    out.mu.resize(static_cast<std::size_t>(K));
    out.d.resize(static_cast<std::size_t>(K));
    out.U.resize(static_cast<std::size_t>(K * R));
    for (int k = 0; k < K; ++k) {
        const double raw = x[static_cast<std::size_t>(k)];
        const Bound& b = cfg_.bounds[static_cast<std::size_t>(k)];
        if (b.bounded) {
            const double half = 0.5 * (b.hi - b.lo);
            const double mid = 0.5 * (b.hi + b.lo);
            out.mu[static_cast<std::size_t>(k)] = half * std::tanh(raw) + mid;
        } else {
            out.mu[static_cast<std::size_t>(k)] = raw;
        }
    }
    for (int k = 0; k < K; ++k)
        out.d[static_cast<std::size_t>(k)] =
            1.0 * kinvar::softplus(x[static_cast<std::size_t>(K + k)]) + 1e-6;
    for (int j = 0; j < K * R; ++j)
        out.U[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(2 * K + j)];
}

// ---- entropy (shared algorithm for both scalar paths) ----

namespace {

template <class S>
void cholesky_in_place(std::vector<S>& A, int n) {
    using std::sqrt;
    for (int j = 0; j < n; ++j) {
        S d = A[static_cast<std::size_t>(j * n + j)];
        for (int k = 0; k < j; ++k) {
            const S l = A[static_cast<std::size_t>(j * n + k)];
            d = d - l * l;
        }
        const S piv = sqrt(d);
        A[static_cast<std::size_t>(j * n + j)] = piv;
        for (int i = j + 1; i < n; ++i) {
            S s = A[static_cast<std::size_t>(i * n + j)];
            for (int k = 0; k < j; ++k)
                s = s - A[static_cast<std::size_t>(i * n + k)] * A[static_cast<std::size_t>(j * n + k)];
            A[static_cast<std::size_t>(i * n + j)] = s / piv;
        }
    }
}

} // namespace

double TrajectoryNet::entropy(const Moments& m) const {
    const int K = cfg_.K, R = cfg_.R;
    const double c0 = 0.5 * K * kLn2PiE;

    std::vector<double> lnd(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) lnd[static_cast<std::size_t>(k)] = std::log(m.d[static_cast<std::size_t>(k)]);
    const double sumlnd = ad::detail::sum_kernel(lnd.data(), static_cast<std::uint32_t>(K));
    if (R == 0) return 1.0 * sumlnd + c0;

    // columns of W = diag(1/d) U, stored column-major so dots are contiguous
    std::vector<double> W(static_cast<std::size_t>(K * R));
    for (int r = 0; r < R; ++r)
        for (int k = 0; k < K; ++k)
            W[static_cast<std::size_t>(r * K + k)] =
                m.U[static_cast<std::size_t>(k * R + r)] / m.d[static_cast<std::size_t>(k)];

    std::vector<double> M(static_cast<std::size_t>(R * R));
    for (int r = 0; r < R; ++r)
        for (int r2 = 0; r2 <= r; ++r2) {
            double v = ad::detail::dot_kernel(W.data() + r * K, W.data() + r2 * K,
                                              static_cast<std::uint32_t>(K));
            if (r2 == r) v = 1.0 * v + 1.0;
            M[static_cast<std::size_t>(r * R + r2)] = v;
            M[static_cast<std::size_t>(r2 * R + r)] = v;
        }
    cholesky_in_place(M, R);
    double sumlog = std::log(M[0]);
    for (int r = 1; r < R; ++r)
        sumlog = sumlog + std::log(M[static_cast<std::size_t>(r * R + r)]);
    // H = c0 + sum ln d + (1/2) * 2 * sum ln L_rr
    return 1.0 * sumlnd + 1.0 * sumlog + c0;
}

std::vector<double> TrajectoryNet::covariance(const Moments& m, int K, int R) {
    std::vector<double> C(static_cast<std::size_t>(K) * static_cast<std::size_t>(K), 0.0);
    for (int i = 0; i < K; ++i) {
        C[static_cast<std::size_t>(i * K + i)] =
            m.d[static_cast<std::size_t>(i)] * m.d[static_cast<std::size_t>(i)];
        for (int j = 0; j <= i; ++j) {
            double s = 0;
            for (int r = 0; r < R; ++r)
                s += m.U[static_cast<std::size_t>(i * R + r)] * m.U[static_cast<std::size_t>(j * R + r)];
            C[static_cast<std::size_t>(i * K + j)] += s;
            if (i != j) C[static_cast<std::size_t>(j * K + i)] = C[static_cast<std::size_t>(i * K + j)];
        }
    }
    return C;
}

std::vector<double> TrajectoryNet::marginal_std(const Moments& m, int K, int R) {
    std::vector<double> s(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
        double v = m.d[static_cast<std::size_t>(i)] * m.d[static_cast<std::size_t>(i)];
        for (int r = 0; r < R; ++r) v += sq(m.U[static_cast<std::size_t>(i * R + r)]);
        s[static_cast<std::size_t>(i)] = std::sqrt(v);
    }
    return s;
}

std::vector<double> TrajectoryNet::correlation(const Moments& m, int K, int R) {
    std::vector<double> C = covariance(m, K, R);
    std::vector<double> s = marginal_std(m, K, R);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j)
            C[static_cast<std::size_t>(i * K + j)] /=
                s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(j)];
    return C;
}

// ---- tape path ----

std::vector<TrajectoryNet::TapeMoments> TrajectoryNet::record_batch(
    ad::Tape& tape, ad::Tape::id_t w0, std::span<const double> times) const {
    using id_t = ad::Tape::id_t;
    const std::uint32_t T = static_cast<std::uint32_t>(times.size());
    const int E = cfg_.enc_dim();
    const int K = cfg_.K;
    const std::size_t L = w_off_.size();

    // rough node estimate for one reserve
    std::size_t est = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
        est += 3u * static_cast<std::size_t>(sizes_[l + 1]) * T;
    est += static_cast<std::size_t>(6 * K) * T;
    tape.reserve(tape.size() + est);

    tape.push_scope("trajectory_net");

    // pooled time encodings
    std::vector<std::uint32_t> enc_off(T);
    std::vector<double> enc(static_cast<std::size_t>(E));
    for (std::uint32_t t = 0; t < T; ++t) {
        encode_time(times[t], cfg_.duration, cfg_.enc_B, enc);
        enc_off[t] = tape.push_pool(enc);
    }

    id_t gathered = 0; // start of per-timestep contiguous activation blocks
    for (std::size_t l = 0; l < L; ++l) {
        const std::uint32_t in = static_cast<std::uint32_t>(sizes_[l]);
        const std::uint32_t nout = static_cast<std::uint32_t>(sizes_[l + 1]);
        const id_t wl = w0 + static_cast<id_t>(w_off_[l]);
        const id_t bl = w0 + static_cast<id_t>(b_off_[l]);

        // dots, row-major with timesteps innermost: weight row stays hot
        id_t dots;
        if (l == 0) {
            dots = static_cast<id_t>(tape.size());
            for (std::uint32_t i = 0; i < nout; ++i)
                for (std::uint32_t t = 0; t < T; ++t)
                    tape.dot_const_pooled(wl + i * in, enc_off[t], in, bl + i);
        } else {
            dots = static_cast<id_t>(tape.size());
            for (std::uint32_t i = 0; i < nout; ++i)
                for (std::uint32_t t = 0; t < T; ++t)
                    tape.affine_dot(gathered + t * in, wl + i * in, in, bl + i);
        }

        id_t acts = dots;
        if (l + 1 < L) {
            acts = static_cast<id_t>(tape.size());
            for (std::uint32_t i = 0; i < nout; ++i)
                for (std::uint32_t t = 0; t < T; ++t) tape.relu(dots + i * T + t);
        }

        // transpose-gather into per-timestep contiguous blocks
        const id_t g = static_cast<id_t>(tape.size());
        for (std::uint32_t t = 0; t < T; ++t)
            for (std::uint32_t i = 0; i < nout; ++i) tape.copy(acts + i * T + t);
        // gather emits nout nodes per t but ids interleave only between
        // blocks, so block t starts at g + t*nout
        gathered = g;
    }

    // heads per timestep
    const std::uint32_t M = static_cast<std::uint32_t>(cfg_.out_dim());
    std::vector<TapeMoments> out(T);
    std::vector<id_t> tanh_ids(static_cast<std::size_t>(K));
    for (std::uint32_t t = 0; t < T; ++t) {
        const id_t h = gathered + t * M;
        for (int k = 0; k < K; ++k)
            if (cfg_.bounds[static_cast<std::size_t>(k)].bounded)
                tanh_ids[static_cast<std::size_t>(k)] = tape.tanh_(h + static_cast<id_t>(k));
        const id_t mu = static_cast<id_t>(tape.size());
        for (int k = 0; k < K; ++k) {
            const Bound& b = cfg_.bounds[static_cast<std::size_t>(k)];
            if (b.bounded)
                tape.lin1(tanh_ids[static_cast<std::size_t>(k)], 0.5 * (b.hi - b.lo),
                          0.5 * (b.hi + b.lo));
            else
                tape.copy(h + static_cast<id_t>(k));
        }
        const id_t sp = static_cast<id_t>(tape.size());
        for (int k = 0; k < K; ++k) tape.softplus(h + static_cast<id_t>(K + k));
        const id_t d = static_cast<id_t>(tape.size());
        for (int k = 0; k < K; ++k) tape.lin1(sp + static_cast<id_t>(k), 1.0, 1e-6);

        out[t] = TapeMoments{mu, d, h + static_cast<id_t>(2 * K)};
    }

    tape.pop_scope();
    return out;
}

ad::Value TrajectoryNet::record_entropy(ad::Tape& tape, const TapeMoments& m) const {
    using id_t = ad::Tape::id_t;
    const int K = cfg_.K, R = cfg_.R;
    const double c0 = 0.5 * K * kLn2PiE;

    tape.push_scope("entropy");
    const id_t lnd = static_cast<id_t>(tape.size());
    for (int k = 0; k < K; ++k) tape.log_(m.d + static_cast<id_t>(k));
    const id_t sumlnd = tape.sum_range(lnd, static_cast<std::uint32_t>(K));
    if (R == 0) {
        const id_t h = tape.lin1(sumlnd, 1.0, c0);
        tape.pop_scope();
        return {&tape, h};
    }

    const id_t wcols = static_cast<id_t>(tape.size());
    for (int r = 0; r < R; ++r)
        for (int k = 0; k < K; ++k)
            tape.div(m.U + static_cast<id_t>(k * R + r), m.d + static_cast<id_t>(k));

    std::vector<ad::Value> M(static_cast<std::size_t>(R * R));
    for (int r = 0; r < R; ++r)
        for (int r2 = 0; r2 <= r; ++r2) {
            id_t v = tape.dot_range(wcols + static_cast<id_t>(r * K),
                                    wcols + static_cast<id_t>(r2 * K),
                                    static_cast<std::uint32_t>(K));
            if (r2 == r) v = tape.lin1(v, 1.0, 1.0);
            M[static_cast<std::size_t>(r * R + r2)] = {&tape, v};
            M[static_cast<std::size_t>(r2 * R + r)] = {&tape, v};
        }
    cholesky_in_place(M, R);
    ad::Value sumlog = log(M[0]);
    for (int r = 1; r < R; ++r)
        sumlog = sumlog + log(M[static_cast<std::size_t>(r * R + r)]);
    const id_t h = tape.lin2(sumlnd, sumlog.id, 1.0, 1.0, c0);
    tape.pop_scope();
    return {&tape, h};
}

ad::Tape::id_t TrajectoryNet::record_sample(ad::Tape& tape, const TapeMoments& m,
                                            std::span<const double> eps1,
                                            std::span<const double> eps2) const {
    using id_t = ad::Tape::id_t;
    const int K = cfg_.K, R = cfg_.R;
    if (R == 0) {
        const id_t th = static_cast<id_t>(tape.size());
        for (int k = 0; k < K; ++k)
            tape.lin2(m.mu + static_cast<id_t>(k), m.d + static_cast<id_t>(k), 1.0,
                      eps1[static_cast<std::size_t>(k)], 0.0);
        return th;
    }
    const std::uint32_t off = tape.push_pool(eps2);
    const id_t dc = static_cast<id_t>(tape.size());
    for (int k = 0; k < K; ++k)
        tape.dot_const_pooled(m.U + static_cast<id_t>(k * R), off, static_cast<std::uint32_t>(R),
                              m.mu + static_cast<id_t>(k));
    const id_t th = static_cast<id_t>(tape.size());
    for (int k = 0; k < K; ++k)
        tape.lin2(dc + static_cast<id_t>(k), m.d + static_cast<id_t>(k), 1.0,
                  eps1[static_cast<std::size_t>(k)], 0.0);
    return th;
}

} // namespace kinvar::post
