#pragma once

// Time-conditioned low-rank Gaussian posterior over poses.  An MLP maps an
// encoded timestamp to per-timestep moments (mu, d, U) of
//   q(theta_t) = N(mu, diag(d^2) + U U^T).
// Bounded pose dimensions get their mean squashed into the joint range with
// tanh; d is softplus(raw) + 1e-6; U is unconstrained (K x R).

#include <cstdint>
#include <span>
#include <vector>

#include "kinvar/math.hpp"
#include "kinvar/rng.hpp"
#include "kinvar/tape.hpp"

namespace kinvar::post {

struct Bound {
    bool bounded = false;
    double lo = 0, hi = 0;
};

struct NetConfig {
    int K = 0;                              // pose dimension
    int R = 5;                              // low-rank columns (0 = diagonal)
    std::vector<int> hidden{128, 256, 512, 1024};
    double duration = 1.0;                  // trajectory length in seconds
    int enc_B = 1;                          // sin/cos frequency count
    std::vector<Bound> bounds;              // per pose dof, size K

    // number of frequency bands so the finest sinusoid resolves an 80 Hz
    // grid over the whole duration: ceil(log2(2 * 80 * duration)), min 1
    static int freq_bands(double duration);

    int enc_dim() const { return 2 * enc_B + 1; }
    int out_dim() const { return K + K + K * R; }
    std::vector<int> layer_sizes() const;   // [enc, hidden..., out]
    std::size_t weight_count() const;
};

// features [tau, sin(2^i tau), cos(2^i tau) for i < B], tau = pi * t / duration
void encode_time(double t, double duration, int B, std::span<double> out);

struct Moments {
    std::vector<double> mu;  // K (squashed)
    std::vector<double> d;   // K (positive)
    std::vector<double> U;   // K x R row-major
};

class TrajectoryNet {
public:
    explicit TrajectoryNet(NetConfig cfg);

    const NetConfig& config() const { return cfg_; }
    std::size_t weight_count() const { return n_weights_; }

    // hidden layers He-uniform, output layer zeroed
    void init_weights(std::span<double> w, Rng& rng) const;

    // plain double evaluation; bit-identical to the tape recording
    void eval(std::span<const double> w, double t, Moments& out) const;

    // entropy of N(mu, diag(d^2) + U U^T):
    //   K/2 ln(2 pi e) + sum ln d + 1/2 ln det(I_R + U^T diag(d^-2) U)
    double entropy(const Moments& m) const;

    // dense K x K covariance, marginal stds, correlation matrix
    static std::vector<double> covariance(const Moments& m, int K, int R);
    static std::vector<double> marginal_std(const Moments& m, int K, int R);
    static std::vector<double> correlation(const Moments& m, int K, int R);

    // ---- tape path ----

    struct TapeMoments {
        ad::Tape::id_t mu = 0;  // start of contiguous K squashed means
        ad::Tape::id_t d = 0;   // start of contiguous K positive scales
        ad::Tape::id_t U = 0;   // start of contiguous K*R row-major entries
    };

    // record evaluation at many timestamps at once.  w0 is the first of
    // weight_count() contiguous input nodes holding the flat weights.
    // Recording is batched so each weight row streams through the cache once
    // per call instead of once per timestamp.
    std::vector<TapeMoments> record_batch(ad::Tape& tape, ad::Tape::id_t w0,
                                          std::span<const double> times) const;

    // H(q_t) from recorded moments (differentiable)
    ad::Value record_entropy(ad::Tape& tape, const TapeMoments& m) const;

    // theta = mu + d .* eps1 + U eps2; returns start of K contiguous nodes
    ad::Tape::id_t record_sample(ad::Tape& tape, const TapeMoments& m,
                                 std::span<const double> eps1,
                                 std::span<const double> eps2) const;

private:
    NetConfig cfg_;
    std::vector<int> sizes_;
    std::vector<std::size_t> w_off_, b_off_; // per-layer offsets into the flat weights
    std::size_t n_weights_ = 0;
};

} // namespace kinvar::post
