#pragma once

// Adam / AdamW over a contiguous parameter slice.  Weight decay is decoupled
// (applied as a direct shrink before the moment update) and restricted to a
// prefix of the slice, which is how the net-weights-only decay is expressed.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "kinvar/errors.hpp"

namespace kinvar::opt {

struct AdamState {
    std::vector<double> m, v;
    std::int64_t t = 0;
};

class Adam {
public:
    Adam(std::size_t n, double beta1, double beta2, double eps)
        : b1_(beta1), b2_(beta2), eps_(eps) {
        st_.m.assign(n, 0.0);
        st_.v.assign(n, 0.0);
    }

    // p -= lr * mhat / (sqrt(vhat) + eps); decay shrinks p[0..wd_end) first
    void step(std::span<double> p, std::span<const double> g, double lr,
              double weight_decay = 0.0, std::size_t wd_end = 0) {
        if (p.size() != st_.m.size() || g.size() != st_.m.size())
            throw Error("optimizer size mismatch");
        ++st_.t;
        const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(st_.t));
        const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(st_.t));
        if (weight_decay != 0.0) {
            const double shrink = 1.0 - lr * weight_decay;
            for (std::size_t i = 0; i < wd_end; ++i) p[i] *= shrink;
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            st_.m[i] = b1_ * st_.m[i] + (1.0 - b1_) * gi;
            st_.v[i] = b2_ * st_.v[i] + (1.0 - b2_) * gi * gi;
            const double mhat = st_.m[i] / bc1;
            const double vhat = st_.v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }

    AdamState& state() { return st_; }
    const AdamState& state() const { return st_; }
    void load(AdamState s) {
        if (s.m.size() != st_.m.size() || s.v.size() != st_.v.size())
            throw Error("optimizer state size mismatch");
        st_ = std::move(s);
    }

private:
    double b1_, b2_, eps_;
    AdamState st_;
};

} // namespace kinvar::opt
