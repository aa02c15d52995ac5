#pragma once

// Reverse-mode autodiff on a flat tape of scalar nodes.  Recording is eager:
// emitting a node computes its value immediately and checks it is finite, so
// the forward pass is implicit in recording and failures are localized to the
// exact operation.  A handful of fused range primitives (dot products over
// contiguous id ranges) keep dense inner loops vectorizable while the rest of
// the graph stays plain scalar ops.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kinvar/errors.hpp"

namespace kinvar::ad {

enum class Op : std::uint8_t {
    Const, Input, Copy,
    Add, Sub, Mul, Div, Neg,
    Sin, Cos, Tanh, Exp, Log, Sqrt, Relu, Softplus, Square,
    Lin1,      // c0*x + c1                       (consts in cpool at aux)
    Lin2,      // c0*x + c1*y + c2                (consts in cpool at aux)
    Dot3,      // sum_{k<3} val[ip[aux+k]] * val[ip[aux+3+k]]
    SumRange,  // sum_i val[a+i]
    DotRange,  // sum_i val[a+i] * val[b+i]
    DotConst,  // sum_i val[a+i] * cp[aux+i]  (+ val[b] if b != no_id)
    AffineDot, // sum_i val[a+i] * val[b+i] + val[aux]
};

const char* op_name(Op op);

namespace detail {

// eight independent accumulator chains: keeps the reduction order fixed (so
// results are bit-identical between recording and replay) while still letting
// the compiler use SIMD/parallel FMA chains.
inline double dot_kernel(const double* x, const double* y, std::uint32_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    std::uint32_t k = 0;
    for (; k + 8 <= n; k += 8) {
        s0 += x[k] * y[k];
        s1 += x[k + 1] * y[k + 1];
        s2 += x[k + 2] * y[k + 2];
        s3 += x[k + 3] * y[k + 3];
        s4 += x[k + 4] * y[k + 4];
        s5 += x[k + 5] * y[k + 5];
        s6 += x[k + 6] * y[k + 6];
        s7 += x[k + 7] * y[k + 7];
    }
    for (; k < n; ++k) s0 += x[k] * y[k];
    return ((s0 + s4) + (s1 + s5)) + ((s2 + s6) + (s3 + s7));
}

inline double sum_kernel(const double* x, std::uint32_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::uint32_t k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += x[k];
        s1 += x[k + 1];
        s2 += x[k + 2];
        s3 += x[k + 3];
    }
    for (; k < n; ++k) s0 += x[k];
    return (s0 + s2) + (s1 + s3);
}

} // namespace detail

class Tape {
public:
    using id_t = std::uint32_t;
    static constexpr id_t no_id = 0xffffffffu;

    Tape() { scopes_.reserve(8); }

    std::size_t size() const { return nodes_.size(); }
    void clear() {
        nodes_.clear();
        val_.clear();
        adj_.clear();
        cpool_.clear();
        ipool_.clear();
        scopes_.clear();
    }
    void reserve(std::size_t nodes) {
        nodes_.reserve(nodes);
        val_.reserve(nodes);
    }

    // scope labels give NumericError a place name
    void push_scope(std::string label) { scopes_.push_back(std::move(label)); }
    void pop_scope() { if (!scopes_.empty()) scopes_.pop_back(); }

    double value(id_t i) const { return val_[i]; }
    double adjoint(id_t i) const { return adj_[i]; }

    // ---- leaf nodes ----

    id_t constant(double v) { return finish(Op::Const, v, 0, 0, 0, 0); }

    id_t input(double v) { return finish(Op::Input, v, 0, 0, 0, 0); }

    // contiguous block of inputs; returns the id of the first
    id_t inputs(std::span<const double> xs) {
        const id_t first = static_cast<id_t>(nodes_.size());
        nodes_.reserve(nodes_.size() + xs.size());
        val_.reserve(val_.size() + xs.size());
        for (double x : xs) input(x);
        return first;
    }

    // overwrite an input's value (for replay with new data)
    void set_input(id_t i, double v) { val_[i] = v; }

    // ---- scalar ops ----

    id_t copy(id_t x) { return finish(Op::Copy, val_[x], x, 0, 0, 0); }
    id_t add(id_t x, id_t y) { return finish(Op::Add, val_[x] + val_[y], x, y, 0, 0); }
    id_t sub(id_t x, id_t y) { return finish(Op::Sub, val_[x] - val_[y], x, y, 0, 0); }
    id_t mul(id_t x, id_t y) { return finish(Op::Mul, val_[x] * val_[y], x, y, 0, 0); }
    id_t div(id_t x, id_t y) { return finish(Op::Div, val_[x] / val_[y], x, y, 0, 0); }
    id_t neg(id_t x) { return finish(Op::Neg, -val_[x], x, 0, 0, 0); }
    id_t sin_(id_t x) { return finish(Op::Sin, std::sin(val_[x]), x, 0, 0, 0); }
    id_t cos_(id_t x) { return finish(Op::Cos, std::cos(val_[x]), x, 0, 0, 0); }
    id_t tanh_(id_t x) { return finish(Op::Tanh, std::tanh(val_[x]), x, 0, 0, 0); }
    id_t exp_(id_t x) { return finish(Op::Exp, std::exp(val_[x]), x, 0, 0, 0); }
    id_t log_(id_t x) { return finish(Op::Log, std::log(val_[x]), x, 0, 0, 0); }
    id_t sqrt_(id_t x) { return finish(Op::Sqrt, std::sqrt(val_[x]), x, 0, 0, 0); }
    id_t relu(id_t x) { return finish(Op::Relu, val_[x] > 0 ? val_[x] : 0.0, x, 0, 0, 0); }
    id_t softplus(id_t x) { return finish(Op::Softplus, softplus_val(val_[x]), x, 0, 0, 0); }
    id_t square(id_t x) { return finish(Op::Square, val_[x] * val_[x], x, 0, 0, 0); }

    // a*x + b
    id_t lin1(id_t x, double a, double b) {
        const std::uint32_t off = push_consts({a, b});
        return finish(Op::Lin1, a * val_[x] + b, x, 0, 0, off);
    }
    // a*x + b*y + c
    id_t lin2(id_t x, id_t y, double a, double b, double c) {
        const std::uint32_t off = push_consts({a, b, c});
        return finish(Op::Lin2, a * val_[x] + b * val_[y] + c, x, y, 0, off);
    }

    // ---- fused range ops ----

    id_t dot3(const id_t x[3], const id_t y[3]) {
        const std::uint32_t off = static_cast<std::uint32_t>(ipool_.size());
        ipool_.insert(ipool_.end(), {x[0], x[1], x[2], y[0], y[1], y[2]});
        const double v = val_[x[0]] * val_[y[0]] + val_[x[1]] * val_[y[1]] + val_[x[2]] * val_[y[2]];
        return finish(Op::Dot3, v, 0, 0, 0, off);
    }

    id_t sum_range(id_t start, std::uint32_t n) {
        const double s = detail::sum_kernel(val_.data() + start, n);
        return finish(Op::SumRange, s, start, 0, n, 0);
    }

    id_t dot_range(id_t xs, id_t ys, std::uint32_t n) {
        const double s = detail::dot_kernel(val_.data() + xs, val_.data() + ys, n);
        return finish(Op::DotRange, s, xs, ys, n, 0);
    }

    // stash constants for reuse by many dot_const nodes
    std::uint32_t push_pool(std::span<const double> w) {
        const std::uint32_t off = static_cast<std::uint32_t>(cpool_.size());
        cpool_.insert(cpool_.end(), w.begin(), w.end());
        return off;
    }

    // dot of node range with pooled constants, optionally plus a bias node
    id_t dot_const_pooled(id_t xs, std::uint32_t pool_off, std::uint32_t n, id_t bias = no_id) {
        double s = detail::dot_kernel(val_.data() + xs, cpool_.data() + pool_off, n);
        if (bias != no_id) s += val_[bias];
        return finish(Op::DotConst, s, xs, bias, n, pool_off);
    }

    // dot of node range with plain constants, optionally plus a bias node
    id_t dot_const(id_t xs, std::span<const double> w, id_t bias = no_id) {
        return dot_const_pooled(xs, push_pool(w), static_cast<std::uint32_t>(w.size()), bias);
    }

    // sum_i val[xs+i]*val[ws+i] + val[bias]
    id_t affine_dot(id_t xs, id_t ws, std::uint32_t n, id_t bias) {
        const double s = detail::dot_kernel(val_.data() + xs, val_.data() + ws, n) + val_[bias];
        return finish(Op::AffineDot, s, xs, ws, n, bias);
    }

    // ---- passes ----

    // reverse sweep from `out`; adjoints of all nodes are (re)computed
    void backward(id_t out, double seed = 1.0);

    // accumulate adjoints of the contiguous input block starting at `first`
    void add_input_adjoints(id_t first, std::span<double> out) const {
        const double* a = adj_.data() + first;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += a[i];
    }

    // re-execute every recorded op (inputs/constants keep their values).
    // produces values bit-identical to the original recording.
    void replay();

private:
    double softplus_val(double x) const {
        if (x > 30.0) return x;
        if (x < -30.0) return std::exp(x);
        return std::log1p(std::exp(x));
    }

    std::uint32_t push_consts(std::initializer_list<double> cs) {
        const std::uint32_t off = static_cast<std::uint32_t>(cpool_.size());
        cpool_.insert(cpool_.end(), cs.begin(), cs.end());
        return off;
    }

    id_t finish(Op op, double v, id_t a, id_t b, std::uint32_t n, std::uint32_t aux) {
        if (!std::isfinite(v))
            throw NumericError(op_name(op), nodes_.size(), scopes_.empty() ? std::string() : scopes_.back());
        nodes_.push_back(Node{op, a, b, n, aux});
        val_.push_back(v);
        return static_cast<id_t>(nodes_.size() - 1);
    }

    struct Node {
        Op op;
        id_t a, b;
        std::uint32_t n, aux;
    };

    std::vector<Node> nodes_;
    std::vector<double> val_, adj_;
    std::vector<double> cpool_;
    std::vector<id_t> ipool_;
    std::vector<std::string> scopes_;
};

// lightweight handle used by generic scalar code
struct Value {
    Tape* tape = nullptr;
    Tape::id_t id = 0;

    double v() const { return tape->value(id); }
};

inline Value operator+(Value a, Value b) { return {a.tape, a.tape->add(a.id, b.id)}; }
inline Value operator-(Value a, Value b) { return {a.tape, a.tape->sub(a.id, b.id)}; }
inline Value operator*(Value a, Value b) { return {a.tape, a.tape->mul(a.id, b.id)}; }
inline Value operator/(Value a, Value b) { return {a.tape, a.tape->div(a.id, b.id)}; }
inline Value operator-(Value a) { return {a.tape, a.tape->neg(a.id)}; }
inline Value operator+(Value a, double c) { return {a.tape, a.tape->lin1(a.id, 1.0, c)}; }
inline Value operator+(double c, Value a) { return a + c; }
inline Value operator-(Value a, double c) { return a + (-c); }
inline Value operator-(double c, Value a) { return {a.tape, a.tape->lin1(a.id, -1.0, c)}; }
inline Value operator*(Value a, double c) { return {a.tape, a.tape->lin1(a.id, c, 0.0)}; }
inline Value operator*(double c, Value a) { return a * c; }
inline Value operator/(Value a, double c) { return a * (1.0 / c); }

inline Value sin(Value a) { return {a.tape, a.tape->sin_(a.id)}; }
inline Value cos(Value a) { return {a.tape, a.tape->cos_(a.id)}; }
inline Value tanh(Value a) { return {a.tape, a.tape->tanh_(a.id)}; }
inline Value exp(Value a) { return {a.tape, a.tape->exp_(a.id)}; }
inline Value log(Value a) { return {a.tape, a.tape->log_(a.id)}; }
inline Value sqrt(Value a) { return {a.tape, a.tape->sqrt_(a.id)}; }
inline Value relu(Value a) { return {a.tape, a.tape->relu(a.id)}; }
inline Value softplus(Value a) { return {a.tape, a.tape->softplus(a.id)}; }
inline Value square(Value a) { return {a.tape, a.tape->square(a.id)}; }

} // namespace kinvar::ad
