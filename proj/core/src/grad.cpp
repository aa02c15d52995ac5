#include "kinvar/grad.hpp"

namespace kinvar::ad {

namespace {

std::vector<Value> make_inputs(Tape& tape, std::span<const double> x) {
    const Tape::id_t first = tape.inputs(x);
    std::vector<Value> vs(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        vs[i] = Value{&tape, static_cast<Tape::id_t>(first + i)};
    return vs;
}

} // namespace

GradResult gradient(const ScalarFn& f, std::span<const double> x) {
    Tape tape;
    const auto xin = make_inputs(tape, x);
    const Value out = f(tape, xin);
    tape.backward(out.id);
    GradResult r;
    r.value = out.v();
    r.grad.assign(x.size(), 0.0);
    tape.add_input_adjoints(xin.empty() ? 0 : xin.front().id, r.grad);
    return r;
}

JacobianResult jacobian(const VectorFn& f, std::span<const double> x) {
    Tape tape;
    const auto xin = make_inputs(tape, x);
    const std::vector<Value> outs = f(tape, xin);
    JacobianResult r;
    r.rows = outs.size();
    r.cols = x.size();
    r.value.resize(outs.size());
    r.jac.assign(outs.size() * x.size(), 0.0);
    for (std::size_t m = 0; m < outs.size(); ++m) {
        r.value[m] = outs[m].v();
        tape.backward(outs[m].id);
        std::span<double> row(r.jac.data() + m * x.size(), x.size());
        tape.add_input_adjoints(xin.empty() ? 0 : xin.front().id, row);
    }
    return r;
}

double directional(const ScalarFn& f, std::span<const double> x, std::span<const double> dir) {
    const GradResult g = gradient(f, x);
    double s = 0;
    for (std::size_t i = 0; i < dir.size(); ++i) s += g.grad[i] * dir[i];
    return s;
}

} // namespace kinvar::ad
