#include "kinvar/tape.hpp"

namespace kinvar::ad {

const char* op_name(Op op) {
    switch (op) {
        case Op::Const: return "const";
        case Op::Input: return "input";
        case Op::Copy: return "copy";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Neg: return "neg";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Tanh: return "tanh";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Relu: return "relu";
        case Op::Softplus: return "softplus";
        case Op::Square: return "square";
        case Op::Lin1: return "lin1";
        case Op::Lin2: return "lin2";
        case Op::Dot3: return "dot3";
        case Op::SumRange: return "sum_range";
        case Op::DotRange: return "dot_range";
        case Op::DotConst: return "dot_const";
        case Op::AffineDot: return "affine_dot";
    }
    return "?";
}

void Tape::backward(id_t out, double seed) {
    adj_.assign(val_.size(), 0.0);
    adj_[out] = seed;
    const double* vv = val_.data();
    double* aa = adj_.data();
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        const double g = aa[i];
        if (g == 0.0) continue;
        const Node& nd = nodes_[i];
        switch (nd.op) {
            case Op::Const:
            case Op::Input:
                break;
            case Op::Copy:
                aa[nd.a] += g;
                break;
            case Op::Add:
                aa[nd.a] += g;
                aa[nd.b] += g;
                break;
            case Op::Sub:
                aa[nd.a] += g;
                aa[nd.b] -= g;
                break;
            case Op::Mul:
                aa[nd.a] += g * vv[nd.b];
                aa[nd.b] += g * vv[nd.a];
                break;
            case Op::Div: {
                const double inv_b = 1.0 / vv[nd.b];
                aa[nd.a] += g * inv_b;
                aa[nd.b] -= g * vv[i] * inv_b;
            } break;
            case Op::Neg:
                aa[nd.a] -= g;
                break;
            case Op::Sin:
                aa[nd.a] += g * std::cos(vv[nd.a]);
                break;
            case Op::Cos:
                aa[nd.a] -= g * std::sin(vv[nd.a]);
                break;
            case Op::Tanh:
                aa[nd.a] += g * (1.0 - vv[i] * vv[i]);
                break;
            case Op::Exp:
                aa[nd.a] += g * vv[i];
                break;
            case Op::Log:
                aa[nd.a] += g / vv[nd.a];
                break;
            case Op::Sqrt:
                aa[nd.a] += g * 0.5 / vv[i];
                break;
            case Op::Relu:
                if (vv[nd.a] > 0) aa[nd.a] += g;
                break;
            case Op::Softplus: {
                const double x = vv[nd.a];
                const double s = x > 0 ? 1.0 / (1.0 + std::exp(-x)) : 1.0 - 1.0 / (1.0 + std::exp(x));
                aa[nd.a] += g * s;
            } break;
            case Op::Square:
                aa[nd.a] += 2.0 * g * vv[nd.a];
                break;
            case Op::Lin1:
                aa[nd.a] += g * cpool_[nd.aux];
                break;
            case Op::Lin2:
                aa[nd.a] += g * cpool_[nd.aux];
                aa[nd.b] += g * cpool_[nd.aux + 1];
                break;
            case Op::Dot3: {
                const id_t* ip = ipool_.data() + nd.aux;
                for (int k = 0; k < 3; ++k) {
                    aa[ip[k]] += g * vv[ip[k + 3]];
                    aa[ip[k + 3]] += g * vv[ip[k]];
                }
            } break;
            case Op::SumRange: {
                double* ax = aa + nd.a;
                for (std::uint32_t k = 0; k < nd.n; ++k) ax[k] += g;
            } break;
            case Op::DotRange: {
                const double* x = vv + nd.a;
                const double* y = vv + nd.b;
                double* ax = aa + nd.a;
                double* ay = aa + nd.b;
                for (std::uint32_t k = 0; k < nd.n; ++k) {
                    ax[k] += g * y[k];
                    ay[k] += g * x[k];
                }
            } break;
            case Op::DotConst: {
                const double* w = cpool_.data() + nd.aux;
                double* ax = aa + nd.a;
                for (std::uint32_t k = 0; k < nd.n; ++k) ax[k] += g * w[k];
                if (nd.b != no_id) aa[nd.b] += g;
            } break;
            case Op::AffineDot: {
                const double* x = vv + nd.a;
                const double* w = vv + nd.b;
                double* ax = aa + nd.a;
                double* aw = aa + nd.b;
                for (std::uint32_t k = 0; k < nd.n; ++k) {
                    ax[k] += g * w[k];
                    aw[k] += g * x[k];
                }
                aa[nd.aux] += g;
            } break;
        }
    }
}

void Tape::replay() {
    double* vv = val_.data();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& nd = nodes_[i];
        double v;
        switch (nd.op) {
            case Op::Const:
            case Op::Input:
                continue;
            case Op::Copy: v = vv[nd.a]; break;
            case Op::Add: v = vv[nd.a] + vv[nd.b]; break;
            case Op::Sub: v = vv[nd.a] - vv[nd.b]; break;
            case Op::Mul: v = vv[nd.a] * vv[nd.b]; break;
            case Op::Div: v = vv[nd.a] / vv[nd.b]; break;
            case Op::Neg: v = -vv[nd.a]; break;
            case Op::Sin: v = std::sin(vv[nd.a]); break;
            case Op::Cos: v = std::cos(vv[nd.a]); break;
            case Op::Tanh: v = std::tanh(vv[nd.a]); break;
            case Op::Exp: v = std::exp(vv[nd.a]); break;
            case Op::Log: v = std::log(vv[nd.a]); break;
            case Op::Sqrt: v = std::sqrt(vv[nd.a]); break;
            case Op::Relu: v = vv[nd.a] > 0 ? vv[nd.a] : 0.0; break;
            case Op::Softplus: v = softplus_val(vv[nd.a]); break;
            case Op::Square: v = vv[nd.a] * vv[nd.a]; break;
            case Op::Lin1: v = cpool_[nd.aux] * vv[nd.a] + cpool_[nd.aux + 1]; break;
            case Op::Lin2:
                v = cpool_[nd.aux] * vv[nd.a] + cpool_[nd.aux + 1] * vv[nd.b] + cpool_[nd.aux + 2];
                break;
            case Op::Dot3: {
                const id_t* ip = ipool_.data() + nd.aux;
                v = vv[ip[0]] * vv[ip[3]] + vv[ip[1]] * vv[ip[4]] + vv[ip[2]] * vv[ip[5]];
            } break;
            case Op::SumRange:
                v = detail::sum_kernel(vv + nd.a, nd.n);
                break;
            case Op::DotRange:
                v = detail::dot_kernel(vv + nd.a, vv + nd.b, nd.n);
                break;
            case Op::DotConst:
                v = detail::dot_kernel(vv + nd.a, cpool_.data() + nd.aux, nd.n);
                if (nd.b != no_id) v += vv[nd.b];
                break;
            case Op::AffineDot:
                v = detail::dot_kernel(vv + nd.a, vv + nd.b, nd.n) + vv[nd.aux];
                break;
            default: v = 0; break;
        }
        if (!std::isfinite(v))
            throw NumericError(op_name(nd.op), i, "replay");
        vv[i] = v;
    }
}

} // namespace kinvar::ad
