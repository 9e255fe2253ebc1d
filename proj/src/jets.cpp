#include "patchsurf/jets.hpp"

#include <cmath>
#include <stdexcept>

namespace patchsurf::jets {

Jet2 operator+(const Jet2& a, const Jet2& b) {
    return {a.val + b.val, a.du + b.du, a.dv + b.dv,
            a.duu + b.duu, a.duv + b.duv, a.dvv + b.dvv};
}

Jet2 operator-(const Jet2& a, const Jet2& b) {
    return {a.val - b.val, a.du - b.du, a.dv - b.dv,
            a.duu - b.duu, a.duv - b.duv, a.dvv - b.dvv};
}

Jet2 operator-(const Jet2& a) {
    return {-a.val, -a.du, -a.dv, -a.duu, -a.duv, -a.dvv};
}

Jet2 operator*(const Jet2& a, const Jet2& b) {
    Jet2 r;
    r.val = a.val * b.val;
    r.du = a.du * b.val + a.val * b.du;
    r.dv = a.dv * b.val + a.val * b.dv;
    r.duu = a.duu * b.val + 2.0 * a.du * b.du + a.val * b.duu;
    r.duv = a.duv * b.val + a.du * b.dv + a.dv * b.du + a.val * b.duv;
    r.dvv = a.dvv * b.val + 2.0 * a.dv * b.dv + a.val * b.dvv;
    return r;
}

Jet2 operator/(const Jet2& a, const Jet2& b) {
    if (b.val == 0.0) throw std::domain_error("jet division by zero-valued jet");
    // Solve a = c*b slot by slot.
    const double r = 1.0 / b.val;
    Jet2 c;
    c.val = a.val * r;
    c.du = (a.du - c.val * b.du) * r;
    c.dv = (a.dv - c.val * b.dv) * r;
    c.duu = (a.duu - c.val * b.duu - 2.0 * c.du * b.du) * r;
    c.duv = (a.duv - c.val * b.duv - c.du * b.dv - c.dv * b.du) * r;
    c.dvv = (a.dvv - c.val * b.dvv - 2.0 * c.dv * b.dv) * r;
    return c;
}

Jet2 compose(const Jet2& x, double g, double dg, double ddg) {
    Jet2 r;
    r.val = g;
    r.du = dg * x.du;
    r.dv = dg * x.dv;
    r.duu = ddg * x.du * x.du + dg * x.duu;
    r.duv = ddg * x.du * x.dv + dg * x.duv;
    r.dvv = ddg * x.dv * x.dv + dg * x.dvv;
    return r;
}

Jet2 sin(const Jet2& x) {
    const double s = std::sin(x.val), c = std::cos(x.val);
    return compose(x, s, c, -s);
}

Jet2 cos(const Jet2& x) {
    const double s = std::sin(x.val), c = std::cos(x.val);
    return compose(x, c, -s, -c);
}

Jet2 exp(const Jet2& x) {
    const double e = std::exp(x.val);
    return compose(x, e, e, e);
}

Jet2 sqrt(const Jet2& x) {
    if (x.val < 0.0) throw std::domain_error("jet sqrt of negative value");
    const double s = std::sqrt(x.val);
    const double d = 0.5 / s;
    return compose(x, s, d, -0.5 * d / x.val);
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_value(double x) {
    if (x > 30.0) return x;          // ln(1+e^x) = x to f64 precision
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

Jet2 softplus(const Jet2& x) {
    const double s = sigmoid(x.val);
    return compose(x, softplus_value(x.val), s, s * (1.0 - s));
}

// ---------------------------------------------------------------------------
// Tape

void Tape::clear() {
    nodes_.clear();
    val_.clear();
    du_.clear();
    dv_.clear();
    args_.clear();
}

VarId Tape::push(const Node& node, double v, double du, double dv) {
    nodes_.push_back(node);
    val_.push_back(v);
    du_.push_back(du);
    dv_.push_back(dv);
    return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::constant(double c) { return push({Op::kConst}, c, 0, 0); }

VarId Tape::param(std::uint32_t param_index) {
    Node n{Op::kParam};
    n.param = param_index;
    return push(n, params_[param_index], 0, 0);
}

VarId Tape::input(double value, double du_seed, double dv_seed) {
    return push({Op::kInput}, value, du_seed, dv_seed);
}

VarId Tape::add(VarId a, VarId b) {
    Node n{Op::kAdd};
    n.a = a;
    n.b = b;
    return push(n, val_[a] + val_[b], du_[a] + du_[b], dv_[a] + dv_[b]);
}

VarId Tape::sub(VarId a, VarId b) {
    Node n{Op::kSub};
    n.a = a;
    n.b = b;
    return push(n, val_[a] - val_[b], du_[a] - du_[b], dv_[a] - dv_[b]);
}

VarId Tape::mul(VarId a, VarId b) {
    Node n{Op::kMul};
    n.a = a;
    n.b = b;
    return push(n, val_[a] * val_[b],
                du_[a] * val_[b] + val_[a] * du_[b],
                dv_[a] * val_[b] + val_[a] * dv_[b]);
}

VarId Tape::neg(VarId a) {
    Node n{Op::kNeg};
    n.a = a;
    return push(n, -val_[a], -du_[a], -dv_[a]);
}

VarId Tape::scale(VarId a, double c) {
    Node n{Op::kScale};
    n.a = a;
    n.c = c;
    return push(n, c * val_[a], c * du_[a], c * dv_[a]);
}

VarId Tape::add_const(VarId a, double c) {
    Node n{Op::kAddConst};
    n.a = a;
    n.c = c;
    return push(n, val_[a] + c, du_[a], dv_[a]);
}

// Unary op with local derivative g' evaluated at the operand; forward jet
// propagation needs only g', the backward pass recomputes what it needs.
VarId Tape::push_unary(Op op, VarId a, double g, double dg) {
    Node n{op};
    n.a = a;
    return push(n, g, dg * du_[a], dg * dv_[a]);
}

VarId Tape::square(VarId a) {
    const double x = val_[a];
    return push_unary(Op::kSquare, a, x * x, 2.0 * x);
}

VarId Tape::sqrt_clamped(VarId a) {
    const double x = val_[a];
    if (x > 0.0) {
        const double s = std::sqrt(x);
        return push_unary(Op::kSqrtClamped, a, s, 0.5 / s);
    }
    return push_unary(Op::kSqrtClamped, a, 0.0, 0.0);
}

VarId Tape::recip(VarId a) {
    const double x = val_[a];
    if (x == 0.0) throw std::domain_error("traced reciprocal of zero");
    const double r = 1.0 / x;
    return push_unary(Op::kRecip, a, r, -r * r);
}

VarId Tape::softplus(VarId a) {
    const double x = val_[a];
    return push_unary(Op::kSoftplus, a, softplus_value(x), sigmoid(x));
}

VarId Tape::hinge(VarId a) {
    const double x = val_[a];
    if (x > 0.0) return push_unary(Op::kHinge, a, x, 1.0);
    return push_unary(Op::kHinge, a, 0.0, 0.0);
}

VarId Tape::pick_du(VarId a) {
    Node n{Op::kPickDu};
    n.a = a;
    return push(n, du_[a], 0, 0);
}

VarId Tape::pick_dv(VarId a) {
    Node n{Op::kPickDv};
    n.a = a;
    return push(n, dv_[a], 0, 0);
}

VarId Tape::affine(std::span<const VarId> xs, std::uint32_t weight_offset) {
    Node n{Op::kAffine};
    n.off = static_cast<std::uint32_t>(args_.size());
    n.n = static_cast<std::uint32_t>(xs.size());
    n.param = weight_offset;
    args_.insert(args_.end(), xs.begin(), xs.end());
    double v = params_[weight_offset + xs.size()];  // bias
    double du = 0, dv = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = params_[weight_offset + i];
        v += w * val_[xs[i]];
        du += w * du_[xs[i]];
        dv += w * dv_[xs[i]];
    }
    return push(n, v, du, dv);
}

VarId Tape::affine_range(VarId first, std::uint32_t count, std::uint32_t weight_offset) {
    Node n{Op::kAffineRange};
    n.a = first;
    n.n = count;
    n.param = weight_offset;
    double v = params_[weight_offset + count];  // bias
    double du = 0, dv = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        const double w = params_[weight_offset + i];
        v += w * val_[first + i];
        du += w * du_[first + i];
        dv += w * dv_[first + i];
    }
    return push(n, v, du, dv);
}

VarId Tape::sum(std::span<const VarId> xs) {
    Node n{Op::kSum};
    n.off = static_cast<std::uint32_t>(args_.size());
    n.n = static_cast<std::uint32_t>(xs.size());
    args_.insert(args_.end(), xs.begin(), xs.end());
    double v = 0, du = 0, dv = 0;
    for (const VarId x : xs) {
        v += val_[x];
        du += du_[x];
        dv += dv_[x];
    }
    return push(n, v, du, dv);
}

void Tape::backward(VarId loss, std::vector<double>& grad) {
    if (loss >= nodes_.size()) throw std::invalid_argument("loss node is not on the tape");
    const std::size_t n = nodes_.size();
    av_.assign(n, 0.0);
    au_.assign(n, 0.0);
    adv_.assign(n, 0.0);
    grad.assign(params_.size(), 0.0);
    av_[loss] = 1.0;  // the loss is a scalar; its own du/dv slots carry nothing

    // Adjoint of c = g(x) under jet forwarding c = (g, g'*x.du, g'*x.dv):
    // the value adjoint picks up second-order cross terms through g''.
    const auto propagate_unary = [this](VarId a, double gv, double gu, double gdv,
                                        double dg, double ddg) {
        av_[a] += gv * dg + (gu * du_[a] + gdv * dv_[a]) * ddg;
        au_[a] += gu * dg;
        adv_[a] += gdv * dg;
    };

    for (std::size_t i = n; i-- > 0;) {
        const Node& nd = nodes_[i];
        const double gv = av_[i], gu = au_[i], gdv = adv_[i];
        if (gv == 0.0 && gu == 0.0 && gdv == 0.0) continue;
        switch (nd.op) {
        case Op::kConst:
        case Op::kInput:
            break;
        case Op::kParam:
            // Parameters have zero du/dv, so only the value adjoint lands.
            grad[nd.param] += gv;
            break;
        case Op::kAdd:
            av_[nd.a] += gv; au_[nd.a] += gu; adv_[nd.a] += gdv;
            av_[nd.b] += gv; au_[nd.b] += gu; adv_[nd.b] += gdv;
            break;
        case Op::kSub:
            av_[nd.a] += gv; au_[nd.a] += gu; adv_[nd.a] += gdv;
            av_[nd.b] -= gv; au_[nd.b] -= gu; adv_[nd.b] -= gdv;
            break;
        case Op::kMul: {
            const VarId a = nd.a, b = nd.b;
            av_[a] += gv * val_[b] + gu * du_[b] + gdv * dv_[b];
            au_[a] += gu * val_[b];
            adv_[a] += gdv * val_[b];
            av_[b] += gv * val_[a] + gu * du_[a] + gdv * dv_[a];
            au_[b] += gu * val_[a];
            adv_[b] += gdv * val_[a];
            break;
        }
        case Op::kNeg:
            av_[nd.a] -= gv; au_[nd.a] -= gu; adv_[nd.a] -= gdv;
            break;
        case Op::kScale:
            av_[nd.a] += nd.c * gv; au_[nd.a] += nd.c * gu; adv_[nd.a] += nd.c * gdv;
            break;
        case Op::kAddConst:
            av_[nd.a] += gv; au_[nd.a] += gu; adv_[nd.a] += gdv;
            break;
        case Op::kSquare: {
            const double x = val_[nd.a];
            propagate_unary(nd.a, gv, gu, gdv, 2.0 * x, 2.0);
            break;
        }
        case Op::kSqrtClamped: {
            const double x = val_[nd.a];
            if (x > 0.0) {
                const double s = std::sqrt(x);
                const double d = 0.5 / s;
                propagate_unary(nd.a, gv, gu, gdv, d, -0.5 * d / x);
            }
            break;
        }
        case Op::kRecip: {
            const double r = 1.0 / val_[nd.a];
            propagate_unary(nd.a, gv, gu, gdv, -r * r, 2.0 * r * r * r);
            break;
        }
        case Op::kSoftplus: {
            const double s = sigmoid(val_[nd.a]);
            propagate_unary(nd.a, gv, gu, gdv, s, s * (1.0 - s));
            break;
        }
        case Op::kHinge:
            if (val_[nd.a] > 0.0) {
                av_[nd.a] += gv; au_[nd.a] += gu; adv_[nd.a] += gdv;
            }
            break;
        case Op::kPickDu:
            au_[nd.a] += gv;
            break;
        case Op::kPickDv:
            adv_[nd.a] += gv;
            break;
        case Op::kAffine: {
            const VarId* xs = args_.data() + nd.off;
            for (std::uint32_t j = 0; j < nd.n; ++j) {
                const VarId x = xs[j];
                const double w = params_[nd.param + j];
                av_[x] += w * gv;
                au_[x] += w * gu;
                adv_[x] += w * gdv;
                grad[nd.param + j] += gv * val_[x] + gu * du_[x] + gdv * dv_[x];
            }
            grad[nd.param + nd.n] += gv;  // bias
            break;
        }
        case Op::kAffineRange: {
            for (std::uint32_t j = 0; j < nd.n; ++j) {
                const VarId x = nd.a + j;
                const double w = params_[nd.param + j];
                av_[x] += w * gv;
                au_[x] += w * gu;
                adv_[x] += w * gdv;
                grad[nd.param + j] += gv * val_[x] + gu * du_[x] + gdv * dv_[x];
            }
            grad[nd.param + nd.n] += gv;
            break;
        }
        case Op::kSum: {
            const VarId* xs = args_.data() + nd.off;
            for (std::uint32_t j = 0; j < nd.n; ++j) {
                av_[xs[j]] += gv;
                au_[xs[j]] += gu;
                adv_[xs[j]] += gdv;
            }
            break;
        }
        }
    }
}

}  // namespace patchsurf::jets
