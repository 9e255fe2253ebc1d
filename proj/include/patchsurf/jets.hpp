#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace patchsurf::jets {

/// Scalar carrying its first and second partial derivatives with respect to
/// the two surface parameters (u, v). Arithmetic follows exact second-order
/// Taylor propagation, so a value computed from seeded jets carries the exact
/// derivatives of the composition. The mixed partial is stored once (duv).
struct Jet2 {
    double val = 0.0;
    double du = 0.0;
    double dv = 0.0;
    double duu = 0.0;
    double duv = 0.0;
    double dvv = 0.0;

    static Jet2 constant(double c) { return {c, 0, 0, 0, 0, 0}; }
    static Jet2 seed_u(double u) { return {u, 1, 0, 0, 0, 0}; }
    static Jet2 seed_v(double v) { return {v, 0, 1, 0, 0, 0}; }
};

Jet2 operator+(const Jet2& a, const Jet2& b);
Jet2 operator-(const Jet2& a, const Jet2& b);
Jet2 operator*(const Jet2& a, const Jet2& b);
Jet2 operator/(const Jet2& a, const Jet2& b);  // throws std::domain_error if b.val == 0
Jet2 operator-(const Jet2& a);

inline Jet2 operator+(const Jet2& a, double c) { Jet2 r = a; r.val += c; return r; }
inline Jet2 operator+(double c, const Jet2& a) { return a + c; }
inline Jet2 operator-(const Jet2& a, double c) { return a + (-c); }
inline Jet2 operator-(double c, const Jet2& a) { return (-a) + c; }
inline Jet2 operator*(const Jet2& a, double c) {
    return {a.val * c, a.du * c, a.dv * c, a.duu * c, a.duv * c, a.dvv * c};
}
inline Jet2 operator*(double c, const Jet2& a) { return a * c; }
inline Jet2 operator/(const Jet2& a, double c) { return a * (1.0 / c); }

// Unary composition g(x) given g(x.val), g'(x.val), g''(x.val).
Jet2 compose(const Jet2& x, double g, double dg, double ddg);

Jet2 sin(const Jet2& x);
Jet2 cos(const Jet2& x);
Jet2 exp(const Jet2& x);
Jet2 sqrt(const Jet2& x);     // throws std::domain_error if x.val < 0
Jet2 softplus(const Jet2& x); // ln(1+e^x), stable for large |x|

// Stable scalar helpers shared with the tape ops.
double softplus_value(double x);
double sigmoid(double x);

using VarId = std::uint32_t;

/// Append-only record of primitive operations on weight-dependent scalars.
///
/// Every traced variable carries a first-order jet (val, du, dv); second-order
/// slots are never traced because no training objective uses curvature.
/// Replaying the record backward yields d(loss)/d(param) for every parameter
/// index referenced by the trace, where the loss may depend on any slot of any
/// traced variable. A tape is single-owner and rebuilt from scratch each
/// optimization step.
class Tape {
public:
    /// `params` is the flat parameter vector the trace reads weights from; it
    /// must stay alive and unchanged until backward() is done.
    explicit Tape(std::span<const double> params) : params_(params) {}

    std::size_t size() const { return nodes_.size(); }
    std::size_t param_count() const { return params_.size(); }
    void clear();

    double val(VarId id) const { return val_[id]; }
    double du(VarId id) const { return du_[id]; }
    double dv(VarId id) const { return dv_[id]; }

    VarId constant(double c);
    VarId param(std::uint32_t param_index);
    VarId input(double value, double du_seed, double dv_seed);

    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);
    VarId neg(VarId a);
    VarId scale(VarId a, double c);
    VarId add_const(VarId a, double c);
    VarId square(VarId a);
    /// sqrt with value clamped at 0 and zero subgradient for non-positive input.
    VarId sqrt_clamped(VarId a);
    VarId recip(VarId a);  // throws std::domain_error if the value is 0
    VarId softplus(VarId a);
    VarId hinge(VarId a);  // max(0, x), subgradient 0 at x <= 0
    /// val slot of the result is the du (resp. dv) slot of the operand.
    VarId pick_du(VarId a);
    VarId pick_dv(VarId a);

    /// params[weight_offset + i] * x_i summed over i, plus bias at
    /// params[weight_offset + n]. Operands are given explicitly...
    VarId affine(std::span<const VarId> xs, std::uint32_t weight_offset);
    /// ...or as the contiguous id range [first, first + n), which is how MLP
    /// hidden layers trace without an operand arena entry per neuron.
    VarId affine_range(VarId first, std::uint32_t n, std::uint32_t weight_offset);

    VarId sum(std::span<const VarId> xs);

    /// Reverse pass from a scalar loss node: derivative slots of the loss
    /// itself are not propagated. `grad` is resized to param_count() and
    /// overwritten. Deterministic for a fixed tape.
    /// Throws std::invalid_argument if `loss` is not on the tape.
    void backward(VarId loss, std::vector<double>& grad);

private:
    enum class Op : std::uint8_t {
        kConst, kParam, kInput,
        kAdd, kSub, kMul, kNeg, kScale, kAddConst,
        kSquare, kSqrtClamped, kRecip, kSoftplus, kHinge,
        kPickDu, kPickDv,
        kAffine, kAffineRange, kSum,
    };
    struct Node {
        Op op{};
        VarId a = 0;
        VarId b = 0;
        std::uint32_t off = 0;   // operand arena offset (kAffine, kSum)
        std::uint32_t n = 0;     // operand count
        std::uint32_t param = 0; // parameter index (kParam) or weight offset (affine)
        double c = 0.0;          // immediate operand (kScale, kAddConst)
    };

    VarId push(const Node& node, double v, double du, double dv);
    VarId push_unary(Op op, VarId a, double g, double dg);

    std::span<const double> params_;
    std::vector<Node> nodes_;
    std::vector<double> val_, du_, dv_;
    std::vector<VarId> args_;
    // backward scratch, reused across steps
    std::vector<double> av_, au_, adv_;
};

}  // namespace patchsurf::jets
