#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "patchsurf/jets.hpp"

namespace patchsurf::surface {

using jets::Jet2;

/// Parameter-domain point. Decoders are trained on the unit square [0,1]^2;
/// analytic mappings accept any (u, v).
struct UvPoint {
    double u = 0.0;
    double v = 0.0;
};

/// Low-dimensional latent vector shared by all patch decoders of one shape.
struct Codeword {
    std::vector<double> values;
};

struct MlpShape {
    int latent_dim = 64;   // D
    int hidden_layers = 3; // H
    int width = 128;       // W

    int input_dim() const { return latent_dim + 2; }
    int layer_count() const { return hidden_layers + 1; }
    int layer_inputs(int layer) const {
        return layer == 0 ? input_dim() : width;
    }
    int layer_outputs(int layer) const {
        return layer == hidden_layers ? 3 : width;
    }
    // Weights are stored layer-major; within a layer, per output neuron:
    // n_in weights followed by the bias.
    std::size_t layer_offset(int layer) const;
    std::size_t weight_count() const { return layer_offset(layer_count()); }
};

/// Per-patch MLP: input (codeword, u, v), Softplus hidden layers, linear
/// 3-unit output. Softplus keeps the mapping C^2 everywhere, which the
/// curvature formulas require.
struct PatchDecoder {
    MlpShape shape;
    int patch_index = 0;
    std::vector<double> weights;
};

/// Fan-in-scaled uniform init (bound sqrt(6/fan_in), biases zero),
/// deterministic per seed.
PatchDecoder init_decoder(std::uint64_t seed, int latent_dim, int hidden_layers, int width);

/// Evaluates the decoder at (d, r) with u/v-seeded jets: value slots give the
/// 3D point, derivative slots the exact Jacobian and Hessians of the network
/// output. Throws std::invalid_argument on codeword size mismatch.
std::array<Jet2, 3> decode(const PatchDecoder& dec, const Codeword& d, UvPoint r);

/// Anything evaluable at (codeword, uv) with exact derivative slots.
class SurfaceMapping {
public:
    virtual ~SurfaceMapping() = default;
    virtual std::array<Jet2, 3> evaluate(const Codeword& d, UvPoint r) const = 0;
};

class DecoderMapping final : public SurfaceMapping {
public:
    explicit DecoderMapping(const PatchDecoder& dec) : dec_(&dec) {}
    std::array<Jet2, 3> evaluate(const Codeword& d, UvPoint r) const override {
        return decode(*dec_, d, r);
    }

private:
    const PatchDecoder* dec_;
};

/// Closed-form mapping; ignores the codeword.
class AnalyticSurface final : public SurfaceMapping {
public:
    using Fn = std::function<std::array<Jet2, 3>(Jet2 u, Jet2 v)>;
    explicit AnalyticSurface(Fn fn) : fn_(std::move(fn)) {}
    std::array<Jet2, 3> evaluate(const Codeword&, UvPoint r) const override {
        return fn_(Jet2::seed_u(r.u), Jet2::seed_v(r.v));
    }

private:
    Fn fn_;
};

AnalyticSurface analytic_plane();                    // (u, v, 0)
AnalyticSurface analytic_sphere(double radius);      // R(cos u cos v, sin u cos v, sin v)
AnalyticSurface analytic_saddle();                   // (u, v, u^2 - v^2)
AnalyticSurface analytic_cylinder(double radius);    // (r cos u, r sin u, v)
AnalyticSurface analytic_wavy_cloth(double amplitude, double frequency);

/// ceil(sqrt(n))^2 corners-inclusive lattice on [0,1]^2 (row-major, v fastest).
/// Throws std::invalid_argument if n == 0.
std::vector<UvPoint> sample_uv_grid(int n);
/// n independent uniform draws on [0,1]^2, seed-deterministic.
std::vector<UvPoint> sample_uv_random(int n, std::uint64_t seed);

/// Traced first-order forward pass of one patch MLP for training.
struct TracedPoint {
    jets::VarId x, y, z;
};

/// `weight_offset` is the patch's first weight in the tape's flat parameter
/// vector; `latent_vars` are the already-traced codeword entries.
TracedPoint decode_traced(jets::Tape& tape, const MlpShape& shape,
                          std::uint32_t weight_offset,
                          std::span<const jets::VarId> latent_vars, UvPoint r);

}  // namespace patchsurf::surface
