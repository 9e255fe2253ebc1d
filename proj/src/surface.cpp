#include "patchsurf/surface.hpp"

#include <cmath>
#include <stdexcept>

#include "patchsurf/core.hpp"

namespace patchsurf::surface {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::size_t MlpShape::layer_offset(int layer) const {
    std::size_t off = 0;
    for (int l = 0; l < layer; ++l) {
        off += static_cast<std::size_t>(layer_inputs(l) + 1) * layer_outputs(l);
    }
    return off;
}

PatchDecoder init_decoder(std::uint64_t seed, int latent_dim, int hidden_layers, int width) {
    if (latent_dim < 0 || hidden_layers < 1 || width < 1) {
        throw std::invalid_argument("init_decoder: need latent_dim >= 0, hidden_layers >= 1, width >= 1");
    }
    PatchDecoder dec;
    dec.shape = MlpShape{latent_dim, hidden_layers, width};
    dec.weights.assign(dec.shape.weight_count(), 0.0);
    Rng rng(seed);
    std::size_t off = 0;
    for (int l = 0; l < dec.shape.layer_count(); ++l) {
        const int n_in = dec.shape.layer_inputs(l);
        const int n_out = dec.shape.layer_outputs(l);
        const double bound = std::sqrt(6.0 / n_in);
        for (int o = 0; o < n_out; ++o) {
            for (int i = 0; i < n_in; ++i) {
                dec.weights[off++] = rng.uniform(-bound, bound);
            }
            dec.weights[off++] = 0.0;  // bias
        }
    }
    return dec;
}

std::array<Jet2, 3> decode(const PatchDecoder& dec, const Codeword& d, UvPoint r) {
    const MlpShape& shape = dec.shape;
    if (static_cast<int>(d.values.size()) != shape.latent_dim) {
        throw std::invalid_argument("decode: codeword size does not match decoder latent dimension");
    }
    std::vector<Jet2> cur;
    cur.reserve(shape.input_dim());
    for (const double v : d.values) cur.push_back(Jet2::constant(v));
    cur.push_back(Jet2::seed_u(r.u));
    cur.push_back(Jet2::seed_v(r.v));

    std::vector<Jet2> next;
    const double* w = dec.weights.data();
    for (int l = 0; l < shape.layer_count(); ++l) {
        const int n_in = shape.layer_inputs(l);
        const int n_out = shape.layer_outputs(l);
        const bool last = l == shape.hidden_layers;
        next.assign(n_out, Jet2{});
        for (int o = 0; o < n_out; ++o) {
            Jet2 acc = Jet2::constant(w[n_in]);  // bias
            for (int i = 0; i < n_in; ++i) acc = acc + w[i] * cur[i];
            next[o] = last ? acc : softplus(acc);
            w += n_in + 1;
        }
        cur.swap(next);
    }
    return {cur[0], cur[1], cur[2]};
}

AnalyticSurface analytic_plane() {
    return AnalyticSurface([](Jet2 u, Jet2 v) -> std::array<Jet2, 3> {
        return {u, v, Jet2::constant(0.0)};
    });
}

AnalyticSurface analytic_sphere(double radius) {
    if (radius <= 0.0) throw std::invalid_argument("analytic_sphere: radius must be positive");
    return AnalyticSurface([radius](Jet2 u, Jet2 v) -> std::array<Jet2, 3> {
        const Jet2 cv = cos(v);
        return {radius * (cos(u) * cv), radius * (sin(u) * cv), radius * sin(v)};
    });
}

AnalyticSurface analytic_saddle() {
    return AnalyticSurface([](Jet2 u, Jet2 v) -> std::array<Jet2, 3> {
        return {u, v, u * u - v * v};
    });
}

AnalyticSurface analytic_cylinder(double radius) {
    if (radius <= 0.0) throw std::invalid_argument("analytic_cylinder: radius must be positive");
    return AnalyticSurface([radius](Jet2 u, Jet2 v) -> std::array<Jet2, 3> {
        return {radius * cos(u), radius * sin(u), v};
    });
}

AnalyticSurface analytic_wavy_cloth(double amplitude, double frequency) {
    return AnalyticSurface([amplitude, frequency](Jet2 u, Jet2 v) -> std::array<Jet2, 3> {
        const Jet2 z = amplitude * (sin(kTwoPi * frequency * u) * sin(kTwoPi * frequency * v));
        return {u, v, z};
    });
}

std::vector<UvPoint> sample_uv_grid(int n) {
    if (n < 1) throw std::invalid_argument("sample_uv_grid: need n >= 1");
    const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    std::vector<UvPoint> pts;
    pts.reserve(static_cast<std::size_t>(side) * side);
    if (side == 1) {
        pts.push_back({0.5, 0.5});
        return pts;
    }
    const double step = 1.0 / (side - 1);
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            pts.push_back({i * step, j * step});
        }
    }
    return pts;
}

std::vector<UvPoint> sample_uv_random(int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_uv_random: need n >= 1");
    Rng rng(seed);
    std::vector<UvPoint> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        const double v = rng.uniform();
        pts.push_back({u, v});
    }
    return pts;
}

TracedPoint decode_traced(jets::Tape& tape, const MlpShape& shape,
                          std::uint32_t weight_offset,
                          std::span<const jets::VarId> latent_vars, UvPoint r) {
    if (static_cast<int>(latent_vars.size()) != shape.latent_dim) {
        throw std::invalid_argument("decode_traced: codeword size does not match decoder latent dimension");
    }
    // Input layer operands: codeword vars then the two seeded inputs.
    std::vector<jets::VarId> in;
    in.reserve(shape.input_dim());
    in.insert(in.end(), latent_vars.begin(), latent_vars.end());
    in.push_back(tape.input(r.u, 1.0, 0.0));
    in.push_back(tape.input(r.v, 0.0, 1.0));

    // Per layer, all affine nodes are pushed before all activations so each
    // group occupies a consecutive id range usable by affine_range.
    std::uint32_t w = weight_offset;
    jets::VarId cur_first = 0;
    for (int l = 0; l < shape.layer_count(); ++l) {
        const int n_in = shape.layer_inputs(l);
        const int n_out = shape.layer_outputs(l);
        const bool last = l == shape.hidden_layers;
        jets::VarId z_first = 0;
        for (int o = 0; o < n_out; ++o) {
            const jets::VarId z = l == 0 ? tape.affine(in, w)
                                         : tape.affine_range(cur_first, n_in, w);
            if (o == 0) z_first = z;
            w += n_in + 1;
        }
        if (last) return {z_first, z_first + 1, z_first + 2};
        jets::VarId s_first = 0;
        for (int o = 0; o < n_out; ++o) {
            const jets::VarId s = tape.softplus(z_first + o);
            if (o == 0) s_first = s;
        }
        cur_first = s_first;
    }
    throw std::logic_error("decode_traced: unreachable");
}

}  // namespace patchsurf::surface
