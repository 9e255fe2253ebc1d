#include "patchsurf/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace patchsurf::geometry {

using surface::Jet2;

SurfacePoint surface_point(const std::array<Jet2, 3>& jets) {
    SurfacePoint p;
    p.position = {jets[0].val, jets[1].val, jets[2].val};
    p.f_u = {jets[0].du, jets[1].du, jets[2].du};
    p.f_v = {jets[0].dv, jets[1].dv, jets[2].dv};
    p.metric.E = dot(p.f_u, p.f_u);
    p.metric.F = dot(p.f_u, p.f_v);
    p.metric.G = dot(p.f_v, p.f_v);
    const double det = p.metric.det();
    p.area_element = det > 0.0 ? std::sqrt(det) : 0.0;
    if (det <= kDegenerateEps) {
        p.degenerate = true;
        return p;
    }
    const Vec3 c = cross(p.f_u, p.f_v);
    p.normal = c / norm(c);

    const Vec3 f_uu = {jets[0].duu, jets[1].duu, jets[2].duu};
    const Vec3 f_uv = {jets[0].duv, jets[1].duv, jets[2].duv};
    const Vec3 f_vv = {jets[0].dvv, jets[1].dvv, jets[2].dvv};
    const double L = dot(f_uu, p.normal);
    const double M = dot(f_uv, p.normal);
    const double N = dot(f_vv, p.normal);
    p.c_mean = -(L * p.metric.G - 2.0 * M * p.metric.F + N * p.metric.E) / (2.0 * det);
    p.c_gauss = (L * N - M * M) / det;
    return p;
}

double patch_area(const surface::SurfaceMapping& mapping, const surface::Codeword& d,
                  std::span<const surface::UvPoint> samples) {
    if (samples.empty()) throw std::invalid_argument("patch_area: empty sample list");
    double sum = 0.0;
    for (const auto& r : samples) {
        const auto jets = mapping.evaluate(d, r);
        const Vec3 f_u = {jets[0].du, jets[1].du, jets[2].du};
        const Vec3 f_v = {jets[0].dv, jets[1].dv, jets[2].dv};
        const double det = dot(f_u, f_u) * dot(f_v, f_v) - dot(f_u, f_v) * dot(f_u, f_v);
        sum += det > 0.0 ? std::sqrt(det) : 0.0;
    }
    return sum / static_cast<double>(samples.size());
}

std::vector<NormalSample> normals_batch(const surface::SurfaceMapping& mapping,
                                        const surface::Codeword& d,
                                        std::span<const surface::UvPoint> samples) {
    std::vector<NormalSample> out;
    out.reserve(samples.size());
    for (const auto& r : samples) {
        const auto jets = mapping.evaluate(d, r);
        const Vec3 f_u = {jets[0].du, jets[1].du, jets[2].du};
        const Vec3 f_v = {jets[0].dv, jets[1].dv, jets[2].dv};
        const Vec3 c = cross(f_u, f_v);
        const double det = dot(f_u, f_u) * dot(f_v, f_v) - dot(f_u, f_v) * dot(f_u, f_v);
        NormalSample s;
        if (det <= kDegenerateEps) {
            s.degenerate = true;
        } else {
            s.normal = c / norm(c);
        }
        out.push_back(s);
    }
    return out;
}

}  // namespace patchsurf::geometry
