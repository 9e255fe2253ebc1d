#pragma once

#include <span>
#include <vector>

#include "patchsurf/core.hpp"
#include "patchsurf/surface.hpp"

namespace patchsurf::geometry {

/// EG - F^2 at or below this is treated as a degenerate Jacobian (f64 noise
/// floor for unit-scale surfaces).
inline constexpr double kDegenerateEps = 1e-12;

/// First fundamental form entries, the Gram matrix of the Jacobian.
struct MetricTensor {
    double E = 0.0;
    double F = 0.0;
    double G = 0.0;
    double det() const { return E * G - F * F; }
};

/// Differential properties of one decoded point. When the Jacobian is
/// degenerate (EG - F^2 <= kDegenerateEps), `normal`, `c_mean` and `c_gauss`
/// are not meaningful and `degenerate` is set instead of emitting NaNs.
struct SurfacePoint {
    Vec3 position;
    Vec3 f_u, f_v;  // Jacobian columns
    MetricTensor metric;
    double area_element = 0.0;  // sqrt(EG - F^2)
    bool degenerate = false;
    Vec3 normal;                // unit when !degenerate, zero otherwise
    double c_mean = 0.0;
    double c_gauss = 0.0;
};

/// Assembles normal, metric, curvatures and area element from the three
/// second-order jets of a mapping evaluation.
SurfacePoint surface_point(const std::array<surface::Jet2, 3>& jets);

/// Monte-Carlo patch area: mean area element over the samples (the parameter
/// domain is the unit square, so the mean is the integral estimate).
/// Throws std::invalid_argument on an empty sample list.
double patch_area(const surface::SurfaceMapping& mapping, const surface::Codeword& d,
                  std::span<const surface::UvPoint> samples);

struct NormalSample {
    Vec3 normal;
    bool degenerate = false;
};

/// Unit normals only; consumes just the first-order slots.
std::vector<NormalSample> normals_batch(const surface::SurfaceMapping& mapping,
                                        const surface::Codeword& d,
                                        std::span<const surface::UvPoint> samples);

}  // namespace patchsurf::geometry
