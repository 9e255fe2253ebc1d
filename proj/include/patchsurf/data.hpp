#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "patchsurf/core.hpp"

namespace patchsurf::data {

/// Thrown by the file readers; the message carries the path and line number.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Aabb {
    Vec3 lo, hi;
};

/// Ordered 3D point list with optional unit normals and optional patch-id
/// labels. Optional lists are either empty or the same length as `points`.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<int> patch_ids;

    std::size_t size() const { return points.size(); }
    bool has_normals() const { return !normals.empty(); }
    bool has_patch_ids() const { return !patch_ids.empty(); }

    /// Lengths consistent, normals unit within 1e-9. Throws std::invalid_argument.
    void validate() const;

    const Aabb& bounding_box() const;

private:
    mutable std::optional<Aabb> bbox_;
};

enum class SurfaceKind { kPlane, kSphereCap, kCylinder, kWavyCloth };

SurfaceKind surface_kind_from_string(const std::string& name);
std::string to_string(SurfaceKind kind);

/// Desk-scale synthetic targets. Fixed geometry:
///   plane       (u, v, 0) over [0,1]^2, area 1
///   sphere-cap  unit-sphere band, azimuth [0, pi], elevation [0, pi/3]
///   cylinder    radius 0.5 half shell, height 1
///   wavy-cloth  (u, v, a sin(2 pi f u) sin(2 pi f v)) over [0,1]^2
struct SyntheticSurfaceSpec {
    SurfaceKind kind = SurfaceKind::kWavyCloth;
    int count = 1000;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    double amplitude = 0.1;  // wavy-cloth only
    double frequency = 1.0;  // wavy-cloth only
};

struct Dataset {
    PointCloud cloud;                 // positions + exact normals of the clean surface
    std::vector<double> gt_c_mean;    // per-point curvatures of the clean surface
    std::vector<double> gt_c_gauss;
    double gt_area = 0.0;
};

/// Sampling is area-uniform on the clean surface; normals and curvatures are
/// evaluated analytically before noise is added to the positions. The area is
/// closed-form where one exists and 512^2 midpoint quadrature for the cloth.
Dataset generate(const SyntheticSurfaceSpec& spec);

/// Sum of triangle areas. Throws std::invalid_argument on an out-of-range index.
double triangulated_area(std::span<const Vec3> vertices,
                         std::span<const std::array<int, 3>> triangles);

// --- file I/O --------------------------------------------------------------
// Text formats are locale-independent; doubles are written with shortest
// round-trip precision so save/load reproduces values bit for bit.

struct ObjLoadResult {
    PointCloud cloud;
    int skipped_directives = 0;  // f, vt, ... counted, not parsed
};

ObjLoadResult load_obj(const std::string& path);
void save_obj(const std::string& path, const PointCloud& cloud);

/// Extra per-vertex double properties for the writer (name -> values).
using PlyExtras = std::map<std::string, std::vector<double>>;

PointCloud load_ply(const std::string& path);
void save_ply(const std::string& path, const PointCloud& cloud, const PlyExtras& extras = {});

/// Single-value text sidecar holding the ground-truth surface area.
void save_area_sidecar(const std::string& path, double area);
double load_area_sidecar(const std::string& path);

}  // namespace patchsurf::data
