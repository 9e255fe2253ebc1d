#pragma once

#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "patchsurf/data.hpp"
#include "patchsurf/geometry.hpp"
#include "patchsurf/neighbors.hpp"
#include "patchsurf/surface.hpp"

namespace patchsurf::metrics {

/// Evaluation results for one shape. Curvature stats are means of absolute
/// values (patch orientation is uncontrolled); unavailable entries are NaN and
/// printed as n/a.
struct MetricsReport {
    double chd = 0.0;
    double m_ae_deg = std::numeric_limits<double>::quiet_NaN();
    double m_H = std::numeric_limits<double>::quiet_NaN();
    double m_K = std::numeric_limits<double>::quiet_NaN();
    int m_col = 0;
    std::vector<std::pair<double, double>> m_olap;  // (threshold, value)
    std::vector<double> patch_areas;
    int degenerate_excluded = 0;
};

/// Mean arccos |n . n_gt| in degrees between each predicted normal and the
/// normal of its nearest target point. Invariant to per-point normal sign
/// flips. Throws std::invalid_argument when either cloud lacks normals.
double angular_error_degrees(const data::PointCloud& pred, const data::PointCloud& gt);

/// Number of patches whose area is below c_A times the mean patch area.
/// All-zero areas count every patch as collapsed.
int collapse_count(std::span<const double> areas, double c_A = 1e-3);

/// For each target point, the number of patches with at least one predicted
/// point within distance t; averaged over target points.
double overlap_count(std::span<const std::vector<Vec3>> pred_patches,
                     const data::PointCloud& gt, double t);

struct CurvatureStats {
    double m_H = 0.0;
    double m_K = 0.0;
    int excluded = 0;  // degenerate points left out of the means
};

/// Means of |c_mean| and |c_gauss| over the non-degenerate points.
/// Throws std::domain_error when every point is degenerate.
CurvatureStats curvature_stats(std::span<const geometry::SurfacePoint> points);

struct QuadricCurvature {
    double c_mean = 0.0;
    double c_gauss = 0.0;
};

/// Independent curvature estimate: least-squares quadric fit over the
/// neighbors of `query` within `radius`, in a PCA tangent frame. Returns
/// nothing when fewer than 6 neighbors are available. The sign of c_mean
/// follows the estimated (arbitrary) frame orientation.
std::optional<QuadricCurvature> quadric_curvature_oracle(const neighbors::KdIndex& index,
                                                         const Vec3& query, double radius);
std::optional<QuadricCurvature> quadric_curvature_oracle(const data::PointCloud& cloud,
                                                         const Vec3& query, double radius);

/// Per-patch UV-grid maps of the unaveraged conformal-loss integrands.
struct PatchDistortion {
    std::vector<double> d_E, d_G, d_sk, d_str;  // resolution^2, row-major
    std::vector<std::uint8_t> degenerate;
};

struct DistortionMap {
    int resolution = 0;
    std::vector<PatchDistortion> patches;
};

/// Evaluates ((E-muE)/A)^2, ((G-muG)/A)^2, (F/A)^2, ((E-G)/A)^2 on a
/// corners-inclusive UV lattice; means over all patches, per-patch areas from
/// the same grid. Degenerate grid points are flagged and excluded from the
/// means. Throws std::invalid_argument for resolution < 2.
DistortionMap distortion_map(std::span<const surface::SurfaceMapping* const> patches,
                             const surface::Codeword& d, int resolution);

struct EvalConfig {
    int grid_resolution = 64;  // points per patch side
    std::vector<double> olap_thresholds{0.01, 0.05, 0.1};
    double collapse_c_A = 1e-3;
};

/// Full evaluation of a set of patch decoders against a target cloud: decodes
/// a fixed UV grid per patch and assembles every metric above.
MetricsReport evaluate(std::span<const surface::PatchDecoder> decoders,
                       const surface::Codeword& d, const data::PointCloud& gt,
                       const EvalConfig& cfg = {});

/// Human-readable table.
void write_report_table(std::ostream& out, const MetricsReport& report);
/// One header line plus one row per report; tab-separated, NaN as "n/a".
void write_report_tsv(const std::string& path, std::span<const std::string> shape_names,
                      std::span<const MetricsReport> reports);

}  // namespace patchsurf::metrics
