#pragma once

#include <span>
#include <vector>

#include "patchsurf/data.hpp"
#include "patchsurf/geometry.hpp"
#include "patchsurf/jets.hpp"
#include "patchsurf/neighbors.hpp"
#include "patchsurf/surface.hpp"

namespace patchsurf::losses {

/// alpha_def and alpha_ol weight the deformation and overlap terms of the
/// total objective; alpha_E/G/sk/str weight the four metric-tensor terms
/// inside the deformation loss.
struct LossWeights {
    double alpha_def = 0.0;
    double alpha_ol = 0.0;
    double alpha_E = 1.0;
    double alpha_G = 1.0;
    double alpha_sk = 1.0;
    double alpha_str = 1.0;

    bool deformation_active() const { return alpha_def > 0.0; }
    bool overlap_active() const { return alpha_ol > 0.0; }
    void validate() const;  // all weights >= 0
};

/// A patch area at or below the degeneracy threshold: the collapse happened
/// before the regularizer could act on it.
class DegeneratePatchError : public std::domain_error {
public:
    explicit DegeneratePatchError(int patch_index)
        : std::domain_error("degenerate area of patch " + std::to_string(patch_index) +
                            " (collapsed patch)"),
          patch_index_(patch_index) {}
    int patch_index() const { return patch_index_; }

private:
    int patch_index_;
};

struct LossReport {
    double chd = 0.0;
    double l_E = 0.0;
    double l_G = 0.0;
    double l_sk = 0.0;
    double l_str = 0.0;
    double l_def = 0.0;
    double l_ol = 0.0;
    double total = 0.0;
};

/// Bidirectional Chamfer distance between per-patch predicted point lists and
/// a target cloud: mean over predictions of the nearest-target squared
/// distance plus mean over targets of the nearest-prediction squared distance.
/// All patches must contribute the same number of points.
double chamfer(std::span<const std::vector<Vec3>> pred_patches, const data::PointCloud& gt);
double chamfer(std::span<const std::vector<Vec3>> pred_patches,
               const neighbors::KdIndex& gt_index);

struct ConformalTerms {
    double l_E = 0.0;
    double l_G = 0.0;
    double l_sk = 0.0;
    double l_str = 0.0;
};

/// Per-point squared deviations of the metric tensor from a fixed-scale
/// conformal one, normalized by the patch area so the terms are invariant to
/// the current patch scale:
///   l_E   mean of ((E - mean E) / A)^2   uneven stretch along u
///   l_G   mean of ((G - mean G) / A)^2   uneven stretch along v
///   l_sk  mean of (F / A)^2              skew
///   l_str mean of ((E - G) / A)^2        anisotropic stretch
/// E/G means are taken over all patches and points. Throws std::domain_error
/// if any patch area is degenerate (<= geometry::kDegenerateEps), which
/// signals a collapse the regularizer can no longer fix.
ConformalTerms conformal_terms(std::span<const std::vector<geometry::MetricTensor>> per_patch_metrics,
                               std::span<const double> patch_areas);

/// Squared hinge on total patch area exceeding the target surface area:
/// max(0, sum A_k - gt_area)^2.
double overlap_loss(std::span<const double> patch_areas, double gt_area);

LossReport total_loss(double chd, const ConformalTerms& terms, double l_ol, const LossWeights& w);

/// One traced point per patch sample plus the UV sample it came from.
struct TracedSample {
    surface::TracedPoint point;
    surface::UvPoint uv;
};

struct TracedLoss {
    jets::VarId total = 0;
    LossReport report;
    std::vector<double> patch_areas;  // empty unless areas were needed
};

/// Builds the full training objective on the tape from traced per-patch
/// forward passes. Nearest-neighbor assignments are made on the current
/// values and treated as constants of the step, as are the area normalizers
/// of the conformal terms (unless grad_through_area_norm). The target area
/// only matters when the overlap term is active.
TracedLoss assemble_traced(jets::Tape& tape,
                           std::span<const std::vector<surface::TracedPoint>> per_patch_points,
                           const neighbors::KdIndex& gt_index, const LossWeights& w,
                           double gt_area, bool grad_through_area_norm = false);

}  // namespace patchsurf::losses
