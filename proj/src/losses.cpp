#include "patchsurf/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace patchsurf::losses {

using jets::Tape;
using jets::VarId;

void LossWeights::validate() const {
    if (alpha_def < 0 || alpha_ol < 0 || alpha_E < 0 || alpha_G < 0 || alpha_sk < 0 || alpha_str < 0) {
        throw std::invalid_argument("loss weights must be non-negative");
    }
}

namespace {

std::size_t checked_patch_size(std::span<const std::vector<Vec3>> pred_patches) {
    if (pred_patches.empty()) throw std::invalid_argument("chamfer: no patches");
    const std::size_t m = pred_patches[0].size();
    if (m == 0) throw std::invalid_argument("chamfer: empty patch");
    for (const auto& p : pred_patches) {
        if (p.size() != m) throw std::invalid_argument("chamfer: patches must contribute equal point counts");
    }
    return m;
}

}  // namespace

double chamfer(std::span<const std::vector<Vec3>> pred_patches,
               const neighbors::KdIndex& gt_index) {
    const std::size_t m = checked_patch_size(pred_patches);
    const std::size_t k = pred_patches.size();

    double sum_pred = 0.0;
    std::vector<Vec3> flat;
    flat.reserve(k * m);
    for (const auto& patch : pred_patches) {
        for (const auto& p : patch) {
            sum_pred += gt_index.nearest(p).squared_distance;
            flat.push_back(p);
        }
    }

    const neighbors::KdIndex pred_index(std::move(flat));
    double sum_gt = 0.0;
    for (const auto& q : gt_index.points()) {
        sum_gt += pred_index.nearest(q).squared_distance;
    }
    return sum_pred / static_cast<double>(k * m) +
           sum_gt / static_cast<double>(gt_index.size());
}

double chamfer(std::span<const std::vector<Vec3>> pred_patches, const data::PointCloud& gt) {
    if (gt.size() == 0) throw std::invalid_argument("chamfer: empty target cloud");
    return chamfer(pred_patches, neighbors::KdIndex(gt.points));
}

ConformalTerms conformal_terms(std::span<const std::vector<geometry::MetricTensor>> per_patch_metrics,
                               std::span<const double> patch_areas) {
    if (per_patch_metrics.empty()) throw std::invalid_argument("conformal_terms: no patches");
    if (per_patch_metrics.size() != patch_areas.size()) {
        throw std::invalid_argument("conformal_terms: one area per patch required");
    }
    const std::size_t m = per_patch_metrics[0].size();
    if (m == 0) throw std::invalid_argument("conformal_terms: empty patch");
    for (const auto& patch : per_patch_metrics) {
        if (patch.size() != m) {
            throw std::invalid_argument("conformal_terms: patches must have equal point counts");
        }
    }
    for (std::size_t i = 0; i < patch_areas.size(); ++i) {
        if (!(patch_areas[i] > geometry::kDegenerateEps)) {
            throw DegeneratePatchError(static_cast<int>(i));
        }
    }

    const std::size_t k = per_patch_metrics.size();
    const double inv_km = 1.0 / static_cast<double>(k * m);
    double mu_E = 0.0, mu_G = 0.0;
    for (const auto& patch : per_patch_metrics) {
        for (const auto& g : patch) {
            mu_E += g.E;
            mu_G += g.G;
        }
    }
    mu_E *= inv_km;
    mu_G *= inv_km;

    ConformalTerms t;
    for (std::size_t pk = 0; pk < k; ++pk) {
        const double inv_a = 1.0 / patch_areas[pk];
        for (const auto& g : per_patch_metrics[pk]) {
            const double e = (g.E - mu_E) * inv_a;
            const double gg = (g.G - mu_G) * inv_a;
            const double f = g.F * inv_a;
            const double s = (g.E - g.G) * inv_a;
            t.l_E += e * e;
            t.l_G += gg * gg;
            t.l_sk += f * f;
            t.l_str += s * s;
        }
    }
    t.l_E *= inv_km;
    t.l_G *= inv_km;
    t.l_sk *= inv_km;
    t.l_str *= inv_km;
    return t;
}

double overlap_loss(std::span<const double> patch_areas, double gt_area) {
    if (!(gt_area > 0.0)) throw std::invalid_argument("overlap_loss: target area must be positive");
    double total = 0.0;
    for (const double a : patch_areas) total += a;
    const double excess = total - gt_area;
    return excess > 0.0 ? excess * excess : 0.0;
}

LossReport total_loss(double chd, const ConformalTerms& terms, double l_ol, const LossWeights& w) {
    w.validate();
    LossReport r;
    r.chd = chd;
    r.l_E = terms.l_E;
    r.l_G = terms.l_G;
    r.l_sk = terms.l_sk;
    r.l_str = terms.l_str;
    r.l_def = w.alpha_E * terms.l_E + w.alpha_G * terms.l_G +
              w.alpha_sk * terms.l_sk + w.alpha_str * terms.l_str;
    r.l_ol = l_ol;
    r.total = chd + w.alpha_def * r.l_def + w.alpha_ol * l_ol;
    return r;
}

namespace {

// Traced squared distance to a constant target.
VarId traced_sqdist_to_const(Tape& tape, const surface::TracedPoint& p, const Vec3& q) {
    const VarId dx = tape.square(tape.add_const(p.x, -q.x));
    const VarId dy = tape.square(tape.add_const(p.y, -q.y));
    const VarId dz = tape.square(tape.add_const(p.z, -q.z));
    return tape.add(tape.add(dx, dy), dz);
}

struct TracedMetric {
    VarId E, F, G, area_element;
};

TracedMetric trace_metric(Tape& tape, const surface::TracedPoint& p) {
    const VarId xu = tape.pick_du(p.x), yu = tape.pick_du(p.y), zu = tape.pick_du(p.z);
    const VarId xv = tape.pick_dv(p.x), yv = tape.pick_dv(p.y), zv = tape.pick_dv(p.z);
    TracedMetric m;
    m.E = tape.add(tape.add(tape.square(xu), tape.square(yu)), tape.square(zu));
    m.G = tape.add(tape.add(tape.square(xv), tape.square(yv)), tape.square(zv));
    m.F = tape.add(tape.add(tape.mul(xu, xv), tape.mul(yu, yv)), tape.mul(zu, zv));
    const VarId det = tape.sub(tape.mul(m.E, m.G), tape.square(m.F));
    m.area_element = tape.sqrt_clamped(det);
    return m;
}

}  // namespace

TracedLoss assemble_traced(Tape& tape,
                           std::span<const std::vector<surface::TracedPoint>> per_patch_points,
                           const neighbors::KdIndex& gt_index, const LossWeights& w,
                           double gt_area, bool grad_through_area_norm) {
    w.validate();
    if (per_patch_points.empty()) throw std::invalid_argument("assemble_traced: no patches");
    const std::size_t k = per_patch_points.size();
    const std::size_t m = per_patch_points[0].size();
    if (m == 0) throw std::invalid_argument("assemble_traced: empty patch");
    for (const auto& patch : per_patch_points) {
        if (patch.size() != m) {
            throw std::invalid_argument("assemble_traced: patches must contribute equal point counts");
        }
    }
    const std::size_t n_gt = gt_index.size();

    // Current positions; nearest-neighbor assignments are constants of the step.
    std::vector<Vec3> positions;
    positions.reserve(k * m);
    for (const auto& patch : per_patch_points) {
        for (const auto& p : patch) {
            positions.push_back({tape.val(p.x), tape.val(p.y), tape.val(p.z)});
        }
    }

    // Prediction-to-target term.
    std::vector<VarId> terms;
    terms.reserve(k * m);
    for (std::size_t pk = 0; pk < k; ++pk) {
        for (std::size_t i = 0; i < m; ++i) {
            const Vec3& q = gt_index.points()[gt_index.nearest(positions[pk * m + i]).index];
            terms.push_back(traced_sqdist_to_const(tape, per_patch_points[pk][i], q));
        }
    }
    const VarId term_pred = tape.scale(tape.sum(terms), 1.0 / static_cast<double>(k * m));

    // Target-to-prediction term, aggregated per winning prediction:
    //   sum over assigned targets of |p - q|^2
    //     = n |p|^2 - 2 p . (sum q) + sum |q|^2.
    const neighbors::KdIndex pred_index(positions);
    std::vector<std::uint32_t> assigned_count(k * m, 0);
    std::vector<Vec3> assigned_sum(k * m);
    std::vector<double> assigned_sqsum(k * m, 0.0);
    for (const auto& q : gt_index.points()) {
        const auto hit = pred_index.nearest(q);
        assigned_count[hit.index] += 1;
        assigned_sum[hit.index] += q;
        assigned_sqsum[hit.index] += dot(q, q);
    }
    terms.clear();
    for (std::size_t pk = 0; pk < k; ++pk) {
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t flat = pk * m + i;
            if (assigned_count[flat] == 0) continue;
            const surface::TracedPoint& p = per_patch_points[pk][i];
            const VarId sq = tape.add(tape.add(tape.square(p.x), tape.square(p.y)), tape.square(p.z));
            const Vec3& qs = assigned_sum[flat];
            const VarId pq = tape.add(tape.add(tape.scale(p.x, qs.x), tape.scale(p.y, qs.y)),
                                      tape.scale(p.z, qs.z));
            const VarId t = tape.add_const(
                tape.sub(tape.scale(sq, static_cast<double>(assigned_count[flat])), tape.scale(pq, 2.0)),
                assigned_sqsum[flat]);
            terms.push_back(t);
        }
    }
    const VarId term_gt = tape.scale(tape.sum(terms), 1.0 / static_cast<double>(n_gt));
    const VarId chd = tape.add(term_pred, term_gt);

    TracedLoss out;
    out.report.chd = tape.val(chd);
    VarId total = chd;

    const bool need_areas = w.deformation_active() || w.overlap_active();
    if (need_areas) {
        std::vector<std::vector<TracedMetric>> metrics(k);
        std::vector<VarId> patch_area_vars;
        patch_area_vars.reserve(k);
        out.patch_areas.reserve(k);
        std::vector<VarId> elems;
        for (std::size_t pk = 0; pk < k; ++pk) {
            metrics[pk].reserve(m);
            elems.clear();
            for (std::size_t i = 0; i < m; ++i) {
                metrics[pk].push_back(trace_metric(tape, per_patch_points[pk][i]));
                elems.push_back(metrics[pk].back().area_element);
            }
            const VarId area = tape.scale(tape.sum(elems), 1.0 / static_cast<double>(m));
            patch_area_vars.push_back(area);
            out.patch_areas.push_back(tape.val(area));
        }

        if (w.deformation_active()) {
            for (std::size_t pk = 0; pk < out.patch_areas.size(); ++pk) {
                if (!(out.patch_areas[pk] > geometry::kDegenerateEps)) {
                    throw DegeneratePatchError(static_cast<int>(pk));
                }
            }
            const double inv_km = 1.0 / static_cast<double>(k * m);
            std::vector<VarId> all_E, all_G;
            all_E.reserve(k * m);
            all_G.reserve(k * m);
            for (const auto& patch : metrics) {
                for (const auto& g : patch) {
                    all_E.push_back(g.E);
                    all_G.push_back(g.G);
                }
            }
            const VarId mu_E = tape.scale(tape.sum(all_E), inv_km);
            const VarId mu_G = tape.scale(tape.sum(all_G), inv_km);

            std::vector<VarId> tE, tG, tsk, tstr;
            tE.reserve(k * m);
            tG.reserve(k * m);
            tsk.reserve(k * m);
            tstr.reserve(k * m);
            for (std::size_t pk = 0; pk < k; ++pk) {
                // The normalizer follows the current area but, by default, no
                // gradient flows through it: letting the optimizer shrink the
                // area to deflate the penalty would reintroduce collapse.
                const double inv_a = 1.0 / out.patch_areas[pk];
                VarId recip_a = 0;
                if (grad_through_area_norm) recip_a = tape.recip(patch_area_vars[pk]);
                const auto normalized = [&](VarId x) {
                    return grad_through_area_norm ? tape.mul(x, recip_a) : tape.scale(x, inv_a);
                };
                for (const auto& g : metrics[pk]) {
                    tE.push_back(tape.square(normalized(tape.sub(g.E, mu_E))));
                    tG.push_back(tape.square(normalized(tape.sub(g.G, mu_G))));
                    tsk.push_back(tape.square(normalized(g.F)));
                    tstr.push_back(tape.square(normalized(tape.sub(g.E, g.G))));
                }
            }
            const VarId l_E = tape.scale(tape.sum(tE), inv_km);
            const VarId l_G = tape.scale(tape.sum(tG), inv_km);
            const VarId l_sk = tape.scale(tape.sum(tsk), inv_km);
            const VarId l_str = tape.scale(tape.sum(tstr), inv_km);
            const VarId l_def = tape.add(tape.add(tape.scale(l_E, w.alpha_E), tape.scale(l_G, w.alpha_G)),
                                         tape.add(tape.scale(l_sk, w.alpha_sk), tape.scale(l_str, w.alpha_str)));
            out.report.l_E = tape.val(l_E);
            out.report.l_G = tape.val(l_G);
            out.report.l_sk = tape.val(l_sk);
            out.report.l_str = tape.val(l_str);
            out.report.l_def = tape.val(l_def);
            total = tape.add(total, tape.scale(l_def, w.alpha_def));
        }

        if (w.overlap_active()) {
            if (!(gt_area > 0.0)) {
                throw std::invalid_argument("assemble_traced: overlap term requires a positive target area");
            }
            const VarId area_sum = tape.sum(patch_area_vars);
            const VarId l_ol = tape.square(tape.hinge(tape.add_const(area_sum, -gt_area)));
            out.report.l_ol = tape.val(l_ol);
            total = tape.add(total, tape.scale(l_ol, w.alpha_ol));
        }
    }

    out.total = total;
    out.report.total = tape.val(total);
    return out;
}

}  // namespace patchsurf::losses
