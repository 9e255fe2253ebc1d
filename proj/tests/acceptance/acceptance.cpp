// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// asserted criterion fails. `--only 6,7` restricts the run while tuning.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "patchsurf/core.hpp"
#include "patchsurf/data.hpp"
#include "patchsurf/losses.hpp"
#include "patchsurf/metrics.hpp"
#include "patchsurf/neighbors.hpp"
#include "patchsurf/surface.hpp"
#include "patchsurf/trainer.hpp"

using namespace patchsurf;
using losses::LossWeights;
using surface::Codeword;
using surface::UvPoint;
using testsupport::rel_err;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------
// 1. Differentiation correctness

Outcome criterion_differentiation() {
    const double t0 = now_s();
    Rng rng(101);
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const int D = 2 + static_cast<int>(rng.uniform() * 6);
        const int H = 1 + static_cast<int>(rng.uniform() * 2);
        const int W = 4 + static_cast<int>(rng.uniform() * 20);
        const auto dec = surface::init_decoder(rng.next_u64(), D, H, W);
        Codeword d;
        for (int i = 0; i < D; ++i) d.values.push_back(rng.uniform(-1, 1));
        const double u = rng.uniform(0.1, 0.9), v = rng.uniform(0.1, 0.9);
        const auto jets3 = surface::decode(dec, d, {u, v});
        for (int out = 0; out < 3; ++out) {
            const auto f = [&](double uu, double vv) {
                return surface::decode(dec, d, {uu, vv})[out].val;
            };
            const auto fd = testsupport::fd_slots(f, u, v);
            worst = std::max({worst, rel_err(jets3[out].du, fd.du), rel_err(jets3[out].dv, fd.dv),
                              rel_err(jets3[out].duu, fd.duu), rel_err(jets3[out].duv, fd.duv),
                              rel_err(jets3[out].dvv, fd.dvv)});
        }
    }
    const double elapsed = now_s() - t0;
    std::ostringstream os;
    os << "worst slot error " << worst << " (limit 1e-5), " << elapsed << " s (limit 30)";
    return {worst < 1e-5 && elapsed < 30.0, os.str()};
}

// ---------------------------------------------------------------------------
// 2. Geometry oracles

Outcome criterion_geometry_oracles() {
    bool ok = true;
    std::ostringstream os;

    const auto plane = surface::analytic_plane();
    for (const auto& r : surface::sample_uv_random(64, 7)) {
        const auto sp = geometry::surface_point(plane.evaluate({}, r));
        ok &= std::abs(sp.normal.z - 1.0) <= 1e-10 && std::abs(sp.normal.x) <= 1e-10;
        ok &= std::abs(sp.c_mean) <= 1e-10 && std::abs(sp.c_gauss) <= 1e-10;
    }
    os << "plane ok=" << ok;

    const auto sphere = surface::analytic_sphere(1.0);
    double worst_sphere = 0.0;
    for (const auto& r : surface::sample_uv_random(64, 8)) {
        const UvPoint band{r.u * 6.28, (r.v - 0.5) * 2.4};  // keep away from the poles
        const auto sp = geometry::surface_point(sphere.evaluate({}, band));
        worst_sphere = std::max({worst_sphere, std::abs(sp.c_gauss - 1.0),
                                 std::abs(std::abs(sp.c_mean) - 1.0)});
    }
    ok &= worst_sphere < 1e-6;
    os << ", sphere max dev " << worst_sphere;

    const auto saddle = geometry::surface_point(surface::analytic_saddle().evaluate({}, {0, 0}));
    const bool saddle_ok =
        std::abs(saddle.c_gauss + 4.0) < 1e-8 && std::abs(saddle.c_mean) < 1e-8;
    ok &= saddle_ok;
    os << ", saddle K=" << saddle.c_gauss << " H=" << saddle.c_mean;
    return {ok, os.str()};
}

// ---------------------------------------------------------------------------
// 3. Full-gradient check on the micro model

Outcome criterion_full_gradient() {
    const double t0 = now_s();
    const surface::MlpShape shape{3, 2, 8};
    const int K = 2, M = 8, N = 16;
    Rng rng(303);
    std::vector<surface::PatchDecoder> decoders;
    for (int k = 0; k < K; ++k) {
        decoders.push_back(surface::init_decoder(rng.next_u64(), shape.latent_dim,
                                                 shape.hidden_layers, shape.width));
    }
    const std::size_t wc = decoders[0].weights.size();
    Codeword code;
    for (int i = 0; i < shape.latent_dim; ++i) code.values.push_back(rng.uniform(-1, 1));
    std::vector<UvPoint> uv;
    for (int i = 0; i < K * M; ++i) uv.push_back({rng.uniform(), rng.uniform()});
    data::PointCloud gt;
    for (int i = 0; i < N; ++i) {
        gt.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    const double gt_area = 0.5;
    const LossWeights w{1e-2, 2.0, 1.0, 1.0, 1.0, 1.0};  // every term active

    std::vector<double> flat;
    for (const auto& d : decoders) flat.insert(flat.end(), d.weights.begin(), d.weights.end());
    flat.insert(flat.end(), code.values.begin(), code.values.end());

    jets::Tape tape(flat);
    std::vector<jets::VarId> latent;
    for (int i = 0; i < shape.latent_dim; ++i) {
        latent.push_back(tape.param(static_cast<std::uint32_t>(K * wc + i)));
    }
    std::vector<std::vector<surface::TracedPoint>> per_patch(K);
    for (int k = 0; k < K; ++k) {
        for (int i = 0; i < M; ++i) {
            per_patch[k].push_back(surface::decode_traced(
                tape, shape, static_cast<std::uint32_t>(k * wc), latent, uv[k * M + i]));
        }
    }
    const neighbors::KdIndex gt_index(gt.points);
    const auto traced = losses::assemble_traced(tape, per_patch, gt_index, w, gt_area, false);
    std::vector<double> grad;
    tape.backward(traced.total, grad);

    const std::vector<double> base_areas = traced.patch_areas;
    const auto value_of = [&](const std::vector<double>& p) {
        std::vector<surface::PatchDecoder> decs = decoders;
        std::size_t off = 0;
        for (auto& d : decs) {
            std::copy(p.begin() + off, p.begin() + off + wc, d.weights.begin());
            off += wc;
        }
        Codeword c;
        c.values.assign(p.begin() + off, p.end());
        std::vector<std::vector<Vec3>> pred(K);
        std::vector<std::vector<geometry::MetricTensor>> mets(K);
        std::vector<double> areas(K, 0.0);
        for (int k = 0; k < K; ++k) {
            for (int i = 0; i < M; ++i) {
                const auto sp = geometry::surface_point(surface::decode(decs[k], c, uv[k * M + i]));
                pred[k].push_back(sp.position);
                mets[k].push_back(sp.metric);
                areas[k] += sp.area_element;
            }
            areas[k] /= M;
        }
        const double chd = losses::chamfer(pred, gt);
        const auto terms = losses::conformal_terms(mets, base_areas);
        const double l_ol = losses::overlap_loss(areas, gt_area);
        return losses::total_loss(chd, terms, l_ol, w).total;
    };
    const auto fd = testsupport::fd_gradient(value_of, flat);

    double worst = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) worst = std::max(worst, rel_err(grad[i], fd[i], 1e-2));
    const double elapsed = now_s() - t0;
    std::ostringstream os;
    os << grad.size() << " params, worst rel err " << worst << " (limit 1e-4), " << elapsed
       << " s (limit 10)";
    return {worst < 1e-4 && elapsed < 10.0, os.str()};
}

// ---------------------------------------------------------------------------
// 4. Chamfer exactness

double brute_force_chamfer(std::span<const std::vector<Vec3>> pred, const data::PointCloud& gt) {
    const std::size_t k = pred.size(), m = pred[0].size();
    double sum_pred = 0.0;
    for (const auto& patch : pred) {
        for (const auto& p : patch) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : gt.points) best = std::min(best, squared_distance(p, q));
            sum_pred += best;
        }
    }
    double sum_gt = 0.0;
    for (const auto& q : gt.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& patch : pred) {
            for (const auto& p : patch) best = std::min(best, squared_distance(p, q));
        }
        sum_gt += best;
    }
    return sum_pred / static_cast<double>(k * m) + sum_gt / static_cast<double>(gt.size());
}

Outcome criterion_chamfer_exactness() {
    Rng rng(404);
    int mismatches = 0;
    for (int inst = 0; inst < 1000; ++inst) {
        const int k = 1 + static_cast<int>(rng.uniform() * 4);
        const int m = 1 + static_cast<int>(rng.uniform() * 125);
        const int n = 1 + static_cast<int>(rng.uniform() * 500);
        std::vector<std::vector<Vec3>> pred(k);
        for (auto& patch : pred) {
            for (int i = 0; i < m; ++i) {
                patch.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
            }
        }
        data::PointCloud gt;
        for (int i = 0; i < n; ++i) {
            gt.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        }
        if (losses::chamfer(pred, gt) != brute_force_chamfer(pred, gt)) ++mismatches;
    }
    std::ostringstream os;
    os << mismatches << "/1000 instances differ from the brute-force value";
    return {mismatches == 0, os.str()};
}

// ---------------------------------------------------------------------------
// 5. Area consistency

Outcome criterion_area_consistency() {
    const auto cloth = surface::analytic_wavy_cloth(0.1, 1.0);
    const int n = 512;
    double quad = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const auto jt = cloth.evaluate({}, {(i + 0.5) / n, (j + 0.5) / n});
            const Vec3 fu{jt[0].du, jt[1].du, jt[2].du};
            const Vec3 fv{jt[0].dv, jt[1].dv, jt[2].dv};
            quad += std::sqrt(dot(fu, fu) * dot(fv, fv) - dot(fu, fv) * dot(fu, fv));
        }
    }
    quad /= static_cast<double>(n) * n;
    const auto samples = surface::sample_uv_random(100000, 515);
    const double mc = geometry::patch_area(cloth, {}, samples);
    const double rel = std::abs(mc - quad) / quad;
    std::ostringstream os;
    os << "monte-carlo " << mc << " vs quadrature " << quad << ", rel dev " << rel
       << " (limit 0.005)";
    return {rel < 0.005, os.str()};
}

// ---------------------------------------------------------------------------
// 6-8. Wavy-cloth training studies (shared, memoized runs)
//
// The collapse study (criterion 6) pins K = 4; the overlap study runs with
// K = 10 because four square patches tile this target without ever exceeding
// its area, which would leave the hinge inactive and the comparison empty.
// The K = 10 runs use a smaller learning rate: when the hinge first engages,
// its alpha_ol = 1e2 gradient spike otherwise crushes the patch areas faster
// than the data term can recover them.

const data::Dataset& wavy_dataset() {
    static std::optional<data::Dataset> cached;
    if (!cached) {
        data::SyntheticSurfaceSpec spec;
        spec.kind = data::SurfaceKind::kWavyCloth;
        spec.count = 8000;
        spec.seed = 2718;
        cached = data::generate(spec);
    }
    return *cached;
}

LossWeights weights_for(const std::string& tag) {
    if (tag == "reg") return {1e-3, 1e2, 1, 1, 1, 1};
    if (tag == "nool") return {1e-3, 0, 1, 1, 1, 1};
    return {0, 0, 1, 1, 1, 1};  // basic
}

struct StudyRuns {
    std::vector<metrics::MetricsReport> reports;  // seeds 0..4
    double seconds = 0.0;
};

// key = "k4_reg", "k4_nool", "k4_basic", "k10_reg", "k10_nool"
const StudyRuns& study(const std::string& key) {
    static std::map<std::string, StudyRuns> cache;
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    const bool k10 = key.rfind("k10", 0) == 0;
    trainer::TrainConfig cfg;
    cfg.points_per_patch = 128;
    cfg.latent_dim = 8;
    cfg.hidden_layers = 2;
    cfg.eval_resolution = 48;
    cfg.olap_thresholds = {0.01, 0.05, 0.1};
    if (k10) {
        cfg.patches = 10;
        cfg.width = 32;
        cfg.lr = 1e-3;
        cfg.steps = 6000;
    } else {
        cfg.patches = 4;
        cfg.width = 48;
        cfg.lr = 5e-3;
        cfg.steps = 5000;
    }
    cfg.weights = weights_for(key.substr(key.find('_') + 1));

    StudyRuns runs;
    const auto& ds = wavy_dataset();
    const double t0 = now_s();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        runs.reports.push_back(trainer::fit(ds.cloud, ds.gt_area, cfg).final_metrics);
    }
    runs.seconds = now_s() - t0;
    return cache.emplace(key, std::move(runs)).first->second;
}

double olap_at(const metrics::MetricsReport& r, double t) {
    for (const auto& [tt, v] : r.m_olap) {
        if (std::abs(tt - t) < 1e-12) return v;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

Outcome criterion_collapse_prevention() {
    const auto& nool = study("k4_nool");
    const auto& basic = study("k4_basic");
    bool ok = true;
    std::ostringstream os;
    os << "m_col regularized:";
    for (const auto& r : nool.reports) {
        os << ' ' << r.m_col;
        ok &= r.m_col == 0;
    }
    os << " | basic (recorded):";
    for (const auto& r : basic.reports) os << ' ' << r.m_col;
    const double block = nool.seconds + basic.seconds;
    os << " | block " << block << " s (limit 1800)";
    ok &= block < 1800.0;
    return {ok, os.str()};
}

Outcome criterion_overlap_control() {
    const auto& reg = study("k10_reg");
    const auto& nool = study("k10_nool");
    const double gt_area = wavy_dataset().gt_area;
    int good = 0;
    std::ostringstream os;
    for (int s = 0; s < 5; ++s) {
        double sum_area = 0.0;
        for (const double a : reg.reports[s].patch_areas) sum_area += a;
        const double o_reg = olap_at(reg.reports[s], 0.05);
        const double o_unreg = olap_at(nool.reports[s], 0.05);
        const bool pass = sum_area <= 1.1 * gt_area && o_reg <= o_unreg;
        good += pass;
        os << (s ? ", " : "") << "seed " << s << ": sumA/A " << sum_area / gt_area << " olap "
           << o_reg << (pass ? " <= " : " > ") << o_unreg;
    }
    os << " -> " << good << "/5 (need 4)";
    return {good >= 4, os.str()};
}

Outcome criterion_normal_quality() {
    const auto& ours = study("k4_reg");
    const auto& basic = study("k4_basic");
    int good = 0;
    std::ostringstream os;
    for (int s = 0; s < 5; ++s) {
        const double a = ours.reports[s].m_ae_deg;
        const double b = basic.reports[s].m_ae_deg;
        good += a <= b;
        os << (s ? ", " : "") << a << (a <= b ? " <= " : " > ") << b;
    }
    os << " -> " << good << "/5 (need 4)";
    return {good >= 4, os.str()};
}

// ---------------------------------------------------------------------------
// 9. Metric suite self-consistency

Outcome criterion_metric_selfconsistency() {
    bool ok = true;
    std::ostringstream os;

    {  // m_olap monotone over a threshold ladder
        Rng rng(909);
        data::PointCloud gt;
        for (int i = 0; i < 400; ++i) {
            gt.points.push_back({rng.uniform(), rng.uniform(), 0.2 * rng.uniform()});
        }
        std::vector<std::vector<Vec3>> patches(4);
        for (auto& p : patches) {
            for (int i = 0; i < 80; ++i) {
                p.push_back({rng.uniform(), rng.uniform(), 0.2 * rng.uniform()});
            }
        }
        double prev = 0.0;
        bool monotone = true;
        for (const double t : {0.005, 0.01, 0.02, 0.05, 0.1, 0.25, 0.5}) {
            const double v = metrics::overlap_count(patches, gt, t);
            monotone &= v >= prev;
            prev = v;
        }
        ok &= monotone;
        os << "olap monotone=" << monotone;
    }

    {  // angular error orientation-flip invariance, exact
        Rng rng(910);
        data::PointCloud gt, pred;
        for (int i = 0; i < 300; ++i) {
            gt.points.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
            Vec3 n{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            gt.normals.push_back(n / norm(n));
            pred.points.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
            Vec3 m{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            pred.normals.push_back(m / norm(m));
        }
        const double base = metrics::angular_error_degrees(pred, gt);
        auto flipped = pred;
        Rng flip_rng(911);
        for (auto& n : flipped.normals) {
            if (flip_rng.uniform() < 0.5) n = -1.0 * n;
        }
        const bool invariant = metrics::angular_error_degrees(flipped, gt) == base;
        ok &= invariant;
        os << ", flip invariant=" << invariant;
    }

    {  // collapse_count over 1000 random area vectors
        Rng rng(912);
        bool property = true;
        for (int trial = 0; trial < 1000; ++trial) {
            const int k = 1 + static_cast<int>(rng.uniform() * 16);
            std::vector<double> areas;
            double mean = 0.0, min = std::numeric_limits<double>::infinity();
            for (int i = 0; i < k; ++i) {
                areas.push_back(std::pow(10.0, rng.uniform(-8, 0)));
                mean += areas.back();
                min = std::min(min, areas.back());
            }
            mean /= k;
            const int count = metrics::collapse_count(areas, 1e-3);
            property &= (count == 0) == (min >= 1e-3 * mean);
        }
        ok &= property;
        os << ", collapse property=" << property;
    }
    return {ok, os.str()};
}

// ---------------------------------------------------------------------------
// 10. Quadric-oracle agreement on converged fits

struct CurvatureAgreement {
    double median_H = 0.0;
    double median_K = 0.0;
    int queries = 0;
};

// Median relative deviation between analytic and quadric-fit curvature
// magnitudes over interior grid points of a fitted model. `floor` keeps the
// ratio meaningful for near-flat fits where the denominator would vanish.
CurvatureAgreement curvature_agreement(const trainer::Model& model, double radius, double floor) {
    const int res = 48;
    const auto grid = surface::sample_uv_grid(res * res);
    std::vector<Vec3> cloud;
    std::vector<geometry::SurfacePoint> pts;
    for (const auto& dec : model.patches) {
        for (const auto& r : grid) {
            const auto sp = geometry::surface_point(surface::decode(dec, model.codewords[0], r));
            cloud.push_back(sp.position);
            pts.push_back(sp);
        }
    }
    const neighbors::KdIndex idx(cloud);
    std::vector<double> errs_H, errs_K;
    for (std::size_t pi = 0; pi < pts.size(); ++pi) {
        const auto& r = grid[pi % grid.size()];
        if (r.u < 0.2 || r.u > 0.8 || r.v < 0.2 || r.v > 0.8) continue;  // interior only
        if (pi % 17 != 0) continue;
        if (pts[pi].degenerate) continue;
        const auto est = metrics::quadric_curvature_oracle(idx, pts[pi].position, radius);
        if (!est) continue;
        errs_H.push_back(std::abs(std::abs(est->c_mean) - std::abs(pts[pi].c_mean)) /
                         std::max(std::abs(pts[pi].c_mean), floor));
        errs_K.push_back(std::abs(std::abs(est->c_gauss) - std::abs(pts[pi].c_gauss)) /
                         std::max(std::abs(pts[pi].c_gauss), floor));
    }
    CurvatureAgreement out;
    out.queries = static_cast<int>(errs_H.size());
    if (!errs_H.empty()) {
        std::sort(errs_H.begin(), errs_H.end());
        std::sort(errs_K.begin(), errs_K.end());
        out.median_H = errs_H[errs_H.size() / 2];
        out.median_K = errs_K[errs_K.size() / 2];
    }
    return out;
}

Outcome criterion_quadric_agreement() {
    std::ostringstream os;
    bool ok = true;

    const auto fit_config = [](std::uint64_t seed, int patches, int eval_res) {
        trainer::TrainConfig cfg;
        cfg.patches = patches;
        cfg.points_per_patch = 128;
        cfg.steps = 2500;
        cfg.lr = 5e-3;
        cfg.latent_dim = 8;
        cfg.hidden_layers = 2;
        cfg.width = 48;
        cfg.seed = seed;
        cfg.weights = LossWeights{1e-3, 0, 1, 1, 1, 1};
        cfg.eval_resolution = eval_res;
        return cfg;
    };

    {  // plane fit: near-flat, so the ratio uses the unit-curvature floor
        data::SyntheticSurfaceSpec spec;
        spec.kind = data::SurfaceKind::kPlane;
        spec.count = 8000;
        spec.seed = 31415;
        const auto ds = data::generate(spec);
        const auto fit = trainer::fit(ds.cloud, ds.gt_area, fit_config(12, 1, 128));
        os << "plane: chd " << fit.final_metrics.chd << " (limit 1e-4), m_ae "
           << fit.final_metrics.m_ae_deg << " deg (limit 3)";
        ok &= fit.final_metrics.chd < 1e-4;
        ok &= fit.final_metrics.m_ae_deg < 3.0;
        const auto agree = curvature_agreement(fit.model, 0.08, 1.0);
        os << ", medians H " << agree.median_H << " K " << agree.median_K << " over "
           << agree.queries << " queries";
        ok &= agree.queries >= 30 && agree.median_H < 0.10 && agree.median_K < 0.10;
    }

    {  // sphere-cap fit: curvature near 1, plain relative error
        data::SyntheticSurfaceSpec spec;
        spec.kind = data::SurfaceKind::kSphereCap;
        spec.count = 6000;
        spec.seed = 27182;
        const auto ds = data::generate(spec);
        const auto fit = trainer::fit(ds.cloud, ds.gt_area, fit_config(13, 4, 64));
        const auto agree = curvature_agreement(fit.model, 0.12, 0.5);
        os << " | sphere-cap: medians H " << agree.median_H << " K " << agree.median_K
           << " over " << agree.queries << " queries, m_ae " << fit.final_metrics.m_ae_deg;
        ok &= agree.queries >= 30 && agree.median_H < 0.10 && agree.median_K < 0.10;
    }
    return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string tok;
            while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
        }
    }

    using Fn = Outcome (*)();
    const std::vector<std::pair<std::string, Fn>> criteria = {
        {"differentiation correctness", &criterion_differentiation},
        {"geometry oracles", &criterion_geometry_oracles},
        {"full-gradient check", &criterion_full_gradient},
        {"chamfer exactness", &criterion_chamfer_exactness},
        {"area consistency", &criterion_area_consistency},
        {"collapse prevention", &criterion_collapse_prevention},
        {"overlap control", &criterion_overlap_control},
        {"normal quality trend", &criterion_normal_quality},
        {"metric suite self-consistency", &criterion_metric_selfconsistency},
        {"quadric-oracle agreement", &criterion_quadric_agreement},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const double t0 = now_s();
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double dt = now_s() - t0;
        std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << id << ": "
                  << criteria[i].first << " [" << dt << " s] -- " << out.detail << "\n"
                  << std::flush;
        failures += !out.pass;
    }
    return failures == 0 ? 0 : 1;
}
