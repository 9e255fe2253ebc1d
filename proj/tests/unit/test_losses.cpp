#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "patchsurf/core.hpp"
#include "patchsurf/losses.hpp"

using namespace patchsurf;
using geometry::MetricTensor;
using losses::LossWeights;
using surface::Codeword;
using surface::UvPoint;
using testsupport::rel_err;

namespace {

// The O(N*M) evaluation the k-d-backed path has to reproduce bit for bit.
double brute_force_chamfer(std::span<const std::vector<Vec3>> pred, const data::PointCloud& gt) {
    const std::size_t k = pred.size();
    const std::size_t m = pred[0].size();
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

std::vector<Vec3> random_points(Rng& rng, int n) {
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) {
        pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    return pts;
}

// Shared fixture for gradient checks: a tiny two-patch model with fixed UV
// samples, so the value path and the traced path see the same configuration.
struct MicroInstance {
    surface::MlpShape shape{3, 2, 8};
    int K = 2, M = 8;
    std::vector<surface::PatchDecoder> decoders;
    Codeword code;
    std::vector<UvPoint> uv;  // per patch-point, K*M entries
    data::PointCloud gt;
    double gt_area = 0.5;
    std::size_t weight_count = 0;

    explicit MicroInstance(std::uint64_t seed, int n_gt = 16) {
        Rng rng(seed);
        for (int k = 0; k < K; ++k) {
            decoders.push_back(
                surface::init_decoder(rng.next_u64(), shape.latent_dim, shape.hidden_layers, shape.width));
        }
        weight_count = decoders[0].weights.size();
        for (int i = 0; i < shape.latent_dim; ++i) code.values.push_back(rng.uniform(-1, 1));
        for (int i = 0; i < K * M; ++i) uv.push_back({rng.uniform(), rng.uniform()});
        gt.points = random_points(rng, n_gt);
    }

    std::vector<double> flat() const {
        std::vector<double> p;
        for (const auto& d : decoders) p.insert(p.end(), d.weights.begin(), d.weights.end());
        p.insert(p.end(), code.values.begin(), code.values.end());
        return p;
    }

    // Value-path loss. `normalizer_areas`: when non-null, the conformal terms
    // divide by these fixed areas (the gradient-constant semantics); otherwise
    // by areas recomputed from the parameters.
    double loss_value(const std::vector<double>& p, const LossWeights& w,
                      const std::vector<double>* normalizer_areas) const {
        std::vector<surface::PatchDecoder> decs = decoders;
        std::size_t off = 0;
        for (auto& d : decs) {
            std::copy(p.begin() + off, p.begin() + off + weight_count, d.weights.begin());
            off += weight_count;
        }
        Codeword c;
        c.values.assign(p.begin() + off, p.end());

        std::vector<std::vector<Vec3>> pred(K);
        std::vector<std::vector<MetricTensor>> metrics(K);
        std::vector<double> areas(K, 0.0);
        for (int k = 0; k < K; ++k) {
            for (int i = 0; i < M; ++i) {
                const auto jets3 = surface::decode(decs[k], c, uv[k * M + i]);
                const auto sp = geometry::surface_point(jets3);
                pred[k].push_back(sp.position);
                metrics[k].push_back(sp.metric);
                areas[k] += sp.area_element;
            }
            areas[k] /= M;
        }
        const double chd = losses::chamfer(pred, gt);
        losses::ConformalTerms terms;
        if (w.deformation_active()) {
            terms = losses::conformal_terms(metrics, normalizer_areas ? *normalizer_areas : areas);
        }
        const double l_ol = w.overlap_active() ? losses::overlap_loss(areas, gt_area) : 0.0;
        return losses::total_loss(chd, terms, l_ol, w).total;
    }

    losses::TracedLoss traced(jets::Tape& tape, const LossWeights& w,
                              bool grad_through_area_norm = false) const {
        std::vector<jets::VarId> latent;
        const std::uint32_t code_off = static_cast<std::uint32_t>(K * weight_count);
        for (int i = 0; i < shape.latent_dim; ++i) latent.push_back(tape.param(code_off + i));
        std::vector<std::vector<surface::TracedPoint>> per_patch(K);
        for (int k = 0; k < K; ++k) {
            for (int i = 0; i < M; ++i) {
                per_patch[k].push_back(surface::decode_traced(
                    tape, shape, static_cast<std::uint32_t>(k * weight_count), latent, uv[k * M + i]));
            }
        }
        const neighbors::KdIndex gt_index(gt.points);
        return losses::assemble_traced(tape, per_patch, gt_index, w, gt_area,
                                       grad_through_area_norm);
    }
};

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("chamfer of a cloud against itself is zero") {
    Rng rng(5);
    const std::vector<std::vector<Vec3>> pred{random_points(rng, 40)};
    data::PointCloud gt;
    gt.points = pred[0];
    CHECK(losses::chamfer(pred, gt) == 0.0);
}

TEST_CASE("single-point chamfer sums both directions") {
    const std::vector<std::vector<Vec3>> pred{{Vec3{0, 0, 0}}};
    data::PointCloud gt;
    gt.points = {{1, 0, 0}};
    CHECK(losses::chamfer(pred, gt) == 2.0);
}

TEST_CASE("chamfer rejects empty inputs") {
    data::PointCloud gt;
    gt.points = {{0, 0, 0}};
    CHECK_THROWS_AS(losses::chamfer({}, gt), std::invalid_argument);
    const std::vector<std::vector<Vec3>> pred{{Vec3{0, 0, 0}}};
    data::PointCloud empty;
    CHECK_THROWS_AS(losses::chamfer(pred, empty), std::invalid_argument);
}

TEST_CASE("kd-backed chamfer equals brute force bit for bit") {
    Rng rng(606);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 1 + static_cast<int>(rng.uniform() * 3);
        const int m = 1 + static_cast<int>(rng.uniform() * 50);
        const int n = 1 + static_cast<int>(rng.uniform() * 50);
        std::vector<std::vector<Vec3>> pred(k);
        for (auto& patch : pred) patch = random_points(rng, m);
        data::PointCloud gt;
        gt.points = random_points(rng, n);
        CHECK(losses::chamfer(pred, gt) == brute_force_chamfer(pred, gt));
    }
}

TEST_CASE("chamfer is invariant to target point order") {
    Rng rng(707);
    std::vector<std::vector<Vec3>> pred{random_points(rng, 30), random_points(rng, 30)};
    data::PointCloud gt;
    gt.points = random_points(rng, 50);
    const double base = losses::chamfer(pred, gt);
    data::PointCloud shuffled = gt;
    std::reverse(shuffled.points.begin(), shuffled.points.end());
    CHECK(losses::chamfer(pred, shuffled) == doctest::Approx(base).epsilon(1e-13));
    CHECK(base > 0.0);
}

TEST_CASE("conformal terms vanish for a constant conformal metric") {
    std::vector<std::vector<MetricTensor>> metrics(3, std::vector<MetricTensor>(5, {2.5, 0.0, 2.5}));
    const std::vector<double> areas{1.0, 1.0, 1.0};
    const auto t = losses::conformal_terms(metrics, areas);
    CHECK(t.l_E == 0.0);
    CHECK(t.l_G == 0.0);
    CHECK(t.l_sk == 0.0);
    CHECK(t.l_str == 0.0);
}

TEST_CASE("skewed linear map produces unit skew and stretch terms") {
    // f = (u, u+v, 0): E = 2, F = 1, G = 1, area element 1
    std::vector<std::vector<MetricTensor>> metrics{{MetricTensor{2.0, 1.0, 1.0}}};
    const std::vector<double> areas{1.0};
    const auto t = losses::conformal_terms(metrics, areas);
    CHECK(t.l_sk == 1.0);
    CHECK(t.l_str == 1.0);
    CHECK(t.l_E == 0.0);  // single point: E equals its mean
    CHECK(t.l_G == 0.0);
}

TEST_CASE("degenerate patch area raises the collapse error") {
    std::vector<std::vector<MetricTensor>> metrics{{MetricTensor{1, 0, 1}}, {MetricTensor{1, 0, 1}}};
    const std::vector<double> areas{1.0, 0.0};
    CHECK_THROWS_AS(losses::conformal_terms(metrics, areas), losses::DegeneratePatchError);
    try {
        losses::conformal_terms(metrics, areas);
    } catch (const losses::DegeneratePatchError& e) {
        CHECK(e.patch_index() == 1);
    }
}

TEST_CASE("conformal terms are invariant to uniform rescaling of the surface") {
    MicroInstance inst(42);
    // metrics and areas at scale 1
    std::vector<std::vector<MetricTensor>> metrics(inst.K);
    std::vector<double> areas(inst.K, 0.0);
    for (int k = 0; k < inst.K; ++k) {
        for (int i = 0; i < inst.M; ++i) {
            const auto sp = geometry::surface_point(
                surface::decode(inst.decoders[k], inst.code, inst.uv[k * inst.M + i]));
            metrics[k].push_back(sp.metric);
            areas[k] += sp.area_element;
        }
        areas[k] /= inst.M;
    }
    const auto base = losses::conformal_terms(metrics, areas);

    const double s = 3.7;  // scale the surface: E, F, G and A all pick up s^2
    auto scaled = metrics;
    auto scaled_areas = areas;
    for (auto& patch : scaled) {
        for (auto& g : patch) {
            g.E *= s * s;
            g.F *= s * s;
            g.G *= s * s;
        }
    }
    for (auto& a : scaled_areas) a *= s * s;
    const auto t = losses::conformal_terms(scaled, scaled_areas);
    CHECK(rel_err(t.l_E, base.l_E, 1e-12) < 1e-9);
    CHECK(rel_err(t.l_G, base.l_G, 1e-12) < 1e-9);
    CHECK(rel_err(t.l_sk, base.l_sk, 1e-12) < 1e-9);
    CHECK(rel_err(t.l_str, base.l_str, 1e-12) < 1e-9);
}

TEST_CASE("overlap hinge examples") {
    CHECK(losses::overlap_loss(std::vector<double>{0.4, 0.5}, 1.0) == 0.0);
    CHECK(losses::overlap_loss(std::vector<double>{0.7, 0.8}, 1.0) == doctest::Approx(0.25));
    CHECK_THROWS_AS(losses::overlap_loss(std::vector<double>{1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("overlap gradient is the shared hinge slope") {
    const std::vector<double> areas{0.6, 0.9, 0.3};
    const double gt_area = 1.0;
    const double slope = 2.0 * std::max(0.0, areas[0] + areas[1] + areas[2] - gt_area);
    const auto f = [&](const std::vector<double>& a) { return losses::overlap_loss(a, gt_area); };
    const auto grad = testsupport::fd_gradient(f, areas, 1e-6);
    for (const double g : grad) CHECK(g == doctest::Approx(slope).epsilon(1e-6));
}

TEST_CASE("total loss weighting") {
    losses::ConformalTerms terms{0.1, 0.2, 0.3, 0.4};
    SUBCASE("all weights zero reduces to the data term") {
        const auto r = losses::total_loss(1.25, terms, 9.0, LossWeights{0, 0, 1, 1, 1, 1});
        CHECK(r.total == 1.25);
    }
    SUBCASE("headline configuration wires the terms as documented") {
        const LossWeights w{1e-3, 1e2, 1, 1, 1, 1};
        const auto r = losses::total_loss(0.5, terms, 0.03, w);
        CHECK(r.l_def == doctest::Approx(1.0).epsilon(1e-12));  // 0.1+0.2+0.3+0.4
        CHECK(r.total == doctest::Approx(0.5 + 1e-3 * 1.0 + 1e2 * 0.03).epsilon(1e-12));
    }
    SUBCASE("regularizer contribution is linear in the outer weights") {
        const LossWeights w1{2e-3, 3.0, 1, 1, 1, 1};
        const LossWeights w2{4e-3, 6.0, 1, 1, 1, 1};
        const double chd = 0.7, l_ol = 0.2;
        const auto r1 = losses::total_loss(chd, terms, l_ol, w1);
        const auto r2 = losses::total_loss(chd, terms, l_ol, w2);
        CHECK(r2.total - chd == doctest::Approx(2.0 * (r1.total - chd)).epsilon(1e-12));
    }
    SUBCASE("negative weights are rejected") {
        CHECK_THROWS_AS(losses::total_loss(0, terms, 0, LossWeights{-1, 0, 1, 1, 1, 1}),
                        std::invalid_argument);
    }
}

TEST_CASE("traced loss values agree with the value-path functions") {
    MicroInstance inst(2025);
    const LossWeights w{1e-2, 2.0, 1.0, 0.8, 1.2, 0.5};
    const auto flat = inst.flat();
    jets::Tape tape(flat);
    const auto traced = inst.traced(tape, w);
    const double value = inst.loss_value(flat, w, nullptr);
    CHECK(traced.report.total == doctest::Approx(value).epsilon(1e-9));
    CHECK(traced.report.chd ==
          doctest::Approx(losses::chamfer(
              [&] {
                  std::vector<std::vector<Vec3>> pred(inst.K);
                  for (int k = 0; k < inst.K; ++k) {
                      for (int i = 0; i < inst.M; ++i) {
                          const auto j = surface::decode(inst.decoders[k], inst.code,
                                                         inst.uv[k * inst.M + i]);
                          pred[k].push_back({j[0].val, j[1].val, j[2].val});
                      }
                  }
                  return pred;
              }(),
              inst.gt))
              .epsilon(1e-9));
}

TEST_CASE("full-loss weight gradients match finite differences") {
    MicroInstance inst(77);
    const LossWeights w{1e-2, 2.0, 1.0, 1.0, 1.0, 1.0};
    auto flat = inst.flat();

    jets::Tape tape(flat);
    const auto traced = inst.traced(tape, w);
    std::vector<double> grad;
    tape.backward(traced.total, grad);

    // The conformal normalizers are fixed at their base-parameter values: the
    // oracle differentiates the same objective the tape differentiates.
    const std::vector<double> base_areas = traced.patch_areas;
    const auto f = [&](const std::vector<double>& p) { return inst.loss_value(p, w, &base_areas); };
    const auto fd = testsupport::fd_gradient(f, flat);
    REQUIRE(grad.size() == fd.size());
    std::size_t checked = 0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        CAPTURE(i);
        CHECK(rel_err(grad[i], fd[i], 1e-2) < 1e-4);
        ++checked;
    }
    CHECK(checked == flat.size());
}

TEST_CASE("area-normalizer gradient flag switches the differentiated objective") {
    MicroInstance inst(88);
    const LossWeights w{5e-2, 0.0, 1.0, 1.0, 1.0, 1.0};
    auto flat = inst.flat();

    jets::Tape tape(flat);
    const auto traced = inst.traced(tape, w, /*grad_through_area_norm=*/true);
    std::vector<double> grad;
    tape.backward(traced.total, grad);

    // Now the oracle recomputes the normalizer areas from the parameters.
    const auto f = [&](const std::vector<double>& p) { return inst.loss_value(p, w, nullptr); };
    const auto fd = testsupport::fd_gradient(f, flat);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        CAPTURE(i);
        CHECK(rel_err(grad[i], fd[i], 1e-2) < 1e-4);
    }
}

}  // TEST_SUITE
