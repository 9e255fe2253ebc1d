#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "patchsurf/core.hpp"
#include "patchsurf/neighbors.hpp"

using namespace patchsurf;
using neighbors::KdIndex;

namespace {

std::vector<Vec3> random_cloud(Rng& rng, int n, double scale = 1.0) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        pts.push_back({scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1),
                       scale * rng.uniform(-1, 1)});
    }
    return pts;
}

}  // namespace

TEST_SUITE("neighbors") {

TEST_CASE("an empty cloud is rejected") {
    CHECK_THROWS_AS(KdIndex(std::vector<Vec3>{}), std::invalid_argument);
}

TEST_CASE("a single point always wins") {
    const KdIndex idx({{1.0, 2.0, 3.0}});
    const auto hit = idx.nearest({-5, 0, 10});
    CHECK(hit.index == 0);
    CHECK(hit.squared_distance == squared_distance({1, 2, 3}, {-5, 0, 10}));
}

TEST_CASE("self-queries return distance zero") {
    Rng rng(11);
    const auto pts = random_cloud(rng, 200);
    const KdIndex idx(pts);
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
        const auto hit = idx.nearest(pts[i]);
        CHECK(hit.squared_distance == 0.0);
        CHECK(hit.index == i);
    }
}

TEST_CASE("basic nearest example") {
    const KdIndex idx({{1, 0, 0}, {0, 2, 0}});
    const auto hit = idx.nearest({0, 0, 0});
    CHECK(hit.index == 0);
    CHECK(hit.squared_distance == 1.0);
}

TEST_CASE("equidistant candidates resolve to the lowest index") {
    const KdIndex idx({{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}});
    const auto hit = idx.nearest({0, 0, 0});
    CHECK(hit.squared_distance == 1.0);
    CHECK(hit.index == 0);
}

TEST_CASE("tree queries equal brute force bit for bit") {
    Rng rng(2222);
    const auto pts = random_cloud(rng, 500);
    const KdIndex idx(pts);
    for (int trial = 0; trial < 500; ++trial) {
        const Vec3 q{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};
        const auto kd = idx.nearest(q);
        const auto bf = neighbors::brute_force_nearest(pts, q);
        CHECK(kd.index == bf.index);
        CHECK(kd.squared_distance == bf.squared_distance);
    }
}

TEST_CASE("exactness across many random instance sizes") {
    Rng rng(3333);
    for (int instance = 0; instance < 100; ++instance) {
        const int n = 1 + static_cast<int>(rng.uniform() * 499);
        const auto pts = random_cloud(rng, n);
        const KdIndex idx(pts);
        for (int trial = 0; trial < 10; ++trial) {
            const Vec3 q{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
            const auto kd = idx.nearest(q);
            const auto bf = neighbors::brute_force_nearest(pts, q);
            CHECK(kd.index == bf.index);
            CHECK(kd.squared_distance == bf.squared_distance);
        }
    }
}

TEST_CASE("count_within counts an exact coincidence at radius zero") {
    const KdIndex idx({{1, 1, 1}, {2, 2, 2}});
    CHECK(idx.count_within({1, 1, 1}, 0.0) == 1);
    CHECK(idx.count_within({1.5, 1.5, 1.5}, 0.0) == 0);
}

TEST_CASE("count_within with a huge radius counts everything") {
    Rng rng(44);
    const auto pts = random_cloud(rng, 333);
    const KdIndex idx(pts);
    CHECK(idx.count_within({0, 0, 0}, 1e9) == pts.size());
}

TEST_CASE("count_within and collect_within match brute force") {
    Rng rng(55);
    const auto pts = random_cloud(rng, 400);
    const KdIndex idx(pts);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double r = rng.uniform(0.0, 1.0);
        CHECK(idx.count_within(q, r) == neighbors::brute_force_count_within(pts, q, r));
        const auto collected = idx.collect_within(q, r);
        CHECK(collected.size() == idx.count_within(q, r));
        for (const auto i : collected) {
            CHECK(squared_distance(pts[i], q) <= r * r);
        }
    }
}

TEST_CASE("identical builds answer identically") {
    Rng rng(66);
    const auto pts = random_cloud(rng, 257);
    const KdIndex a(pts), b(pts);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto ha = a.nearest(q), hb = b.nearest(q);
        CHECK(ha.index == hb.index);
        CHECK(ha.squared_distance == hb.squared_distance);
    }
}

TEST_CASE("clustered duplicates are handled") {
    std::vector<Vec3> pts(100, Vec3{0.5, 0.5, 0.5});
    for (int i = 0; i < 30; ++i) pts.push_back({1.0 + i * 0.01, 0, 0});
    const KdIndex idx(pts);
    const auto hit = idx.nearest({0.5, 0.5, 0.5});
    CHECK(hit.index == 0);  // ties break to the lowest index
    CHECK(hit.squared_distance == 0.0);
    CHECK(idx.count_within({0.5, 0.5, 0.5}, 0.0) == 100);
}

}  // TEST_SUITE
