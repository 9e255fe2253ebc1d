#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "patchsurf/core.hpp"

namespace patchsurf::neighbors {

struct Hit {
    std::uint32_t index = 0;
    double squared_distance = 0.0;
};

/// Exact nearest point by linear scan; the reference the tree is tested
/// against. Ties break toward the lowest index.
Hit brute_force_nearest(std::span<const Vec3> points, const Vec3& q);
std::size_t brute_force_count_within(std::span<const Vec3> points, const Vec3& q, double radius);

/// Balanced 3D k-d tree over an immutable point list. Median split on the
/// widest axis, leaf size 16. Queries are exact and match the brute-force
/// reference bit for bit; equal distances resolve to the lowest point index.
/// Immutable after construction, safe for concurrent queries.
class KdIndex {
public:
    static constexpr int kLeafSize = 16;

    /// Throws std::invalid_argument on an empty cloud.
    explicit KdIndex(std::vector<Vec3> points);

    Hit nearest(const Vec3& q) const;
    /// Number of indexed points with distance <= radius from q.
    std::size_t count_within(const Vec3& q, double radius) const;
    /// Indices of points with distance <= radius, ascending.
    std::vector<std::uint32_t> collect_within(const Vec3& q, double radius) const;

    std::size_t size() const { return pts_.size(); }
    const std::vector<Vec3>& points() const { return pts_; }

private:
    struct Node {
        std::uint32_t begin = 0, end = 0;   // [begin, end) into order_
        std::uint32_t left = 0, right = 0;  // leaf when left == 0
        int axis = 0;
        double split = 0.0;
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end);
    void search(std::uint32_t node, const Vec3& q, Hit& best) const;

    std::vector<Vec3> pts_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

}  // namespace patchsurf::neighbors
