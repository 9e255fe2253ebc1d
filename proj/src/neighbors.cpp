#include "patchsurf/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace patchsurf::neighbors {

Hit brute_force_nearest(std::span<const Vec3> points, const Vec3& q) {
    Hit best{0, std::numeric_limits<double>::infinity()};
    for (std::uint32_t i = 0; i < points.size(); ++i) {
        const double d2 = squared_distance(points[i], q);
        if (d2 < best.squared_distance) best = {i, d2};
    }
    return best;
}

std::size_t brute_force_count_within(std::span<const Vec3> points, const Vec3& q, double radius) {
    const double r2 = radius * radius;
    std::size_t count = 0;
    for (const auto& p : points) {
        if (squared_distance(p, q) <= r2) ++count;
    }
    return count;
}

namespace {
inline double axis_coord(const Vec3& p, int axis) {
    return axis == 0 ? p.x : axis == 1 ? p.y : p.z;
}
}  // namespace

KdIndex::KdIndex(std::vector<Vec3> points) : pts_(std::move(points)) {
    if (pts_.empty()) throw std::invalid_argument("KdIndex: empty point cloud");
    order_.resize(pts_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * pts_.size() / kLeafSize + 4);
    build(0, static_cast<std::uint32_t>(pts_.size()));
}

std::uint32_t KdIndex::build(std::uint32_t begin, std::uint32_t end) {
    const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end, 0, 0, 0, 0.0});
    if (end - begin <= kLeafSize) return id;

    Vec3 lo = pts_[order_[begin]], hi = lo;
    for (std::uint32_t i = begin + 1; i < end; ++i) {
        const Vec3& p = pts_[order_[i]];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const Vec3 ext = hi - lo;
    int axis = 0;
    if (ext.y > axis_coord(ext, axis)) axis = 1;
    if (ext.z > axis_coord(ext, axis)) axis = 2;

    const std::uint32_t mid = begin + (end - begin) / 2;
    // Tie-break on the point index so the median choice is deterministic.
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double ca = axis_coord(pts_[a], axis);
                         const double cb = axis_coord(pts_[b], axis);
                         return ca < cb || (ca == cb && a < b);
                     });
    const double split = axis_coord(pts_[order_[mid]], axis);

    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    return id;
}

Hit KdIndex::nearest(const Vec3& q) const {
    Hit best{0, std::numeric_limits<double>::infinity()};
    search(0, q, best);
    return best;
}

void KdIndex::search(std::uint32_t node, const Vec3& q, Hit& best) const {
    const Node& nd = nodes_[node];
    if (nd.left == 0) {
        for (std::uint32_t i = nd.begin; i < nd.end; ++i) {
            const std::uint32_t idx = order_[i];
            const double d2 = squared_distance(pts_[idx], q);
            if (d2 < best.squared_distance ||
                (d2 == best.squared_distance && idx < best.index)) {
                best = {idx, d2};
            }
        }
        return;
    }
    const double diff = axis_coord(q, nd.axis) - nd.split;
    const std::uint32_t near_child = diff < 0.0 ? nd.left : nd.right;
    const std::uint32_t far_child = diff < 0.0 ? nd.right : nd.left;
    search(near_child, q, best);
    // <= so an equal-distance, lower-index point across the plane is found.
    if (diff * diff <= best.squared_distance) search(far_child, q, best);
}

std::size_t KdIndex::count_within(const Vec3& q, double radius) const {
    if (radius < 0.0) throw std::invalid_argument("count_within: radius must be >= 0");
    const double r2 = radius * radius;
    std::size_t count = 0;
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
        const Node& nd = nodes_[stack.back()];
        stack.pop_back();
        if (nd.left == 0) {
            for (std::uint32_t i = nd.begin; i < nd.end; ++i) {
                if (squared_distance(pts_[order_[i]], q) <= r2) ++count;
            }
            continue;
        }
        const double diff = axis_coord(q, nd.axis) - nd.split;
        if (diff <= radius) stack.push_back(nd.left);    // left: coords <= split
        if (-diff <= radius) stack.push_back(nd.right);  // right: coords >= split
    }
    return count;
}

std::vector<std::uint32_t> KdIndex::collect_within(const Vec3& q, double radius) const {
    if (radius < 0.0) throw std::invalid_argument("collect_within: radius must be >= 0");
    const double r2 = radius * radius;
    std::vector<std::uint32_t> out;
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
        const Node& nd = nodes_[stack.back()];
        stack.pop_back();
        if (nd.left == 0) {
            for (std::uint32_t i = nd.begin; i < nd.end; ++i) {
                if (squared_distance(pts_[order_[i]], q) <= r2) out.push_back(order_[i]);
            }
            continue;
        }
        const double diff = axis_coord(q, nd.axis) - nd.split;
        if (diff <= radius) stack.push_back(nd.left);
        if (-diff <= radius) stack.push_back(nd.right);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace patchsurf::neighbors
