#include "resflow/nn_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace resflow {

namespace {
constexpr int kLeafSize = 16;
}

NeighborIndex::NeighborIndex(const PointCloud& cloud) : pts_(cloud.pts) {
    const int n = static_cast<int>(pts_.rows());
    if (n == 0) {
        throw EmptyCloud("NeighborIndex: reference cloud is empty");
    }
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(static_cast<size_t>(2 * n / kLeafSize + 4));
    nodes_.emplace_back();
    root_ = 0;
    build(root_, 0, n, 0);
}

void NeighborIndex::build(int node, int begin, int end, int depth) {
    if (end - begin <= kLeafSize) {
        nodes_[node].axis = -1;
        nodes_[node].begin = begin;
        nodes_[node].end = end;
        return;
    }

    // Split along the axis with the largest extent over this range.
    Eigen::Vector3d lo = pts_.row(order_[begin]).transpose();
    Eigen::Vector3d hi = lo;
    for (int i = begin + 1; i < end; ++i) {
        lo = lo.cwiseMin(pts_.row(order_[i]).transpose());
        hi = hi.cwiseMax(pts_.row(order_[i]).transpose());
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);

    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         const double ca = pts_(a, axis), cb = pts_(b, axis);
                         return ca < cb || (ca == cb && a < b);
                     });

    auto& nd = nodes_[node];
    nd.axis = axis;
    nd.split = pts_(order_[mid], axis);

    nodes_.emplace_back();
    const int left = static_cast<int>(nodes_.size()) - 1;
    nodes_.emplace_back();
    const int right = static_cast<int>(nodes_.size()) - 1;
    nodes_[node].left = left;
    nodes_[node].right = right;
    build(left, begin, mid, depth + 1);
    build(right, mid, end, depth + 1);
}

void NeighborIndex::search(int node, const Eigen::Vector3d& q, double& best_d2,
                           int& best_idx) const {
    const KdNode& nd = nodes_[node];
    if (nd.axis < 0) {
        for (int i = nd.begin; i < nd.end; ++i) {
            const int idx = order_[i];
            const double d2 = (pts_.row(idx).transpose() - q).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
                best_d2 = d2;
                best_idx = idx;
            }
        }
        return;
    }

    const double delta = q[nd.axis] - nd.split;
    const int near = delta < 0 ? nd.left : nd.right;
    const int far = delta < 0 ? nd.right : nd.left;
    search(near, q, best_d2, best_idx);
    // A tied point with a smaller index may sit exactly on the boundary, so
    // the far side is pruned only on a strict excess.
    if (delta * delta <= best_d2) {
        search(far, q, best_d2, best_idx);
    }
}

NearestResult NeighborIndex::nearest(const Eigen::Vector3d& q) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    int best_idx = std::numeric_limits<int>::max();
    search(root_, q, best_d2, best_idx);
    NearestResult r;
    r.index = best_idx;
    r.point = pts_.row(best_idx).transpose();
    r.distance = std::sqrt(best_d2);
    return r;
}

std::vector<int> NeighborIndex::nearest_indices(const Points& qs) const {
    std::vector<int> out(qs.rows());
    for (Eigen::Index i = 0; i < qs.rows(); ++i) {
        out[static_cast<size_t>(i)] = nearest(qs.row(i).transpose()).index;
    }
    return out;
}

}  // namespace resflow
