#pragma once

#include <vector>

#include "resflow/point_cloud.hpp"

namespace resflow {

struct NearestResult {
    Eigen::Vector3d point;
    int index = -1;       // index into the original cloud
    double distance = 0;  // meters
};

/// Exact nearest-neighbor index over an immutable snapshot of a cloud.
///
/// Results are identical to an exhaustive scan, including the tie-break:
/// among equidistant points the smallest original index wins. Queries are
/// const and safe to run concurrently.
class NeighborIndex {
public:
    /// Throws EmptyCloud for an empty input.
    explicit NeighborIndex(const PointCloud& cloud);

    NearestResult nearest(const Eigen::Vector3d& q) const;

    /// Nearest reference index for every row of qs.
    std::vector<int> nearest_indices(const Points& qs) const;

    Eigen::Index size() const { return pts_.rows(); }
    const Points& points() const { return pts_; }

private:
    struct KdNode {
        int axis = -1;       // -1 marks a leaf
        double split = 0;
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into order_
    };

    void build(int node, int begin, int end, int depth);
    void search(int node, const Eigen::Vector3d& q, double& best_d2, int& best_idx) const;

    Points pts_;                 // snapshot, original order
    std::vector<int> order_;     // permutation used by the tree
    std::vector<KdNode> nodes_;
    int root_ = -1;
};

inline NeighborIndex build_index(const PointCloud& cloud) {
    return NeighborIndex(cloud);
}

}  // namespace resflow
