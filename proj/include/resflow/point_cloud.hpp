#pragma once

#include <Eigen/Core>

#include "resflow/errors.hpp"
#include "resflow/geometry.hpp"

namespace resflow {

/// N x 3 row-per-point storage shared by clouds and flow fields.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct PointCloud {
    Points pts;  // camera frame, meters

    PointCloud() = default;
    explicit PointCloud(Points p) : pts(std::move(p)) {}

    Eigen::Index size() const { return pts.rows(); }
    Eigen::Vector3d point(Eigen::Index i) const { return pts.row(i).transpose(); }
};

enum class FlowKind { total, non_rigid, ego_motion };

/// Per-point displacement field annotating a cloud of the same size. The
/// kind tag keeps total and non-rigid fields from being mixed up in loss
/// calls; the two loss formulas are otherwise identical.
struct FlowField {
    Points vec;  // meters
    FlowKind kind = FlowKind::total;

    FlowField() = default;
    FlowField(Points v, FlowKind k) : vec(std::move(v)), kind(k) {}

    Eigen::Index size() const { return vec.rows(); }
};

inline PointCloud transform_cloud(const PointCloud& p, const RigidTransform& t) {
    PointCloud out;
    out.pts = (p.pts * t.rotation.transpose()).rowwise() + t.translation.transpose();
    return out;
}

}  // namespace resflow
