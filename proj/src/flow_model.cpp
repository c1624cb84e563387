#include "resflow/flow_model.hpp"

namespace resflow {

FlowField ego_motion_flow(const PointCloud& p, const RigidTransform& t_rel) {
    // Computed as T*x - x so that warp(p, d_em) reproduces transform_cloud
    // to the last ulp.
    FlowField d;
    d.kind = FlowKind::ego_motion;
    d.vec = transform_cloud(p, t_rel).pts - p.pts;
    return d;
}

FlowField compose_total_flow(const FlowField& d_nonrigid, const PointCloud& p,
                             const Eigen::Matrix3d& rot_hat,
                             const Eigen::Vector3d& t_hat) {
    if (d_nonrigid.size() != p.size()) {
        throw DimensionMismatch("compose_total_flow: flow has " +
                                std::to_string(d_nonrigid.size()) + " rows, cloud has " +
                                std::to_string(p.size()));
    }
    FlowField total;
    total.kind = FlowKind::total;
    total.vec = d_nonrigid.vec + ego_motion_flow(p, {rot_hat, t_hat}).vec;
    return total;
}

PointCloud warp(const PointCloud& p, const FlowField& d) {
    if (d.size() != p.size()) {
        throw DimensionMismatch("warp: flow has " + std::to_string(d.size()) +
                                " rows, cloud has " + std::to_string(p.size()));
    }
    return PointCloud(p.pts + d.vec);
}

}  // namespace resflow
