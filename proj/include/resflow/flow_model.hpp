#pragma once

#include "resflow/point_cloud.hpp"

namespace resflow {

/// Flow induced purely by camera motion: d_em = (R - I) x + t per point.
FlowField ego_motion_flow(const PointCloud& p, const RigidTransform& t_rel);

/// Total flow composition d = d_nr + (R - I) x + t.
FlowField compose_total_flow(const FlowField& d_nonrigid, const PointCloud& p,
                             const Eigen::Matrix3d& rot_hat,
                             const Eigen::Vector3d& t_hat);

/// Element-wise displacement of a cloud by a flow field.
PointCloud warp(const PointCloud& p, const FlowField& d);

}  // namespace resflow
