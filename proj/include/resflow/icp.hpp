#pragma once

#include <limits>
#include <vector>

#include "resflow/point_cloud.hpp"

namespace resflow {

struct IcpConfig {
    int max_iterations = 50;
    double convergence_tol = 1e-8;  // change of the RMS residual, meters
    double max_correspondence_distance = std::numeric_limits<double>::infinity();
};

struct IcpResult {
    RigidTransform transform;             // maps p1 into p2's frame
    std::vector<double> residual_history; // RMS residual after each iteration
    int iterations = 0;
    bool converged = false;
};

/// Point-to-point ICP: exact nearest-neighbour correspondences alternated
/// with the closed-form least-squares rigid fit (cross-covariance SVD,
/// reflection-corrected). With ungated correspondences the residual history
/// is non-increasing. Throws DegenerateGeometry when the cross-covariance
/// drops below rank 2.
IcpResult icp_register(const PointCloud& p1, const PointCloud& p2,
                       const IcpConfig& config = {});

/// Rigid-only scene flow: ego_motion_flow(p1, icp_register(...)). The
/// non-rigid component is zero by construction.
FlowField icp_flow(const PointCloud& p1, const PointCloud& p2,
                   const IcpConfig& config = {});

/// Least-squares rigid fit mapping src onto dst (paired rows, equal count).
/// Exposed for tests and residual analysis.
RigidTransform fit_rigid(const Points& src, const Points& dst);

}  // namespace resflow
