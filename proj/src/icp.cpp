#include "resflow/icp.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "resflow/flow_model.hpp"
#include "resflow/nn_index.hpp"

namespace resflow {

RigidTransform fit_rigid(const Points& src, const Points& dst) {
    if (src.rows() != dst.rows() || src.rows() < 3) {
        throw DimensionMismatch("fit_rigid: need >= 3 paired points");
    }
    const Eigen::RowVector3d c_src = src.colwise().mean();
    const Eigen::RowVector3d c_dst = dst.colwise().mean();
    const Points src_c = src.rowwise() - c_src;
    const Points dst_c = dst.rowwise() - c_dst;

    const Eigen::Matrix3d h = dst_c.transpose() * src_c;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sing = svd.singularValues();
    if (sing(1) <= 1e-12 * std::max(sing(0), 1e-300)) {
        throw DegenerateGeometry("fit_rigid: cross-covariance is rank deficient");
    }

    Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d v = svd.matrixV();
    Eigen::Matrix3d r = u * v.transpose();
    if (r.determinant() < 0) {
        // Reflection case: flip the axis of the smallest singular value.
        u.col(2) *= -1.0;
        r = u * v.transpose();
    }
    RigidTransform t;
    t.rotation = r;
    t.translation = c_dst.transpose() - r * c_src.transpose();
    return t;
}

IcpResult icp_register(const PointCloud& p1, const PointCloud& p2,
                       const IcpConfig& config) {
    if (p1.size() < 3 || p2.size() < 3) {
        throw DegenerateGeometry("icp_register: need >= 3 points per cloud");
    }
    if (config.max_iterations < 1 || config.convergence_tol <= 0 ||
        config.max_correspondence_distance <= 0) {
        throw InvalidConfig("icp_register: non-positive configuration value");
    }

    const NeighborIndex index(p2);
    IcpResult result;
    RigidTransform current;

    double prev_rms = std::numeric_limits<double>::infinity();
    for (int it = 0; it < config.max_iterations; ++it) {
        const PointCloud moved = transform_cloud(p1, current);

        // Gated correspondences.
        std::vector<Eigen::Index> rows;
        Points dst(p1.size(), 3);
        rows.reserve(static_cast<size_t>(p1.size()));
        for (Eigen::Index i = 0; i < moved.size(); ++i) {
            const NearestResult nn = index.nearest(moved.point(i));
            if (nn.distance <= config.max_correspondence_distance) {
                dst.row(static_cast<Eigen::Index>(rows.size())) = nn.point.transpose();
                rows.push_back(i);
            }
        }
        if (rows.size() < 3) {
            throw DegenerateGeometry("icp_register: fewer than 3 gated correspondences");
        }
        Points src(static_cast<Eigen::Index>(rows.size()), 3);
        for (size_t i = 0; i < rows.size(); ++i) {
            src.row(static_cast<Eigen::Index>(i)) = p1.pts.row(rows[i]);
        }
        dst.conservativeResize(static_cast<Eigen::Index>(rows.size()), 3);

        current = fit_rigid(src, dst);

        const Points fitted = (src * current.rotation.transpose()).rowwise() +
                              current.translation.transpose();
        const double rms = std::sqrt((fitted - dst).rowwise().squaredNorm().mean());
        result.residual_history.push_back(rms);
        result.iterations = it + 1;

        if (rms < config.convergence_tol ||
            std::abs(prev_rms - rms) < config.convergence_tol) {
            result.converged = true;
            break;
        }
        prev_rms = rms;
    }

    result.transform = current;
    return result;
}

FlowField icp_flow(const PointCloud& p1, const PointCloud& p2, const IcpConfig& config) {
    FlowField flow = ego_motion_flow(p1, icp_register(p1, p2, config).transform);
    flow.kind = FlowKind::total;
    return flow;
}

}  // namespace resflow
