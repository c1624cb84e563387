#include "resflow/geometry.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace resflow {

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

RigidTransform inverse(const RigidTransform& t) {
    RigidTransform out;
    out.rotation = t.rotation.transpose();
    out.translation = -(t.rotation.transpose() * t.translation);
    return out;
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
    const Eigen::Matrix3d gram = r.transpose() * r;
    const double ortho = (gram - Eigen::Matrix3d::Identity()).norm();
    return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

RigidTransform EulerPose::to_transform() const {
    return {euler_to_rotation(angles), translation};
}

EulerPose EulerPose::from_transform(const RigidTransform& t) {
    return {rotation_to_euler(t.rotation), t.translation};
}

Eigen::Matrix3d euler_to_rotation(const Eigen::Vector3d& angles) {
    const double ca = std::cos(angles.x()), sa = std::sin(angles.x());
    const double cb = std::cos(angles.y()), sb = std::sin(angles.y());
    const double cc = std::cos(angles.z()), sc = std::sin(angles.z());

    Eigen::Matrix3d rx, ry, rz;
    rx << 1, 0, 0,
          0, ca, -sa,
          0, sa, ca;
    ry << cb, 0, sb,
          0, 1, 0,
          -sb, 0, cb;
    rz << cc, -sc, 0,
          sc, cc, 0,
          0, 0, 1;
    return (rz * ry) * rx;
}

namespace {

// atan2 lands in [-pi, pi]; the stored range is (-pi, pi].
double canonical_angle(double a) {
    if (a == -M_PI) return M_PI;
    return a;
}

}  // namespace

Eigen::Vector3d rotation_to_euler(const Eigen::Matrix3d& r) {
    if (!is_rotation(r, 1e-6)) {
        throw NonRotationMatrix("rotation_to_euler: input is not a rotation matrix");
    }

    const double sb = -r(2, 0);
    Eigen::Vector3d angles;
    if (std::abs(sb) >= 1.0 - 1e-12) {
        // Gimbal lock: pitch at +-pi/2, roll pinned to zero. With a = 0 the
        // remaining yaw satisfies R(0,1) = -sin(c), R(1,1) = cos(c) on both
        // branches.
        angles.x() = 0.0;
        angles.y() = sb > 0 ? M_PI / 2 : -M_PI / 2;
        angles.z() = canonical_angle(std::atan2(-r(0, 1), r(1, 1)));
    } else {
        angles.x() = canonical_angle(std::atan2(r(2, 1), r(2, 2)));
        angles.y() = std::asin(std::clamp(sb, -1.0, 1.0));
        angles.z() = canonical_angle(std::atan2(r(1, 0), r(0, 0)));
    }
    return angles;
}

RigidTransform relative_pose(const RigidTransform& pose1,
                             const RigidTransform& pose2) {
    RigidTransform rel;
    rel.rotation = pose2.rotation.transpose() * pose1.rotation;
    rel.translation = pose2.rotation.transpose() * (pose1.translation - pose2.translation);
    return rel;
}

double rotation_error_deg(const Eigen::Matrix3d& r_hat,
                          const Eigen::Matrix3d& r_gt) {
    const double tr = (r_hat.transpose() * r_gt).trace();
    const double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c) * 180.0 / M_PI;
}

double translation_error(const Eigen::Vector3d& t_hat,
                         const Eigen::Vector3d& t_gt) {
    return (t_hat - t_gt).norm();
}

Eigen::Vector2d project(const Eigen::Vector3d& point, const CameraIntrinsics& k) {
    if (point.z() <= 1e-9) {
        throw NonPositiveDepth("project: point depth must be positive, got z=" +
                               std::to_string(point.z()));
    }
    return {k.fx * point.x() / point.z() + k.cx,
            k.fy * point.y() / point.z() + k.cy};
}

}  // namespace resflow
