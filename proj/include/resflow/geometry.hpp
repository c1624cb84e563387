#pragma once

#include <Eigen/Core>

#include "resflow/errors.hpp"

namespace resflow {

/// Rigid body transform: x' = R * x + t.
///
/// Absolute camera poses are stored camera-to-world; relative poses map
/// frame-1 camera coordinates into frame-2 camera coordinates.
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
        return rotation * x + translation;
    }

    static RigidTransform identity() { return {}; }
};

/// (a o b)(x) = a(b(x))
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);

/// Frobenius / determinant check against SO(3), tolerance on both.
bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-6);

/// Fixed-axis X-Y-Z Euler parameterization: R = Rz(c) * Ry(b) * Rx(a)
/// for angles (a, b, c) in radians. This convention is pinned project-wide.
struct EulerPose {
    Eigen::Vector3d angles = Eigen::Vector3d::Zero();       // radians
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // meters

    RigidTransform to_transform() const;
    static EulerPose from_transform(const RigidTransform& t);
};

struct CameraIntrinsics {
    double fx = 1000.0;
    double fy = 1000.0;
    double cx = 0.0;
    double cy = 0.0;
};

/// R = Rz(angles.z) * Ry(angles.y) * Rx(angles.x). Total function.
Eigen::Matrix3d euler_to_rotation(const Eigen::Vector3d& angles);

/// Inverse of euler_to_rotation. Angles returned in (-pi, pi]; at gimbal
/// lock (|R(2,0)| = 1) the canonical branch with angle.x = 0 is returned.
/// Throws NonRotationMatrix if r is not orthonormal within 1e-6.
Eigen::Vector3d rotation_to_euler(const Eigen::Matrix3d& r);

/// Relative pose from two camera-to-world poses:
/// (R2^T * R1, R2^T * (t1 - t2)). Maps frame-1 coords to frame-2 coords.
RigidTransform relative_pose(const RigidTransform& pose1,
                             const RigidTransform& pose2);

/// Geodesic rotation distance in degrees:
/// acos(clamp((trace(Rh^T * Rg) - 1) / 2, -1, 1)) * 180 / pi.
double rotation_error_deg(const Eigen::Matrix3d& r_hat,
                          const Eigen::Matrix3d& r_gt);

double translation_error(const Eigen::Vector3d& t_hat,
                         const Eigen::Vector3d& t_gt);

/// Pinhole projection (fx*x/z + cx, fy*y/z + cy).
/// Throws NonPositiveDepth when z <= 1e-9.
Eigen::Vector2d project(const Eigen::Vector3d& point, const CameraIntrinsics& k);

}  // namespace resflow
