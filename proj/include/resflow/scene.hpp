#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "resflow/flow_model.hpp"
#include "resflow/point_cloud.hpp"

namespace resflow {

/// Counts reads of ground-truth fields; lets tests prove that
/// self-supervised training never consumes labels.
struct GtAccess {
    mutable uint64_t total = 0;
    mutable uint64_t nonrigid = 0;
    mutable uint64_t relative = 0;

    uint64_t sum() const { return total + nonrigid + relative; }
};

/// One point-cloud pair with optional ground truth. Invariant when all
/// labels are present: gt_total = gt_nonrigid + ego_motion_flow(p1,
/// gt_relative) within 1e-12 per point.
///
/// Consumers must go through the tracked accessors; the *_field members are
/// raw storage for construction, I/O and augmentation.
struct ScenePair {
    PointCloud p1, p2;
    std::optional<FlowField> gt_total_field;     // kind total, |p1| rows
    std::optional<FlowField> gt_nonrigid_field;  // kind non_rigid
    std::optional<RigidTransform> gt_relative_field;
    std::optional<CameraIntrinsics> intrinsics;
    std::string scene_id;
    double time_delta = 0.1;  // seconds, metadata
    GtAccess access;

    bool has_flow_gt() const { return gt_total_field && gt_nonrigid_field; }
    bool has_pose_gt() const { return gt_relative_field.has_value(); }

    const FlowField& gt_total() const;
    const FlowField& gt_nonrigid() const;
    const RigidTransform& gt_relative() const;
};

/// Non-rigid displacement field: sum of Gaussian radial basis bumps with
/// vector amplitudes, sampled per scene from the ranges below.
struct RbfSpec {
    int count = 2;
    double width_min = 0.6;
    double width_max = 1.4;
    double amplitude = 0.3;  // max displacement magnitude per bump
};

struct SceneGenConfig {
    int n = 512;
    int m = 512;
    double max_rotation_deg = 5.0;  // geodesic angle bound of the camera motion
    double max_translation = 0.3;   // meters
    RbfSpec rbf;
    double noise_sigma = 0.0;  // Gaussian jitter on p2
    double dropout = 0.0;      // fraction of p1 points absent from p2, in [0, 1)
    bool ground_plane = false;
    double ground_height = 0.0;  // y level of the plane (+y is up)
    uint64_t seed = 1;
    double time_delta = 0.1;
};

/// Deterministic per seed: identical config yields a bitwise-identical pair.
ScenePair generate_scene(const SceneGenConfig& config);

/// Keeps points with up-coordinate (+y) >= height. The returned indices map
/// the filtered rows back into the original cloud so per-point ground truth
/// can be filtered consistently. Throws EmptyResult when nothing survives.
std::pair<PointCloud, std::vector<int>> remove_ground(const PointCloud& p, double height);

/// Ground removal applied to a whole sample: filters p1 (with its per-point
/// ground truth) and p2 independently.
ScenePair remove_ground_scene(const ScenePair& sample, double height);

/// Rigid-only augmentation: p1' = G p1, p2' = G p2, T' = G o T o G^-1,
/// flows rotate by R_G. Scaling is deliberately not offered.
ScenePair augment_pair(const ScenePair& sample, const RigidTransform& g);

// Scene file format (text, UTF-8, LF), byte-exact round trip:
//   RFSP 1
//   n <n> m <m> delta <delta>
//   pose <12 reals: R row-major, t>     (or "pose none" when unlabeled)
//   intrinsics fx fy cx cy              (optional line)
//   n lines: p1 x y z dtx dty dtz dnx dny dnz   (or "p1 x y z" unlabeled)
//   m lines: p2 x y z
// Reals carry 17 significant digits for exact f64 round trips.
void write_scene(const std::filesystem::path& path, const ScenePair& sample);
ScenePair read_scene(const std::filesystem::path& path);

/// Copy without any ground-truth fields (writes the unlabeled variant).
ScenePair strip_labels(const ScenePair& sample);

/// All *.rfsp files in a directory, sorted by filename.
std::vector<ScenePair> load_scene_dir(const std::filesystem::path& dir);

}  // namespace resflow
