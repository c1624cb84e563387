#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "resflow/autodiff.hpp"
#include "resflow/flow_model.hpp"
#include "resflow/geometry.hpp"
#include "resflow/nn_index.hpp"
#include "resflow/point_cloud.hpp"

namespace resflow {

struct NetConfig {
    int enc_width = 64;   // shared Siamese point encoder of the pose branch
    int head_width = 128; // pose head FC width (2048 reproduces the large preset)
    int flow_width = 64;  // non-rigid flow network width

    static NetConfig large() { return {64, 2048, 64}; }
};

/// Named parameter groups of the whole pipeline. The pose branch weights are
/// shared between the two Siamese inputs and across all refinement
/// iterations; both facts fall out of there being exactly one tensor per
/// group.
struct NetworkParams {
    uint64_t seed = 0;
    std::vector<std::pair<std::string, ad::Tensor>> groups;

    ad::Tensor& find(const std::string& name);
    const ad::Tensor& find(const std::string& name) const;
    void zero_grads();
    NetConfig config() const;  // derived from stored shapes

    /// Fan-in-scaled uniform init; final output layers start at zero so the
    /// untrained pipeline predicts the identity pose and zero flow.
    static NetworkParams init(const NetConfig& cfg, uint64_t seed);
};

struct RefineConfig {
    int k_train = 1;
    int k_infer = 1;
};

/// Frozen nearest-neighbor matches. Gradient checks perturb parameters with
/// finite differences; pinning the discrete matches keeps the objective
/// piecewise smooth during the check. When frozen, the first computation of
/// each keyed match set is reused on subsequent passes.
struct MatchCache {
    bool frozen = false;
    std::map<std::string, std::vector<int>> slots;

    const std::vector<int>& lookup(const std::string& key,
                                   const std::function<std::vector<int>()>& compute);
};

struct PipelineGraph {
    ad::Tensor p1, p2;          // inputs as graph tensors
    bool has_pose = false;
    ad::Tensor rot;             // 3x3 composed rotation
    ad::Tensor euler;           // 1x3 angles of the composed pose
    ad::Tensor trans;           // 1x3 translation
    ad::Tensor p1_star;         // pose-transformed first cloud
    ad::Tensor flow_nonrigid;   // Nx3
    ad::Tensor flow_ego;        // Nx3
    ad::Tensor flow_total;      // Nx3
    std::vector<RigidTransform> deltas;  // value snapshots of each refinement step
    int k = 1;
    bool ego_motion = true;
};

// ---- graph-side geometry ----
ad::Tensor euler_rotation_node(const ad::Tensor& angles);       // 1x3 -> 3x3
ad::Tensor rotation_euler_node(const ad::Tensor& rot);          // 3x3 -> 1x3 (non-degenerate branch)
ad::Tensor transform_points_node(const ad::Tensor& pts, const ad::Tensor& rot,
                                 const ad::Tensor& trans);      // Nx3, 3x3, 1x3 -> Nx3

// ---- graph builders ----
ad::Tensor pose_forward_node(const ad::Tensor& p1, const ad::Tensor& p2,
                             const NetworkParams& params);      // -> 1x6 [angles, t]

ad::Tensor flow_forward_node(const ad::Tensor& p1_star, const ad::Tensor& p2,
                             const NetworkParams& params, MatchCache* cache,
                             const std::string& cache_key);

/// Full decomposition pipeline on graph tensors. With ego_motion = false the
/// flow network alone predicts total flow from the raw inputs (monolithic
/// ablation) and no pose tensors are produced.
PipelineGraph build_pipeline(const ad::Tensor& p1, const ad::Tensor& p2,
                             const NetworkParams& params, int k, MatchCache* cache,
                             bool ego_motion = true,
                             const std::string& cache_ns = "fwd");

// ---- plain (value) API ----
EulerPose pose_forward(const PointCloud& p1, const PointCloud& p2,
                       const NetworkParams& params);

struct RefineResult {
    RigidTransform pose;
    std::vector<RigidTransform> deltas;
    PointCloud p1_star;
};
RefineResult refine_pose(const PointCloud& p1, const PointCloud& p2,
                         const NetworkParams& params, int k);

FlowField flow_forward(const PointCloud& p1_star, const PointCloud& p2,
                       const NetworkParams& params);

struct Predictions {
    bool has_pose = false;
    EulerPose euler_pose;
    RigidTransform pose;
    FlowField d_nonrigid;
    FlowField d_ego;
    FlowField d_total;
};
Predictions pipeline_forward(const PointCloud& p1, const PointCloud& p2,
                             const NetworkParams& params, const RefineConfig& refine,
                             bool ego_motion = true);

Predictions predictions_from_graph(const PipelineGraph& g);

}  // namespace resflow
