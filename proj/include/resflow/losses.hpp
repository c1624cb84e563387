#pragma once

#include <functional>
#include <optional>

#include "resflow/network.hpp"
#include "resflow/nn_index.hpp"
#include "resflow/point_cloud.hpp"
#include "resflow/scene.hpp"

namespace resflow {

struct LossWeights {
    double w_epe3d = 1.0;
    double w_nr = 1.0;
    double w_r = 1.0;
    double w_rot = 10.0;
    double w_fb = 1.0;
    double w_nn = 1.0;

    static LossWeights full() { return {1, 1, 1, 10, 0, 0}; }
    static LossWeights hybrid() { return {1, 1, 1, 10, 1, 1}; }
    static LossWeights self_supervised() { return {0, 0, 0, 10, 1, 1}; }
};

// ---- plain evaluators ----

/// Mean end-point error (1/n) sum ||d_i - dhat_i||. Both fields must carry
/// kind total.
double epe3d_loss(const FlowField& d_hat, const FlowField& d_gt);

/// Same formula over non-rigid fields.
double nonrigid_loss(const FlowField& d_nr_hat, const FlowField& d_nr_gt);

/// w_rot * ||r - rhat|| + ||t - that|| on Euler triples (project
/// convention) and translations. One pose per sample.
double rigid_loss(const Eigen::Vector3d& r_hat, const Eigen::Vector3d& t_hat,
                  const Eigen::Vector3d& r_gt, const Eigen::Vector3d& t_gt,
                  double w_rot);

/// Forward-backward cycle intermediates. Invariants: anchor is exactly the
/// midpoint of forward_warp and nn_match; cycle_end = anchor + reverse_flow.
struct CycleArtifacts {
    Points forward_warp;  // x~2 = x1 + dhat
    Points nn_match;      // exact NN of x~2 in p2
    Points anchor;        // x2* = (x~2 + x_nn) / 2
    Points reverse_flow;  // d~ predicted from the anchored cloud back to p1
    Points cycle_end;     // x~1 = x2* + d~
};

/// Produces total reverse flow for (anchored cloud, original cloud).
using ReversePredictor =
    std::function<FlowField(const PointCloud& anchored, const PointCloud& original)>;

CycleArtifacts cycle_artifacts(const PointCloud& p1, const PointCloud& p2,
                               const FlowField& d_hat_forward,
                               const ReversePredictor& reverse);

/// (1/|p1|) sum ||x1 - x~1||.
double fb_loss(const PointCloud& p1, const CycleArtifacts& artifacts);

/// (1/|p1|) sum ||x~2 - x_nn|| with exact nearest neighbours in p2.
double nn_loss(const PointCloud& p1, const FlowField& d_hat, const PointCloud& p2);

struct PredictionBundle {
    Predictions preds;
    std::optional<CycleArtifacts> cycle;
};

/// Weighted sum w_epe3d L_epe3d + w_nr L_nr + w_r L_r + w_fb L_fb + w_nn L_nn.
/// Terms with zero weight are not evaluated. Throws MissingGroundTruth when a
/// positively weighted supervised term lacks its label.
double total_loss(const ScenePair& sample, const PredictionBundle& bundle,
                  const LossWeights& weights);

// ---- graph nodes ----

ad::Tensor epe3d_loss_node(const ad::Tensor& d_hat, const Points& d_gt);
ad::Tensor nonrigid_loss_node(const ad::Tensor& d_nr_hat, const Points& d_nr_gt);
ad::Tensor rigid_loss_node(const ad::Tensor& euler_hat, const ad::Tensor& t_hat,
                           const Eigen::Vector3d& r_gt, const Eigen::Vector3d& t_gt,
                           double w_rot);

struct CycleGraph {
    ad::Tensor forward_warp;
    ad::Tensor nn_match;
    ad::Tensor anchor;
    ad::Tensor reverse_flow;
    ad::Tensor cycle_end;
};

/// Builds reverse total flow from the anchored cloud tensor; gradients flow
/// through the anchor into the forward prediction.
using ReverseFlowNode = std::function<ad::Tensor(const ad::Tensor& anchored)>;

CycleGraph build_cycle_graph(const ad::Tensor& p1, const ad::Tensor& p2,
                             const ad::Tensor& d_hat, const ReverseFlowNode& reverse,
                             MatchCache* cache, const std::string& cache_key);

ad::Tensor fb_loss_node(const ad::Tensor& p1, const CycleGraph& cycle);
ad::Tensor nn_loss_node(const CycleGraph& cycle);

/// Per-term tensors of the weighted objective; invalid tensors mark terms
/// that were not built (zero weight).
struct LossGraph {
    ad::Tensor total;
    ad::Tensor epe3d, nonrigid, rigid, fb, nn;
};

/// Assembles the training objective on top of a built pipeline. The reverse
/// flow for the cycle terms reruns the same pipeline (swapped inputs,
/// matching k and ego setting). Ground truth is pulled through the sample's
/// tracked accessors only for positively weighted supervised terms.
LossGraph build_total_loss(const ScenePair& sample, const PipelineGraph& pipeline,
                           const NetworkParams& params, const LossWeights& weights,
                           MatchCache* cache);

}  // namespace resflow
