#include "resflow/losses.hpp"

#include <string>

namespace resflow {

namespace {

void check_rows(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) {
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a) +
                                " vs " + std::to_string(b) + " rows");
    }
    if (a < 1) {
        throw DimensionMismatch(std::string(what) + ": empty input");
    }
}

double mean_row_norm(const Points& diff) {
    return diff.rowwise().norm().mean();
}

}  // namespace

double epe3d_loss(const FlowField& d_hat, const FlowField& d_gt) {
    check_rows(d_hat.size(), d_gt.size(), "epe3d_loss");
    return mean_row_norm(d_gt.vec - d_hat.vec);
}

double nonrigid_loss(const FlowField& d_nr_hat, const FlowField& d_nr_gt) {
    check_rows(d_nr_hat.size(), d_nr_gt.size(), "nonrigid_loss");
    return mean_row_norm(d_nr_gt.vec - d_nr_hat.vec);
}

double rigid_loss(const Eigen::Vector3d& r_hat, const Eigen::Vector3d& t_hat,
                  const Eigen::Vector3d& r_gt, const Eigen::Vector3d& t_gt,
                  double w_rot) {
    return w_rot * (r_gt - r_hat).norm() + (t_gt - t_hat).norm();
}

CycleArtifacts cycle_artifacts(const PointCloud& p1, const PointCloud& p2,
                               const FlowField& d_hat_forward,
                               const ReversePredictor& reverse) {
    check_rows(p1.size(), d_hat_forward.size(), "cycle_artifacts");
    CycleArtifacts a;
    a.forward_warp = p1.pts + d_hat_forward.vec;

    NeighborIndex index(p2);
    a.nn_match.resize(p1.size(), 3);
    for (Eigen::Index i = 0; i < p1.size(); ++i) {
        a.nn_match.row(i) = index.nearest(a.forward_warp.row(i).transpose()).point.transpose();
    }
    a.anchor = (a.forward_warp + a.nn_match) / 2.0;

    const FlowField rev = reverse(PointCloud(a.anchor), p1);
    check_rows(rev.size(), p1.size(), "cycle_artifacts reverse flow");
    a.reverse_flow = rev.vec;
    a.cycle_end = a.anchor + a.reverse_flow;
    return a;
}

double fb_loss(const PointCloud& p1, const CycleArtifacts& artifacts) {
    check_rows(p1.size(), artifacts.cycle_end.rows(), "fb_loss");
    return mean_row_norm(p1.pts - artifacts.cycle_end);
}

double nn_loss(const PointCloud& p1, const FlowField& d_hat, const PointCloud& p2) {
    check_rows(p1.size(), d_hat.size(), "nn_loss");
    const Points warped = p1.pts + d_hat.vec;
    NeighborIndex index(p2);
    double sum = 0;
    for (Eigen::Index i = 0; i < p1.size(); ++i) {
        sum += index.nearest(warped.row(i).transpose()).distance;
    }
    return sum / static_cast<double>(p1.size());
}

double total_loss(const ScenePair& sample, const PredictionBundle& bundle,
                  const LossWeights& weights) {
    double loss = 0;
    if (weights.w_epe3d > 0) {
        loss += weights.w_epe3d * epe3d_loss(bundle.preds.d_total, sample.gt_total());
    }
    if (weights.w_nr > 0) {
        if (!bundle.preds.has_pose) {
            throw DimensionMismatch("total_loss: non-rigid term requires a decomposed prediction");
        }
        loss += weights.w_nr * nonrigid_loss(bundle.preds.d_nonrigid, sample.gt_nonrigid());
    }
    if (weights.w_r > 0) {
        if (!bundle.preds.has_pose) {
            throw DimensionMismatch("total_loss: rigid term requires a decomposed prediction");
        }
        const RigidTransform& gt = sample.gt_relative();
        loss += weights.w_r * rigid_loss(bundle.preds.euler_pose.angles,
                                         bundle.preds.euler_pose.translation,
                                         rotation_to_euler(gt.rotation), gt.translation,
                                         weights.w_rot);
    }
    if (weights.w_fb > 0) {
        if (!bundle.cycle) {
            throw DimensionMismatch("total_loss: cycle artifacts missing for fb term");
        }
        loss += weights.w_fb * fb_loss(sample.p1, *bundle.cycle);
    }
    if (weights.w_nn > 0) {
        loss += weights.w_nn * nn_loss(sample.p1, bundle.preds.d_total, sample.p2);
    }
    return loss;
}

// ---------------------------------------------------------------------------
// graph nodes

ad::Tensor epe3d_loss_node(const ad::Tensor& d_hat, const Points& d_gt) {
    if (d_hat.rows() != d_gt.rows()) {
        throw DimensionMismatch("epe3d_loss_node: row mismatch");
    }
    ad::Tensor gt = ad::Tensor::constant(d_gt);
    return ad::mean_all(ad::rowwise_l2norm(ad::sub(gt, d_hat)));
}

ad::Tensor nonrigid_loss_node(const ad::Tensor& d_nr_hat, const Points& d_nr_gt) {
    return epe3d_loss_node(d_nr_hat, d_nr_gt);
}

ad::Tensor rigid_loss_node(const ad::Tensor& euler_hat, const ad::Tensor& t_hat,
                           const Eigen::Vector3d& r_gt, const Eigen::Vector3d& t_gt,
                           double w_rot) {
    ad::Tensor rg = ad::Tensor::constant(r_gt.transpose());
    ad::Tensor tg = ad::Tensor::constant(t_gt.transpose());
    ad::Tensor rot_term = ad::rowwise_l2norm(ad::sub(rg, euler_hat));
    ad::Tensor t_term = ad::rowwise_l2norm(ad::sub(tg, t_hat));
    return ad::add(ad::scale(rot_term, w_rot), t_term);
}

CycleGraph build_cycle_graph(const ad::Tensor& p1, const ad::Tensor& p2,
                             const ad::Tensor& d_hat, const ReverseFlowNode& reverse,
                             MatchCache* cache, const std::string& cache_key) {
    CycleGraph g;
    g.forward_warp = ad::add(p1, d_hat);

    auto compute_matches = [&] {
        NeighborIndex index(PointCloud(p2.value()));
        return index.nearest_indices(g.forward_warp.value());
    };
    std::vector<int> local;
    const std::vector<int>* matches;
    if (cache) {
        matches = &cache->lookup(cache_key, compute_matches);
    } else {
        local = compute_matches();
        matches = &local;
    }

    // The matched neighbour is a gathered constant; gradients reach the
    // anchor only through the warped point.
    g.nn_match = ad::gather_rows(p2, *matches);
    g.anchor = ad::scale(ad::add(g.forward_warp, g.nn_match), 0.5);
    g.reverse_flow = reverse(g.anchor);
    if (g.reverse_flow.valid()) {
        g.cycle_end = ad::add(g.anchor, g.reverse_flow);
    }
    return g;
}

ad::Tensor fb_loss_node(const ad::Tensor& p1, const CycleGraph& cycle) {
    return ad::mean_all(ad::rowwise_l2norm(ad::sub(p1, cycle.cycle_end)));
}

ad::Tensor nn_loss_node(const CycleGraph& cycle) {
    return ad::mean_all(ad::rowwise_l2norm(ad::sub(cycle.forward_warp, cycle.nn_match)));
}

LossGraph build_total_loss(const ScenePair& sample, const PipelineGraph& pipeline,
                           const NetworkParams& params, const LossWeights& weights,
                           MatchCache* cache) {
    LossGraph g;
    std::vector<ad::Tensor> terms;

    if (weights.w_epe3d > 0) {
        g.epe3d = epe3d_loss_node(pipeline.flow_total, sample.gt_total().vec);
        terms.push_back(ad::scale(g.epe3d, weights.w_epe3d));
    }
    if (weights.w_nr > 0) {
        if (!pipeline.has_pose) {
            throw DimensionMismatch("build_total_loss: non-rigid term needs the decomposed pipeline");
        }
        g.nonrigid = nonrigid_loss_node(pipeline.flow_nonrigid, sample.gt_nonrigid().vec);
        terms.push_back(ad::scale(g.nonrigid, weights.w_nr));
    }
    if (weights.w_r > 0) {
        if (!pipeline.has_pose) {
            throw DimensionMismatch("build_total_loss: rigid term needs the decomposed pipeline");
        }
        const RigidTransform& gt = sample.gt_relative();
        g.rigid = rigid_loss_node(pipeline.euler, pipeline.trans,
                                  rotation_to_euler(gt.rotation), gt.translation,
                                  weights.w_rot);
        terms.push_back(ad::scale(g.rigid, weights.w_r));
    }
    if (weights.w_fb > 0 || weights.w_nn > 0) {
        // The reverse pass is only wired (and paid for) when the cycle term
        // is active; the nearest-neighbour term needs the warp and match only.
        ReverseFlowNode reverse = [&](const ad::Tensor& anchored) -> ad::Tensor {
            if (weights.w_fb <= 0) return {};
            PipelineGraph rev = build_pipeline(anchored, pipeline.p1, params, pipeline.k,
                                               cache, pipeline.ego_motion, "rev");
            return rev.flow_total;
        };
        CycleGraph cycle = build_cycle_graph(pipeline.p1, pipeline.p2,
                                             pipeline.flow_total, reverse, cache,
                                             "cycle.nn");
        if (weights.w_fb > 0) {
            g.fb = fb_loss_node(pipeline.p1, cycle);
            terms.push_back(ad::scale(g.fb, weights.w_fb));
        }
        if (weights.w_nn > 0) {
            g.nn = nn_loss_node(cycle);
            terms.push_back(ad::scale(g.nn, weights.w_nn));
        }
    }

    if (terms.empty()) {
        g.total = ad::Tensor::constant(Eigen::MatrixXd::Zero(1, 1));
        return g;
    }
    g.total = terms.front();
    for (size_t i = 1; i < terms.size(); ++i) {
        g.total = ad::add(g.total, terms[i]);
    }
    return g;
}

}  // namespace resflow
