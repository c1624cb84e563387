#include "resflow/network.hpp"

#include <cmath>
#include <random>

namespace resflow {

namespace ad = resflow::ad;

// ---------------------------------------------------------------------------
// parameters

ad::Tensor& NetworkParams::find(const std::string& name) {
    for (auto& [n, t] : groups) {
        if (n == name) return t;
    }
    throw ShapeMismatch("NetworkParams: unknown group '" + name + "'");
}

const ad::Tensor& NetworkParams::find(const std::string& name) const {
    for (const auto& [n, t] : groups) {
        if (n == name) return t;
    }
    throw ShapeMismatch("NetworkParams: unknown group '" + name + "'");
}

void NetworkParams::zero_grads() {
    for (auto& [n, t] : groups) t.zero_grad();
}

NetConfig NetworkParams::config() const {
    NetConfig cfg;
    cfg.enc_width = static_cast<int>(find("pose.enc1.w").cols());
    cfg.head_width = static_cast<int>(find("pose.head1.w").cols());
    cfg.flow_width = static_cast<int>(find("flow.enc1.w").cols());
    return cfg;
}

namespace {

Eigen::MatrixXd uniform_fan_in(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            w(i, j) = dist(rng);
        }
    }
    return w;
}

}  // namespace

NetworkParams NetworkParams::init(const NetConfig& cfg, uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int e = cfg.enc_width, h = cfg.head_width, f = cfg.flow_width;

    NetworkParams p;
    p.seed = seed;
    auto weight = [&](const std::string& name, Eigen::Index r, Eigen::Index c) {
        p.groups.emplace_back(name, ad::Tensor::param(uniform_fan_in(rng, r, c)));
    };
    auto zeros = [&](const std::string& name, Eigen::Index r, Eigen::Index c) {
        p.groups.emplace_back(name, ad::Tensor::param(Eigen::MatrixXd::Zero(r, c)));
    };

    weight("pose.enc1.w", 3, e);
    zeros("pose.enc1.b", 1, e);
    weight("pose.enc2.w", e, e);
    zeros("pose.enc2.b", 1, e);
    weight("pose.head1.w", 4 * e, h);
    zeros("pose.head1.b", 1, h);
    weight("pose.head2.w", h, h);
    zeros("pose.head2.b", 1, h);
    zeros("pose.out.w", h, 6);
    zeros("pose.out.b", 1, 6);

    weight("flow.enc1.w", 3, f);
    zeros("flow.enc1.b", 1, f);
    weight("flow.enc2.w", f, f);
    zeros("flow.enc2.b", 1, f);
    weight("flow.mlp1.w", 6 + 2 * f, f);
    zeros("flow.mlp1.b", 1, f);
    weight("flow.mlp2.w", f, f);
    zeros("flow.mlp2.b", 1, f);
    zeros("flow.out.w", f, 3);
    zeros("flow.out.b", 1, 3);
    return p;
}

const std::vector<int>& MatchCache::lookup(
        const std::string& key, const std::function<std::vector<int>()>& compute) {
    auto it = slots.find(key);
    if (it != slots.end() && frozen) {
        return it->second;
    }
    auto [pos, inserted] = slots.insert_or_assign(key, compute());
    return pos->second;
}

// ---------------------------------------------------------------------------
// graph-side geometry

ad::Tensor euler_rotation_node(const ad::Tensor& angles) {
    if (angles.rows() != 1 || angles.cols() != 3) {
        throw ShapeMismatch("euler_rotation_node: angles must be 1x3");
    }
    ad::Tensor a = ad::pick(angles, 0, 0);
    ad::Tensor b = ad::pick(angles, 0, 1);
    ad::Tensor c = ad::pick(angles, 0, 2);
    ad::Tensor sa = ad::sin_op(a), ca = ad::cos_op(a);
    ad::Tensor sb = ad::sin_op(b), cb = ad::cos_op(b);
    ad::Tensor sc = ad::sin_op(c), cc = ad::cos_op(c);

    ad::Tensor rx = ad::from_elements(3, 3, {{0, 0, 1.0, {}},
                                             {1, 1, 0, ca},
                                             {1, 2, 0, ad::neg(sa)},
                                             {2, 1, 0, sa},
                                             {2, 2, 0, ca}});
    ad::Tensor ry = ad::from_elements(3, 3, {{0, 0, 0, cb},
                                             {0, 2, 0, sb},
                                             {1, 1, 1.0, {}},
                                             {2, 0, 0, ad::neg(sb)},
                                             {2, 2, 0, cb}});
    ad::Tensor rz = ad::from_elements(3, 3, {{0, 0, 0, cc},
                                             {0, 1, 0, ad::neg(sc)},
                                             {1, 0, 0, sc},
                                             {1, 1, 0, cc},
                                             {2, 2, 1.0, {}}});
    return ad::matmul(ad::matmul(rz, ry), rx);
}

ad::Tensor rotation_euler_node(const ad::Tensor& rot) {
    if (rot.rows() != 3 || rot.cols() != 3) {
        throw ShapeMismatch("rotation_euler_node: input must be 3x3");
    }
    ad::Tensor a = ad::atan2_op(ad::pick(rot, 2, 1), ad::pick(rot, 2, 2));
    ad::Tensor b = ad::asin_op(ad::neg(ad::pick(rot, 2, 0)));
    ad::Tensor c = ad::atan2_op(ad::pick(rot, 1, 0), ad::pick(rot, 0, 0));
    return ad::concat_cols({a, b, c});
}

ad::Tensor transform_points_node(const ad::Tensor& pts, const ad::Tensor& rot,
                                 const ad::Tensor& trans) {
    return ad::add_rowvec(ad::matmul(pts, ad::transpose(rot)), trans);
}

// ---------------------------------------------------------------------------
// networks

namespace {

// Shared two-layer point encoder: Nx3 -> NxW, relu activations.
ad::Tensor encode_points(const ad::Tensor& cloud, const NetworkParams& p,
                         const std::string& prefix) {
    ad::Tensor h1 = ad::relu(ad::add_rowvec(ad::matmul(cloud, p.find(prefix + "1.w")),
                                            p.find(prefix + "1.b")));
    return ad::relu(ad::add_rowvec(ad::matmul(h1, p.find(prefix + "2.w")),
                                   p.find(prefix + "2.b")));
}

ad::Tensor pooled_encoding(const ad::Tensor& cloud, const NetworkParams& p,
                           const std::string& prefix) {
    return ad::mean_rows(encode_points(cloud, p, prefix));
}

}  // namespace

ad::Tensor pose_forward_node(const ad::Tensor& p1, const ad::Tensor& p2,
                             const NetworkParams& params) {
    // Siamese branches with shared weights, mean-pooled, then correlated.
    ad::Tensor g1 = pooled_encoding(p1, params, "pose.enc");
    ad::Tensor g2 = pooled_encoding(p2, params, "pose.enc");
    ad::Tensor corr = ad::concat_cols({g1, g2, ad::sub(g1, g2), ad::mul(g1, g2)});

    ad::Tensor h1 = ad::relu(ad::add_rowvec(ad::matmul(corr, params.find("pose.head1.w")),
                                            params.find("pose.head1.b")));
    ad::Tensor h2 = ad::relu(ad::add_rowvec(ad::matmul(h1, params.find("pose.head2.w")),
                                            params.find("pose.head2.b")));
    return ad::add_rowvec(ad::matmul(h2, params.find("pose.out.w")),
                          params.find("pose.out.b"));
}

ad::Tensor flow_forward_node(const ad::Tensor& p1_star, const ad::Tensor& p2,
                             const NetworkParams& params, MatchCache* cache,
                             const std::string& cache_key) {
    const Eigen::Index n = p1_star.rows();

    auto compute_matches = [&] {
        NeighborIndex index(PointCloud(p2.value()));
        return index.nearest_indices(p1_star.value());
    };
    std::vector<int> local;
    const std::vector<int>* matches;
    if (cache) {
        matches = &cache->lookup(cache_key, compute_matches);
    } else {
        local = compute_matches();
        matches = &local;
    }

    // Per-point features: position, offset to the nearest point of the other
    // cloud, and pooled context of both clouds.
    ad::Tensor x_nn = ad::gather_rows(p2, *matches);
    ad::Tensor offset = ad::sub(x_nn, p1_star);
    ad::Tensor ctx1 = ad::tile_rows(pooled_encoding(p1_star, params, "flow.enc"), n);
    ad::Tensor ctx2 = ad::tile_rows(pooled_encoding(p2, params, "flow.enc"), n);
    ad::Tensor feat = ad::concat_cols({p1_star, offset, ctx1, ctx2});

    ad::Tensor h1 = ad::relu(ad::add_rowvec(ad::matmul(feat, params.find("flow.mlp1.w")),
                                            params.find("flow.mlp1.b")));
    ad::Tensor h2 = ad::relu(ad::add_rowvec(ad::matmul(h1, params.find("flow.mlp2.w")),
                                            params.find("flow.mlp2.b")));
    return ad::add_rowvec(ad::matmul(h2, params.find("flow.out.w")),
                          params.find("flow.out.b"));
}

namespace {

struct RefinementNodes {
    ad::Tensor rot;    // 3x3 accumulated product
    ad::Tensor trans;  // 1x3
    ad::Tensor cloud;  // p1 under the accumulated transform
    std::vector<RigidTransform> deltas;
};

// Each step registers the currently transformed cloud against p2 and
// left-composes the increment; the transformed input is always the original
// p1 under the accumulated product.
RefinementNodes run_refinement(const ad::Tensor& p1, const ad::Tensor& p2,
                               const NetworkParams& params, int k) {
    RefinementNodes r;
    r.rot = ad::Tensor::constant(Eigen::Matrix3d::Identity());
    r.trans = ad::Tensor::constant(Eigen::RowVector3d::Zero());
    r.cloud = p1;
    for (int i = 0; i < k; ++i) {
        ad::Tensor pose6 = pose_forward_node(r.cloud, p2, params);
        ad::Tensor d_angles = ad::slice_cols(pose6, 0, 3);
        ad::Tensor d_trans = ad::slice_cols(pose6, 3, 3);
        ad::Tensor d_rot = euler_rotation_node(d_angles);
        r.deltas.push_back({d_rot.value(), d_trans.value().row(0).transpose()});
        r.trans = ad::add(ad::matmul(r.trans, ad::transpose(d_rot)), d_trans);
        r.rot = ad::matmul(d_rot, r.rot);
        r.cloud = transform_points_node(p1, r.rot, r.trans);
    }
    return r;
}

}  // namespace

PipelineGraph build_pipeline(const ad::Tensor& p1, const ad::Tensor& p2,
                             const NetworkParams& params, int k, MatchCache* cache,
                             bool ego_motion, const std::string& cache_ns) {
    if (k < 1) {
        throw InvalidConfig("build_pipeline: refinement iterations must be >= 1");
    }
    PipelineGraph g;
    g.p1 = p1;
    g.p2 = p2;
    g.k = k;
    g.ego_motion = ego_motion;

    if (!ego_motion) {
        // Monolithic ablation: the flow network alone predicts total flow.
        g.flow_total = flow_forward_node(p1, p2, params, cache, cache_ns + ".flow");
        return g;
    }

    RefinementNodes r = run_refinement(p1, p2, params, k);
    g.has_pose = true;
    g.rot = r.rot;
    g.trans = r.trans;
    g.euler = rotation_euler_node(r.rot);
    g.p1_star = r.cloud;
    g.flow_ego = ad::sub(r.cloud, p1);
    g.deltas = std::move(r.deltas);

    g.flow_nonrigid = flow_forward_node(g.p1_star, p2, params, cache, cache_ns + ".flow");
    g.flow_total = ad::add(g.flow_nonrigid, g.flow_ego);
    return g;
}

// ---------------------------------------------------------------------------
// plain wrappers

EulerPose pose_forward(const PointCloud& p1, const PointCloud& p2,
                       const NetworkParams& params) {
    if (p1.size() == 0 || p2.size() == 0) {
        throw EmptyCloud("pose_forward: empty input cloud");
    }
    ad::Tensor t1 = ad::Tensor::constant(p1.pts);
    ad::Tensor t2 = ad::Tensor::constant(p2.pts);
    ad::Tensor out = pose_forward_node(t1, t2, params);
    EulerPose pose;
    pose.angles = out.value().block<1, 3>(0, 0).transpose();
    pose.translation = out.value().block<1, 3>(0, 3).transpose();
    return pose;
}

RefineResult refine_pose(const PointCloud& p1, const PointCloud& p2,
                         const NetworkParams& params, int k) {
    if (p1.size() == 0 || p2.size() == 0) {
        throw EmptyCloud("refine_pose: empty input cloud");
    }
    if (k < 1) {
        throw InvalidConfig("refine_pose: k must be >= 1");
    }
    ad::Tensor t1 = ad::Tensor::constant(p1.pts);
    ad::Tensor t2 = ad::Tensor::constant(p2.pts);
    RefinementNodes r = run_refinement(t1, t2, params, k);
    RefineResult result;
    result.pose = {r.rot.value(), r.trans.value().row(0).transpose()};
    result.deltas = std::move(r.deltas);
    result.p1_star = PointCloud(r.cloud.value());
    return result;
}

FlowField flow_forward(const PointCloud& p1_star, const PointCloud& p2,
                       const NetworkParams& params) {
    if (p1_star.size() == 0 || p2.size() == 0) {
        throw EmptyCloud("flow_forward: empty input cloud");
    }
    ad::Tensor t1 = ad::Tensor::constant(p1_star.pts);
    ad::Tensor t2 = ad::Tensor::constant(p2.pts);
    ad::Tensor out = flow_forward_node(t1, t2, params, nullptr, "");
    return FlowField(out.value(), FlowKind::non_rigid);
}

Predictions predictions_from_graph(const PipelineGraph& g) {
    Predictions pred;
    pred.has_pose = g.has_pose;
    if (g.has_pose) {
        pred.pose = {g.rot.value(), g.trans.value().row(0).transpose()};
        pred.euler_pose.angles = g.euler.value().row(0).transpose();
        pred.euler_pose.translation = pred.pose.translation;
        pred.d_nonrigid = FlowField(g.flow_nonrigid.value(), FlowKind::non_rigid);
        pred.d_ego = FlowField(g.flow_ego.value(), FlowKind::ego_motion);
    }
    pred.d_total = FlowField(g.flow_total.value(), FlowKind::total);
    return pred;
}

Predictions pipeline_forward(const PointCloud& p1, const PointCloud& p2,
                             const NetworkParams& params, const RefineConfig& refine,
                             bool ego_motion) {
    if (p1.size() == 0 || p2.size() == 0) {
        throw EmptyCloud("pipeline_forward: empty input cloud");
    }
    ad::Tensor t1 = ad::Tensor::constant(p1.pts);
    ad::Tensor t2 = ad::Tensor::constant(p2.pts);
    PipelineGraph g = build_pipeline(t1, t2, params, refine.k_infer, nullptr, ego_motion);
    return predictions_from_graph(g);
}

}  // namespace resflow
