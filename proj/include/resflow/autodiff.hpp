#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "resflow/errors.hpp"

namespace resflow::ad {

// Minimal reverse-mode automatic differentiation over 2-D double tensors.
//
// A Tensor is a value-semantic handle to a shared graph node. Building an
// expression records parents and a backward closure; Tensor::backward() on a
// 1x1 scalar walks the graph once in reverse topological order, so every
// node's gradient is fully accumulated before it propagates further. Leaves
// created with Tensor::param receive gradients; constants do not.
//
// The graph is single-owner: one training context builds and differentiates
// it. Forward-only evaluation of frozen parameters is reentrant.

class Node {
public:
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;  // allocated lazily, same shape as value
    bool needs_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;

    void ensure_grad() {
        if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
            grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
        }
    }
};

using NodePtr = std::shared_ptr<Node>;

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor constant(const Eigen::MatrixXd& v);
    static Tensor param(const Eigen::MatrixXd& v);

    bool valid() const { return node_ != nullptr; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }

    const Eigen::MatrixXd& value() const { return node_->value; }
    /// In-place access for optimizer updates on leaves.
    Eigen::MatrixXd& mutable_value() { return node_->value; }

    const Eigen::MatrixXd& grad() const { return node_->grad; }
    bool needs_grad() const { return node_->needs_grad; }
    void zero_grad() { node_->grad = Eigen::MatrixXd::Zero(rows(), cols()); }

    /// Reverse pass seeded with d(self)/d(self) = 1. Self must be 1x1.
    void backward() const;

    double scalar() const;  // value of a 1x1 tensor

    NodePtr node() const { return node_; }

private:
    NodePtr node_;
};

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);       // subgradient 0 at 0
Tensor tanh_op(const Tensor& a);
Tensor sin_op(const Tensor& a);
Tensor cos_op(const Tensor& a);
Tensor sqrt_op(const Tensor& a);    // gradient pinned to 0 where x == 0
Tensor square(const Tensor& a);
Tensor asin_op(const Tensor& a);    // forward input clamped to [-1, 1]
Tensor atan2_op(const Tensor& y, const Tensor& x);

// ---- linear algebra / shape ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor mean_all(const Tensor& a);                  // -> 1x1
Tensor sum_all(const Tensor& a);                   // -> 1x1
Tensor mean_rows(const Tensor& a);                 // NxF -> 1xF (pooling)
Tensor rowwise_sum(const Tensor& a);               // NxF -> Nx1
Tensor rowwise_l2norm(const Tensor& a);            // NxF -> Nx1; grad 0 on zero rows
Tensor tile_rows(const Tensor& a, Eigen::Index n); // 1xF -> NxF
Tensor add_rowvec(const Tensor& a, const Tensor& row);  // NxF + 1xF broadcast
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices);
Tensor slice_cols(const Tensor& a, Eigen::Index first, Eigen::Index count);
Tensor pick(const Tensor& a, Eigen::Index r, Eigen::Index c);  // -> 1x1

/// One cell of an assembled matrix: either a fixed constant or a 1x1 tensor.
struct MatrixEntry {
    Eigen::Index r = 0, c = 0;
    double constant = 0.0;
    Tensor source;  // when valid, overrides constant
};
Tensor from_elements(Eigen::Index rows, Eigen::Index cols,
                     const std::vector<MatrixEntry>& entries);

}  // namespace resflow::ad
