#include "resflow/autodiff.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

namespace resflow::ad {

namespace {

NodePtr make_node(Eigen::MatrixXd value, std::vector<NodePtr> parents) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        n->needs_grad = n->needs_grad || p->needs_grad;
    }
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeMismatch(std::string(op) + ": shapes (" + std::to_string(a.rows()) +
                            "x" + std::to_string(a.cols()) + ") vs (" +
                            std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
    }
}

// Accumulate into a parent only when it participates in differentiation.
inline void accum(const NodePtr& p, const Eigen::MatrixXd& g) {
    if (p->needs_grad) {
        p->ensure_grad();
        p->grad += g;
    }
}

}  // namespace

Tensor Tensor::constant(const Eigen::MatrixXd& v) {
    return Tensor(make_node(v, {}));
}

Tensor Tensor::param(const Eigen::MatrixXd& v) {
    auto n = make_node(v, {});
    n->needs_grad = true;
    n->ensure_grad();
    return Tensor(n);
}

double Tensor::scalar() const {
    if (rows() != 1 || cols() != 1) {
        throw ShapeMismatch("Tensor::scalar: tensor is not 1x1");
    }
    return node_->value(0, 0);
}

void Tensor::backward() const {
    if (rows() != 1 || cols() != 1) {
        throw ShapeMismatch("backward: root must be a 1x1 scalar");
    }

    // Post-order DFS over the needs_grad subgraph; the reverse of that order
    // runs each node after all of its consumers, so gradients are complete
    // when propagated.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    if (node_->needs_grad) {
        stack.push_back({node_.get(), 0});
        visited.insert(node_.get());
    }
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node* p = f.node->parents[f.next_parent++].get();
            if (p->needs_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    node_->ensure_grad();
    node_->grad(0, 0) += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn();
        }
    }
}

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto n = make_node(a.value() + b.value(), {a.node(), b.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node(), pb = b.node();
        n->backward_fn = [self, pa, pb] {
            accum(pa, self->grad);
            accum(pb, self->grad);
        };
    }
    return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto n = make_node(a.value() - b.value(), {a.node(), b.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node(), pb = b.node();
        n->backward_fn = [self, pa, pb] {
            accum(pa, self->grad);
            accum(pb, -self->grad);
        };
    }
    return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto n = make_node(a.value().cwiseProduct(b.value()), {a.node(), b.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node(), pb = b.node();
        n->backward_fn = [self, pa, pb] {
            accum(pa, self->grad.cwiseProduct(pb->value));
            accum(pb, self->grad.cwiseProduct(pa->value));
        };
    }
    return Tensor(n);
}

Tensor scale(const Tensor& a, double s) {
    auto n = make_node(a.value() * s, {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa, s] { accum(pa, self->grad * s); };
    }
    return Tensor(n);
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
    auto n = make_node(a.value().cwiseMax(0.0), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            accum(pa, (pa->value.array() > 0.0).cast<double>().matrix().cwiseProduct(self->grad));
        };
    }
    return Tensor(n);
}

Tensor tanh_op(const Tensor& a) {
    auto n = make_node(a.value().array().tanh().matrix(), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            accum(pa, ((1.0 - self->value.array().square()) * self->grad.array()).matrix());
        };
    }
    return Tensor(n);
}

Tensor sin_op(const Tensor& a) {
    auto n = make_node(a.value().array().sin().matrix(), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            accum(pa, (pa->value.array().cos() * self->grad.array()).matrix());
        };
    }
    return Tensor(n);
}

Tensor cos_op(const Tensor& a) {
    auto n = make_node(a.value().array().cos().matrix(), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            accum(pa, (-pa->value.array().sin() * self->grad.array()).matrix());
        };
    }
    return Tensor(n);
}

Tensor sqrt_op(const Tensor& a) {
    auto n = make_node(a.value().array().sqrt().matrix(), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            Eigen::ArrayXXd y = self->value.array();
            Eigen::ArrayXXd g = (y > 0.0).select(self->grad.array() / (2.0 * y), 0.0);
            accum(pa, g.matrix());
        };
    }
    return Tensor(n);
}

Tensor square(const Tensor& a) {
    auto n = make_node(a.value().array().square().matrix(), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            accum(pa, (2.0 * pa->value.array() * self->grad.array()).matrix());
        };
    }
    return Tensor(n);
}

Tensor asin_op(const Tensor& a) {
    Eigen::ArrayXXd clamped = a.value().array().min(1.0).max(-1.0);
    auto n = make_node(clamped.asin().matrix(), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            Eigen::ArrayXXd x = pa->value.array().min(1.0).max(-1.0);
            Eigen::ArrayXXd denom = (1.0 - x.square()).max(1e-300).sqrt();
            accum(pa, (self->grad.array() / denom).matrix());
        };
    }
    return Tensor(n);
}

Tensor atan2_op(const Tensor& y, const Tensor& x) {
    check_same_shape(y, x, "atan2");
    Eigen::MatrixXd v(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
            v(i, j) = std::atan2(y.value()(i, j), x.value()(i, j));
        }
    }
    auto n = make_node(std::move(v), {y.node(), x.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr py = y.node(), px = x.node();
        n->backward_fn = [self, py, px] {
            Eigen::ArrayXXd yy = py->value.array();
            Eigen::ArrayXXd xx = px->value.array();
            Eigen::ArrayXXd denom = xx.square() + yy.square();
            Eigen::ArrayXXd safe = (denom > 0.0).select(denom, 1.0);
            Eigen::ArrayXXd mask = (denom > 0.0).cast<double>();
            accum(py, (self->grad.array() * xx / safe * mask).matrix());
            accum(px, (self->grad.array() * (-yy) / safe * mask).matrix());
        };
    }
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// linear algebra / shape

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeMismatch("matmul: inner dimensions " + std::to_string(a.cols()) +
                            " vs " + std::to_string(b.rows()));
    }
    auto n = make_node(a.value() * b.value(), {a.node(), b.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node(), pb = b.node();
        n->backward_fn = [self, pa, pb] {
            if (pa->needs_grad) accum(pa, self->grad * pb->value.transpose());
            if (pb->needs_grad) accum(pb, pa->value.transpose() * self->grad);
        };
    }
    return Tensor(n);
}

Tensor transpose(const Tensor& a) {
    auto n = make_node(a.value().transpose(), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] { accum(pa, self->grad.transpose()); };
    }
    return Tensor(n);
}

Tensor mean_all(const Tensor& a) {
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = a.value().mean();
    auto n = make_node(std::move(v), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            const double w = self->grad(0, 0) / static_cast<double>(pa->value.size());
            accum(pa, Eigen::MatrixXd::Constant(pa->value.rows(), pa->value.cols(), w));
        };
    }
    return Tensor(n);
}

Tensor sum_all(const Tensor& a) {
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = a.value().sum();
    auto n = make_node(std::move(v), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            accum(pa, Eigen::MatrixXd::Constant(pa->value.rows(), pa->value.cols(),
                                                self->grad(0, 0)));
        };
    }
    return Tensor(n);
}

Tensor mean_rows(const Tensor& a) {
    auto n = make_node(a.value().colwise().mean(), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            const double inv_n = 1.0 / static_cast<double>(pa->value.rows());
            accum(pa, (self->grad * inv_n).replicate(pa->value.rows(), 1));
        };
    }
    return Tensor(n);
}

Tensor rowwise_sum(const Tensor& a) {
    auto n = make_node(a.value().rowwise().sum(), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            accum(pa, self->grad.replicate(1, pa->value.cols()));
        };
    }
    return Tensor(n);
}

Tensor rowwise_l2norm(const Tensor& a) {
    auto n = make_node(a.value().rowwise().norm(), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pa->value.rows(), pa->value.cols());
            for (Eigen::Index i = 0; i < pa->value.rows(); ++i) {
                const double norm = self->value(i, 0);
                if (norm > 0.0) {
                    g.row(i) = self->grad(i, 0) * pa->value.row(i) / norm;
                }
            }
            accum(pa, g);
        };
    }
    return Tensor(n);
}

Tensor tile_rows(const Tensor& a, Eigen::Index n_rows) {
    if (a.rows() != 1) {
        throw ShapeMismatch("tile_rows: input must be a row vector");
    }
    auto n = make_node(a.value().replicate(n_rows, 1), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa] { accum(pa, self->grad.colwise().sum()); };
    }
    return Tensor(n);
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeMismatch("add_rowvec: expected 1x" + std::to_string(a.cols()) +
                            " row vector");
    }
    auto n = make_node(a.value().rowwise() + row.value().row(0), {a.node(), row.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node(), pr = row.node();
        n->backward_fn = [self, pa, pr] {
            accum(pa, self->grad);
            accum(pr, self->grad.colwise().sum());
        };
    }
    return Tensor(n);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        throw ShapeMismatch("concat_cols: no inputs");
    }
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) {
            throw ShapeMismatch("concat_cols: row counts differ");
        }
        cols += p.cols();
    }
    Eigen::MatrixXd v(rows, cols);
    std::vector<NodePtr> parents;
    std::vector<Eigen::Index> offsets;
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleCols(at, p.cols()) = p.value();
        offsets.push_back(at);
        at += p.cols();
        parents.push_back(p.node());
    }
    auto n = make_node(std::move(v), std::move(parents));
    if (n->needs_grad) {
        Node* self = n.get();
        auto parent_nodes = n->parents;
        n->backward_fn = [self, parent_nodes, offsets] {
            for (size_t i = 0; i < parent_nodes.size(); ++i) {
                accum(parent_nodes[i],
                      self->grad.middleCols(offsets[i], parent_nodes[i]->value.cols()));
            }
        };
    }
    return Tensor(n);
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices) {
    Eigen::MatrixXd v(static_cast<Eigen::Index>(indices.size()), a.cols());
    for (size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= a.rows()) {
            throw ShapeMismatch("gather_rows: index out of range");
        }
        v.row(static_cast<Eigen::Index>(i)) = a.value().row(indices[i]);
    }
    auto n = make_node(std::move(v), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        auto idx = indices;
        n->backward_fn = [self, pa, idx] {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pa->value.rows(), pa->value.cols());
            for (size_t i = 0; i < idx.size(); ++i) {
                g.row(idx[i]) += self->grad.row(static_cast<Eigen::Index>(i));
            }
            accum(pa, g);
        };
    }
    return Tensor(n);
}

Tensor slice_cols(const Tensor& a, Eigen::Index first, Eigen::Index count) {
    if (first < 0 || first + count > a.cols()) {
        throw ShapeMismatch("slice_cols: range out of bounds");
    }
    auto n = make_node(a.value().middleCols(first, count), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa, first, count] {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pa->value.rows(), pa->value.cols());
            g.middleCols(first, count) = self->grad;
            accum(pa, g);
        };
    }
    return Tensor(n);
}

Tensor pick(const Tensor& a, Eigen::Index r, Eigen::Index c) {
    if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) {
        throw ShapeMismatch("pick: index out of bounds");
    }
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = a.value()(r, c);
    auto n = make_node(std::move(v), {a.node()});
    if (n->needs_grad) {
        Node* self = n.get();
        NodePtr pa = a.node();
        n->backward_fn = [self, pa, r, c] {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pa->value.rows(), pa->value.cols());
            g(r, c) = self->grad(0, 0);
            accum(pa, g);
        };
    }
    return Tensor(n);
}

Tensor from_elements(Eigen::Index rows, Eigen::Index cols,
                     const std::vector<MatrixEntry>& entries) {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(rows, cols);
    std::vector<NodePtr> parents;
    struct Wire {
        Eigen::Index r, c;
        NodePtr src;
    };
    std::vector<Wire> wires;
    for (const auto& e : entries) {
        if (e.r < 0 || e.r >= rows || e.c < 0 || e.c >= cols) {
            throw ShapeMismatch("from_elements: entry out of bounds");
        }
        if (e.source.valid()) {
            if (e.source.rows() != 1 || e.source.cols() != 1) {
                throw ShapeMismatch("from_elements: sources must be 1x1");
            }
            v(e.r, e.c) = e.source.value()(0, 0);
            parents.push_back(e.source.node());
            wires.push_back({e.r, e.c, e.source.node()});
        } else {
            v(e.r, e.c) = e.constant;
        }
    }
    auto n = make_node(std::move(v), std::move(parents));
    if (n->needs_grad) {
        Node* self = n.get();
        n->backward_fn = [self, wires] {
            for (const auto& w : wires) {
                if (w.src->needs_grad) {
                    w.src->ensure_grad();
                    w.src->grad(0, 0) += self->grad(w.r, w.c);
                }
            }
        };
    }
    return Tensor(n);
}

}  // namespace resflow::ad
