#include "cobias/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace cobias {

void Node::accumulate(const Matrix& g) {
    if (!g.same_shape(value))
        throw std::invalid_argument("gradient shape " + g.shape_str() + " does not match value " +
                                    value.shape_str());
    if (!grad_ready) {
        grad = Matrix(value.rows(), value.cols());
        grad_ready = true;
    }
    for (std::size_t i = 0; i < grad.size(); ++i) grad.at(i) += g.at(i);
}

void Node::zero_grad() {
    grad_ready = false;
    grad = Matrix();
}

NodePtr constant(Matrix value, std::string name) {
    ensure_finite(value, "constant");
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    n->name = std::move(name);
    return n;
}

NodePtr parameter(Matrix value, std::string name) {
    ensure_finite(value, "parameter");
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->name = std::move(name);
    return n;
}

namespace {

NodePtr make_op(Matrix value, std::vector<NodePtr> parents, std::function<void(Node&)> backprop,
                const char* what) {
    ensure_finite(value, what);
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    n->parents = std::move(parents);
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double mx = logits(i, 0);
        for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            out(i, j) = std::exp(logits(i, j) - mx);
            denom += out(i, j);
        }
        for (std::size_t j = 0; j < logits.cols(); ++j) out(i, j) /= denom;
    }
    return out;
}

void check_labels(const Matrix& logits, const std::vector<int>& labels) {
    if (labels.size() != logits.rows())
        throw std::invalid_argument("cross entropy: " + std::to_string(labels.size()) +
                                    " labels for " + logits.shape_str() + " logits");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= logits.cols())
            throw std::invalid_argument("cross entropy: label " + std::to_string(y) +
                                        " out of range for " + std::to_string(logits.cols()) +
                                        " classes");
}

}  // namespace

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    Matrix v = matmul(a->value, b->value);
    return make_op(std::move(v), {a, b},
                   [a = a.get(), b = b.get()](Node& self) {
                       if (a->requires_grad) a->accumulate(matmul_nt(self.grad, b->value));
                       if (b->requires_grad) b->accumulate(matmul_tn(a->value, self.grad));
                   },
                   "matmul");
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    bool broadcast = !a->value.same_shape(b->value);
    Matrix v = broadcast ? add_row_vector(a->value, b->value) : add(a->value, b->value);
    return make_op(std::move(v), {a, b},
                   [a = a.get(), b = b.get(), broadcast](Node& self) {
                       if (a->requires_grad) a->accumulate(self.grad);
                       if (b->requires_grad)
                           b->accumulate(broadcast ? col_sums(self.grad) : self.grad);
                   },
                   "add");
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    Matrix v = sub(a->value, b->value);
    return make_op(std::move(v), {a, b},
                   [a = a.get(), b = b.get()](Node& self) {
                       if (a->requires_grad) a->accumulate(self.grad);
                       if (b->requires_grad) b->accumulate(scale(self.grad, -1.0));
                   },
                   "sub");
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    Matrix v = hadamard(a->value, b->value);
    return make_op(std::move(v), {a, b},
                   [a = a.get(), b = b.get()](Node& self) {
                       if (a->requires_grad) a->accumulate(hadamard(self.grad, b->value));
                       if (b->requires_grad) b->accumulate(hadamard(self.grad, a->value));
                   },
                   "mul");
}

NodePtr scale(const NodePtr& a, double s) {
    Matrix v = scale(a->value, s);
    return make_op(std::move(v), {a},
                   [a = a.get(), s](Node& self) { a->accumulate(scale(self.grad, s)); },
                   "scale");
}

NodePtr add_scalar(const NodePtr& a, double s) {
    Matrix v = a->value;
    for (std::size_t i = 0; i < v.size(); ++i) v.at(i) += s;
    return make_op(std::move(v), {a},
                   [a = a.get()](Node& self) { a->accumulate(self.grad); }, "add_scalar");
}

NodePtr relu(const NodePtr& a) {
    Matrix v = a->value;
    for (std::size_t i = 0; i < v.size(); ++i) v.at(i) = v.at(i) > 0.0 ? v.at(i) : 0.0;
    return make_op(std::move(v), {a},
                   [a = a.get()](Node& self) {
                       Matrix g = self.grad;
                       for (std::size_t i = 0; i < g.size(); ++i)
                           if (a->value.at(i) <= 0.0) g.at(i) = 0.0;
                       a->accumulate(g);
                   },
                   "relu");
}

NodePtr tanh_(const NodePtr& a) {
    Matrix v = a->value;
    for (std::size_t i = 0; i < v.size(); ++i) v.at(i) = std::tanh(v.at(i));
    Matrix saved = v;
    return make_op(std::move(v), {a},
                   [a = a.get(), saved = std::move(saved)](Node& self) {
                       Matrix g = self.grad;
                       for (std::size_t i = 0; i < g.size(); ++i)
                           g.at(i) *= 1.0 - saved.at(i) * saved.at(i);
                       a->accumulate(g);
                   },
                   "tanh");
}

NodePtr exp_(const NodePtr& a) {
    Matrix v = a->value;
    for (std::size_t i = 0; i < v.size(); ++i) v.at(i) = std::exp(v.at(i));
    Matrix saved = v;
    return make_op(std::move(v), {a},
                   [a = a.get(), saved = std::move(saved)](Node& self) {
                       a->accumulate(hadamard(self.grad, saved));
                   },
                   "exp");
}

NodePtr log_(const NodePtr& a) {
    Matrix v = a->value;
    for (std::size_t i = 0; i < v.size(); ++i) v.at(i) = std::log(v.at(i));
    return make_op(std::move(v), {a},
                   [a = a.get()](Node& self) {
                       Matrix g = self.grad;
                       for (std::size_t i = 0; i < g.size(); ++i) g.at(i) /= a->value.at(i);
                       a->accumulate(g);
                   },
                   "log");
}

NodePtr mean(const NodePtr& a) {
    double n = static_cast<double>(a->value.size());
    Matrix v(1, 1, total_sum(a->value) / n);
    return make_op(std::move(v), {a},
                   [a = a.get(), n](Node& self) {
                       Matrix g(a->value.rows(), a->value.cols(), self.grad(0, 0) / n);
                       a->accumulate(g);
                   },
                   "mean");
}

NodePtr sum(const NodePtr& a) {
    Matrix v(1, 1, total_sum(a->value));
    return make_op(std::move(v), {a},
                   [a = a.get()](Node& self) {
                       Matrix g(a->value.rows(), a->value.cols(), self.grad(0, 0));
                       a->accumulate(g);
                   },
                   "sum");
}

NodePtr logsumexp(const NodePtr& a, int axis) {
    if (axis != 0 && axis != 1) throw std::invalid_argument("logsumexp: axis must be 0 or 1");
    const Matrix& x = a->value;
    std::size_t out_len = axis == 0 ? x.cols() : x.rows();
    std::size_t in_len = axis == 0 ? x.rows() : x.cols();
    if (in_len == 0) throw std::invalid_argument("logsumexp: empty reduction axis");
    auto at = [&](std::size_t slice, std::size_t k) -> double {
        return axis == 0 ? x(k, slice) : x(slice, k);
    };
    Matrix v = axis == 0 ? Matrix(1, out_len) : Matrix(out_len, 1);
    Matrix soft(x.rows(), x.cols());  // softmax along the reduced axis, for backward
    for (std::size_t s = 0; s < out_len; ++s) {
        double mx = at(s, 0);
        for (std::size_t k = 1; k < in_len; ++k) mx = std::max(mx, at(s, k));
        double acc = 0.0;
        for (std::size_t k = 0; k < in_len; ++k) acc += std::exp(at(s, k) - mx);
        v.at(s) = mx + std::log(acc);
        for (std::size_t k = 0; k < in_len; ++k) {
            double p = std::exp(at(s, k) - mx) / acc;
            if (axis == 0)
                soft(k, s) = p;
            else
                soft(s, k) = p;
        }
    }
    return make_op(std::move(v), {a},
                   [a = a.get(), soft = std::move(soft), axis](Node& self) {
                       Matrix g = soft;
                       for (std::size_t i = 0; i < g.rows(); ++i)
                           for (std::size_t j = 0; j < g.cols(); ++j)
                               g(i, j) *= axis == 0 ? self.grad(0, j) : self.grad(i, 0);
                       a->accumulate(g);
                   },
                   "logsumexp");
}

NodePtr concat(const NodePtr& a, const NodePtr& b, int axis) {
    if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
    Matrix v = axis == 0 ? vstack(a->value, b->value) : hstack(a->value, b->value);
    return make_op(std::move(v), {a, b},
                   [a = a.get(), b = b.get(), axis](Node& self) {
                       const Matrix& g = self.grad;
                       Matrix ga(a->value.rows(), a->value.cols());
                       Matrix gb(b->value.rows(), b->value.cols());
                       if (axis == 0) {
                           for (std::size_t i = 0; i < ga.rows(); ++i)
                               for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) = g(i, j);
                           for (std::size_t i = 0; i < gb.rows(); ++i)
                               for (std::size_t j = 0; j < gb.cols(); ++j)
                                   gb(i, j) = g(ga.rows() + i, j);
                       } else {
                           for (std::size_t i = 0; i < ga.rows(); ++i) {
                               for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) = g(i, j);
                               for (std::size_t j = 0; j < gb.cols(); ++j)
                                   gb(i, j) = g(i, ga.cols() + j);
                           }
                       }
                       if (a->requires_grad) a->accumulate(ga);
                       if (b->requires_grad) b->accumulate(gb);
                   },
                   "concat");
}

NodePtr gather_rows(const NodePtr& a, std::vector<std::size_t> idx) {
    Matrix v = take_rows(a->value, idx);
    return make_op(std::move(v), {a},
                   [a = a.get(), idx = std::move(idx)](Node& self) {
                       Matrix g(a->value.rows(), a->value.cols());
                       for (std::size_t i = 0; i < idx.size(); ++i)
                           for (std::size_t j = 0; j < g.cols(); ++j)
                               g(idx[i], j) += self.grad(i, j);
                       a->accumulate(g);
                   },
                   "gather_rows");
}

NodePtr grad_scale(const NodePtr& a, double s) {
    Matrix v = a->value;
    return make_op(std::move(v), {a},
                   [a = a.get(), s](Node& self) { a->accumulate(scale(self.grad, s)); },
                   "grad_scale");
}

NodePtr cross_entropy_rows(const NodePtr& logits, const std::vector<int>& labels) {
    check_labels(logits->value, labels);
    const Matrix& x = logits->value;
    Matrix soft = softmax_rows(x);
    Matrix v(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        // -log softmax via the numerically stable logsumexp form
        double mx = x(i, 0);
        for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
        double acc = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) acc += std::exp(x(i, j) - mx);
        v(i, 0) = mx + std::log(acc) - x(i, static_cast<std::size_t>(labels[i]));
    }
    return make_op(std::move(v), {logits},
                   [logits = logits.get(), soft = std::move(soft), labels](Node& self) {
                       Matrix g(soft.rows(), soft.cols());
                       for (std::size_t i = 0; i < g.rows(); ++i) {
                           double go = self.grad(i, 0);
                           for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) = go * soft(i, j);
                           g(i, static_cast<std::size_t>(labels[i])) -= go;
                       }
                       logits->accumulate(g);
                   },
                   "cross_entropy_rows");
}

NodePtr softmax_cross_entropy(const NodePtr& logits, const std::vector<int>& labels) {
    return mean(cross_entropy_rows(logits, labels));
}

GradMap backward(const NodePtr& root) {
    if (root->value.rows() != 1 || root->value.cols() != 1)
        throw std::invalid_argument("backward: root must be scalar, got " +
                                    root->value.shape_str());
    // iterative post-order over parents
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->accumulate(Matrix(1, 1, 1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad_ready) n->backprop(*n);
    }
    GradMap out;
    for (Node* n : order)
        if (n->requires_grad && n->grad_ready) out.emplace(n, n->grad);
    return out;
}

}  // namespace cobias
