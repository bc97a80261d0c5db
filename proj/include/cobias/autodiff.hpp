#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cobias/matrix.hpp"

namespace cobias {

// Reverse-mode autodiff node. Graphs are built eagerly by the op functions
// below and torn down when the shared_ptrs go out of scope; parameters are
// long-lived leaf nodes reused across graphs.
struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Matrix value;
    Matrix grad;  // allocated on first accumulation, reset by zero_grad
    bool requires_grad = false;
    bool grad_ready = false;
    std::string name;  // optional, used in optimizer diagnostics
    std::vector<NodePtr> parents;
    // Distributes this->grad into parents' grads; empty for leaves.
    std::function<void(Node&)> backprop;

    void accumulate(const Matrix& g);
    void zero_grad();
};

NodePtr constant(Matrix value, std::string name = "");
NodePtr parameter(Matrix value, std::string name = "");

NodePtr matmul(const NodePtr& a, const NodePtr& b);
// same-shape addition, or b as a 1 x cols row vector broadcast over a's rows;
// any other shape pair is an error
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);  // elementwise
NodePtr scale(const NodePtr& a, double s);
NodePtr add_scalar(const NodePtr& a, double s);
NodePtr relu(const NodePtr& a);
NodePtr tanh_(const NodePtr& a);
NodePtr exp_(const NodePtr& a);
NodePtr log_(const NodePtr& a);
NodePtr mean(const NodePtr& a);  // over all entries, 1x1
NodePtr sum(const NodePtr& a);   // over all entries, 1x1
// axis 0: reduce rows -> 1 x cols; axis 1: reduce cols -> rows x 1.
// Computed with max subtraction, overflow-safe.
NodePtr logsumexp(const NodePtr& a, int axis);
// axis 0: stack vertically; axis 1: side by side
NodePtr concat(const NodePtr& a, const NodePtr& b, int axis);
// rows of a selected by index, repetition allowed; backward scatter-adds
NodePtr gather_rows(const NodePtr& a, std::vector<std::size_t> idx);
// identity forward; backward multiplies the incoming gradient by s
// (estimator plumbing: bias-corrected log-term gradients)
NodePtr grad_scale(const NodePtr& a, double s);
// mean over rows of -log softmax(logits)[label]; labels in {0..cols-1}
NodePtr softmax_cross_entropy(const NodePtr& logits, const std::vector<int>& labels);
// per-row cross entropy, n x 1 (building block for group-weighted losses)
NodePtr cross_entropy_rows(const NodePtr& logits, const std::vector<int>& labels);

// Gradient of a scalar root with respect to every requires_grad node in its
// graph. Gradients also remain on the nodes themselves (node->grad);
// fan-out accumulates additively. Constants never appear in the map.
using GradMap = std::unordered_map<const Node*, Matrix>;
GradMap backward(const NodePtr& root);

}  // namespace cobias
