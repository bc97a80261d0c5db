#pragma once

#include <string>
#include <vector>

#include "cobias/autodiff.hpp"
#include "cobias/rng.hpp"

namespace cobias {

// One dense layer; W is in x out, b is 1 x out (broadcast over rows).
struct DenseLayer {
    NodePtr W;
    NodePtr b;
};

DenseLayer make_dense(std::size_t in, std::size_t out, RngState& rng, const std::string& name);

// Classifier under study: extractor g (tanh MLP, X -> F) composed with a
// linear head h (F -> logits). Every prediction path goes through F.
class BiasModel {
public:
    static BiasModel init(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                          std::size_t feature_dim, std::size_t n_classes, RngState rng);

    NodePtr features(const NodePtr& x) const;
    NodePtr logits(const NodePtr& x) const { return head_apply(features(x)); }
    NodePtr head_apply(const NodePtr& f) const;

    Matrix features(const Matrix& x) const;
    Matrix logits(const Matrix& x) const;
    Matrix head_logits(const Matrix& f) const;  // head applied to precomputed features
    // argmax of logits; ties resolve to the lower class index
    std::vector<int> predict(const Matrix& x) const;

    void freeze_extractor();
    void unfreeze();
    bool extractor_frozen() const { return frozen_; }

    // head-only reinitialization (linear-probe experiments)
    void reinit_head(RngState rng);

    std::vector<NodePtr> parameters() const;            // all
    std::vector<NodePtr> trainable_parameters() const;  // respects freeze
    std::vector<NodePtr> extractor_parameters() const;
    std::vector<NodePtr> head_parameters() const;

    std::size_t input_dim() const { return input_dim_; }
    std::size_t feature_dim() const { return feature_dim_; }
    std::size_t n_classes() const { return n_classes_; }

    void save(const std::string& path) const;
    static BiasModel load(const std::string& path);

private:
    std::vector<DenseLayer> extractor_;
    DenseLayer head_;
    std::size_t input_dim_ = 0, feature_dim_ = 0, n_classes_ = 0;
    std::vector<std::size_t> hidden_;
    bool frozen_ = false;
};

}  // namespace cobias
