#pragma once

#include <vector>

#include "cobias/autodiff.hpp"

namespace cobias {

// Adam with decoupled weight decay: the decay shrink is applied directly to
// the parameter (lr * wd * p), outside the adaptive moment machinery, so a
// zero gradient with zero decay leaves the parameter bit-identical.
class Adam {
public:
    Adam(std::vector<NodePtr> params, double lr, double weight_decay = 0.0, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    struct Moments {
        Matrix m, v;
    };
    std::vector<NodePtr> params_;
    std::vector<Moments> moments_;
    double lr_, weight_decay_, beta1_, beta2_, eps_;
    long long t_ = 0;
};

}  // namespace cobias
