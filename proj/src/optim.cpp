#include "cobias/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace cobias {

Adam::Adam(std::vector<NodePtr> params, double lr, double weight_decay, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), weight_decay_(weight_decay), beta1_(beta1),
      beta2_(beta2), eps_(eps) {
    moments_.reserve(params_.size());
    for (const auto& p : params_)
        moments_.push_back({Matrix(p->value.rows(), p->value.cols()),
                            Matrix(p->value.rows(), p->value.cols())});
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Node& p = *params_[k];
        Moments& st = moments_[k];
        // parameters outside the current graph simply contribute no gradient
        const bool has_grad = p.grad_ready;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            double g = has_grad ? p.grad.at(i) : 0.0;
            if (!std::isfinite(g))
                throw std::runtime_error("Adam: non-finite gradient in parameter '" +
                                         (p.name.empty() ? std::string("<unnamed>") : p.name) +
                                         "'");
            st.m.at(i) = beta1_ * st.m.at(i) + (1.0 - beta1_) * g;
            st.v.at(i) = beta2_ * st.v.at(i) + (1.0 - beta2_) * g * g;
            double mhat = st.m.at(i) / bc1;
            double vhat = st.v.at(i) / bc2;
            if (weight_decay_ != 0.0) p.value.at(i) -= lr_ * weight_decay_ * p.value.at(i);
            double delta = lr_ * mhat / (std::sqrt(vhat) + eps_);
            if (delta != 0.0) p.value.at(i) -= delta;
        }
    }
}

void Adam::zero_grad() {
    for (const auto& p : params_) p->zero_grad();
}

}  // namespace cobias
