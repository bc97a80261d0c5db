#pragma once

#include <optional>
#include <vector>

#include "cobias/autodiff.hpp"
#include "cobias/info.hpp"
#include "cobias/model.hpp"
#include "cobias/rng.hpp"

namespace cobias {

struct EstimatorConfig {
    int epochs = 100;
    int batch = 256;
    double lr = 1e-3;
    std::vector<std::size_t> hidden{64, 64};
    double soft_clip = 30.0;      // critic output passes through clip*tanh(x/clip)
    int final_avg_epochs = 10;    // full-data evaluations averaged into the estimate
    bool ma_correction = false;   // moving-average gradient correction for the log term
    double ma_decay = 0.99;
    double diverge_abs = 50.0;    // |bound| beyond this aborts
};

// DV critic f_phi: tanh MLP ending in a linear scalar, soft-clipped.
class StatisticsNetwork {
public:
    static StatisticsNetwork init(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                  double soft_clip, RngState rng);

    // one score per row of the (u, v) pairing
    NodePtr score(const NodePtr& uv) const;
    Matrix score(const Matrix& uv) const;

    std::size_t input_dim() const { return input_dim_; }
    std::vector<NodePtr> parameters() const;

private:
    std::vector<DenseLayer> layers_;
    std::size_t input_dim_ = 0;
    double soft_clip_ = 30.0;
};

struct DvBatchResult {
    double bound_value;    // joint_term - marginal_term, nats
    double joint_term;     // mean critic score over paired rows
    double marginal_term;  // log-mean-exp of critic scores over permuted rows
};

// DV lower-bound evaluation on one batch; the product of marginals is
// approximated by permuting v's rows. An identity permutation is re-drawn
// once and then accepted.
DvBatchResult dv_bound(const StatisticsNetwork& net, const Matrix& u_batch, const Matrix& v_batch,
                       RngState& rng);

// Differentiable form used inside training loops; the permutation is chosen
// by the caller. Gradients flow into u/v (if they require grad) and into the
// critic parameters.
NodePtr dv_bound_node(const StatisticsNetwork& net, const NodePtr& u, const NodePtr& v,
                      const std::vector<std::size_t>& perm);

struct EstimatorRun {
    StatisticsNetwork net;
    MIEstimate estimate;
    std::vector<std::pair<int, double>> history;  // (epoch, full-data bound)
};

// Gradient ascent on the DV bound; the returned estimate is the full-data
// bound averaged over the last final_avg_epochs epochs.
EstimatorRun train_mi_estimator(const Matrix& samples_u, const Matrix& samples_v,
                                const EstimatorConfig& cfg, RngState rng);

Matrix one_hot(const std::vector<int>& labels, std::size_t K);

struct CobiasEstimate {
    double value;           // I(F;Z,Y) - I(F;Y), may be slightly negative
    double clamped;         // max(value, 0)
    MIEstimate mi_f_zy;
    MIEstimate mi_f_y;
};

// Two-estimator difference I(F;(Z,Y)) - I(F;Y) with one-hot label encodings.
CobiasEstimate estimate_cobias(const Matrix& F, const std::vector<int>& Z,
                               const std::vector<int>& Y, const EstimatorConfig& cfg,
                               RngState rng);

// DV bound for the surrogate I((F,Y); Z) as a differentiable node:
// U = concat(F, one_hot(Y)), V = one_hot(Z). Minimizing it in the model
// parameters equals minimizing I(F;Z|Y) up to the constant I(Y;Z).
NodePtr surrogate_bias_term(const StatisticsNetwork& net, const NodePtr& F,
                            const std::vector<int>& Y, const std::vector<int>& Z, std::size_t A,
                            std::size_t B, const std::vector<std::size_t>& perm);

}  // namespace cobias
