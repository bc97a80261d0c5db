#include "cobias/mine.hpp"

#include <cmath>
#include <stdexcept>

#include "cobias/optim.hpp"
#include "cobias/textio.hpp"

namespace cobias {

StatisticsNetwork StatisticsNetwork::init(std::size_t input_dim,
                                          const std::vector<std::size_t>& hidden, double soft_clip,
                                          RngState rng) {
    if (input_dim == 0) throw std::invalid_argument("StatisticsNetwork: input_dim must be > 0");
    if (soft_clip <= 0.0) throw std::invalid_argument("StatisticsNetwork: soft_clip must be > 0");
    StatisticsNetwork net;
    net.input_dim_ = input_dim;
    net.soft_clip_ = soft_clip;
    std::size_t prev = input_dim;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        net.layers_.push_back(make_dense(prev, hidden[i], rng, "critic" + std::to_string(i)));
        prev = hidden[i];
    }
    net.layers_.push_back(make_dense(prev, 1, rng, "critic_out"));
    return net;
}

NodePtr StatisticsNetwork::score(const NodePtr& uv) const {
    if (uv->value.cols() != input_dim_)
        throw std::invalid_argument("critic: input has " + std::to_string(uv->value.cols()) +
                                    " columns, expected " + std::to_string(input_dim_));
    NodePtr h = uv;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i)
        h = tanh_(add(matmul(h, layers_[i].W), layers_[i].b));
    h = add(matmul(h, layers_.back().W), layers_.back().b);
    // soft clip c*tanh(x/c): bounded scores keep exp() in range, gradients
    // near-identity in the operating region
    return scale(tanh_(scale(h, 1.0 / soft_clip_)), soft_clip_);
}

Matrix StatisticsNetwork::score(const Matrix& uv) const {
    if (uv.cols() != input_dim_)
        throw std::invalid_argument("critic: input has " + std::to_string(uv.cols()) +
                                    " columns, expected " + std::to_string(input_dim_));
    Matrix h = uv;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
        h = add_row_vector(matmul(h, layers_[i].W->value), layers_[i].b->value);
        for (std::size_t k = 0; k < h.size(); ++k) h.at(k) = std::tanh(h.at(k));
    }
    h = add_row_vector(matmul(h, layers_.back().W->value), layers_.back().b->value);
    for (std::size_t k = 0; k < h.size(); ++k)
        h.at(k) = soft_clip_ * std::tanh(h.at(k) / soft_clip_);
    return h;
}

std::vector<NodePtr> StatisticsNetwork::parameters() const {
    std::vector<NodePtr> out;
    for (const auto& layer : layers_) {
        out.push_back(layer.W);
        out.push_back(layer.b);
    }
    return out;
}

namespace {

void check_pairing(std::size_t un, std::size_t vn) {
    if (un != vn)
        throw std::invalid_argument("dv_bound: u and v row counts differ (" + std::to_string(un) +
                                    " vs " + std::to_string(vn) + ")");
    if (un < 8)
        throw std::invalid_argument("dv_bound: batch of " + std::to_string(un) +
                                    " is below the minimum of 8");
}

bool is_identity(const std::vector<std::size_t>& p) {
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] != i) return false;
    return true;
}

std::vector<std::size_t> draw_perm(RngState& rng, std::size_t n) {
    auto p = rng.permutation(n);
    if (is_identity(p)) p = rng.permutation(n);  // re-drawn once, then accepted
    return p;
}

double logmeanexp(const Matrix& scores) {
    double mx = scores.at(0);
    for (std::size_t i = 1; i < scores.size(); ++i) mx = std::max(mx, scores.at(i));
    double acc = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) acc += std::exp(scores.at(i) - mx);
    return mx + std::log(acc / static_cast<double>(scores.size()));
}

}  // namespace

DvBatchResult dv_bound(const StatisticsNetwork& net, const Matrix& u_batch, const Matrix& v_batch,
                       RngState& rng) {
    check_pairing(u_batch.rows(), v_batch.rows());
    auto perm = draw_perm(rng, v_batch.rows());
    Matrix s_joint = net.score(hstack(u_batch, v_batch));
    Matrix s_marg = net.score(hstack(u_batch, take_rows(v_batch, perm)));
    DvBatchResult r;
    r.joint_term = total_sum(s_joint) / static_cast<double>(s_joint.rows());
    r.marginal_term = logmeanexp(s_marg);
    r.bound_value = r.joint_term - r.marginal_term;
    return r;
}

NodePtr dv_bound_node(const StatisticsNetwork& net, const NodePtr& u, const NodePtr& v,
                      const std::vector<std::size_t>& perm) {
    check_pairing(u->value.rows(), v->value.rows());
    if (perm.size() != v->value.rows())
        throw std::invalid_argument("dv_bound: permutation length " + std::to_string(perm.size()) +
                                    " does not match batch " + std::to_string(v->value.rows()));
    double n = static_cast<double>(u->value.rows());
    NodePtr joint = mean(net.score(concat(u, v, 1)));
    NodePtr s_marg = net.score(concat(u, gather_rows(v, perm), 1));
    NodePtr marg = add_scalar(logsumexp(s_marg, 0), -std::log(n));
    return sub(joint, marg);
}

EstimatorRun train_mi_estimator(const Matrix& samples_u, const Matrix& samples_v,
                                const EstimatorConfig& cfg, RngState rng) {
    check_pairing(samples_u.rows(), samples_v.rows());
    const std::size_t n = samples_u.rows();
    if (n < 1000)
        throw std::invalid_argument("train_mi_estimator: needs >= 1000 paired samples, got " +
                                    std::to_string(n));
    if (cfg.epochs < 1 || cfg.batch < 8)
        throw std::invalid_argument("train_mi_estimator: epochs must be >= 1 and batch >= 8");

    EstimatorRun run{StatisticsNetwork::init(samples_u.cols() + samples_v.cols(), cfg.hidden,
                                             cfg.soft_clip, rng.derive("critic-init")),
                     {}, {}};
    Adam opt(run.net.parameters(), cfg.lr);
    RngState shuffle_root = rng.derive("shuffle");
    RngState perm_root = rng.derive("dv-perm");
    RngState eval_rng = rng.derive("eval-perm");

    const int avg_from = std::max(0, cfg.epochs - std::max(1, cfg.final_avg_epochs));
    double final_acc = 0.0;
    int final_cnt = 0;
    double ma_exp = 1.0;  // running mean of e^score over marginal samples
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngState sh = shuffle_root.derive(static_cast<std::uint64_t>(epoch));
        RngState pr = perm_root.derive(static_cast<std::uint64_t>(epoch));
        auto order = sh.permutation(n);
        double epoch_bound = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch)) {
            std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch));
            if (stop - start < 8) continue;  // tail too small for a marginal sample
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            NodePtr u = constant(take_rows(samples_u, idx));
            NodePtr v = constant(take_rows(samples_v, idx));
            auto perm = draw_perm(pr, idx.size());

            NodePtr bound;
            if (!cfg.ma_correction) {
                bound = dv_bound_node(run.net, u, v, perm);
            } else {
                // same value, but the log-term gradient is rescaled by
                // batch-mean(e^f) / running-mean(e^f)
                double bn = static_cast<double>(idx.size());
                NodePtr joint = mean(run.net.score(concat(u, v, 1)));
                NodePtr lse = logsumexp(run.net.score(concat(u, gather_rows(v, perm), 1)), 0);
                double batch_exp = std::exp(lse->value(0, 0)) / bn;
                ma_exp = cfg.ma_decay * ma_exp + (1.0 - cfg.ma_decay) * batch_exp;
                NodePtr marg = add_scalar(grad_scale(lse, batch_exp / ma_exp), -std::log(bn));
                bound = sub(joint, marg);
            }
            double value = bound->value(0, 0);
            if (!std::isfinite(value) || std::abs(value) > cfg.diverge_abs)
                throw std::runtime_error("train_mi_estimator: bound diverged to " + fmt_g17(value) +
                                         " at epoch " + std::to_string(epoch) +
                                         "; lower the learning rate or batch the data differently");
            epoch_bound += value;
            ++batches;
            opt.zero_grad();
            backward(scale(bound, -1.0));  // ascent
            opt.step();
        }
        run.history.emplace_back(epoch, batches > 0 ? epoch_bound / batches : 0.0);
        if (epoch >= avg_from) {
            final_acc += dv_bound(run.net, samples_u, samples_v, eval_rng).bound_value;
            ++final_cnt;
        }
    }
    run.estimate.value = final_acc / std::max(1, final_cnt);
    run.estimate.estimator = Estimator::dv_neural;
    run.estimate.is_lower_bound = true;
    run.estimate.n_samples = n;
    return run;
}

Matrix one_hot(const std::vector<int>& labels, std::size_t K) {
    Matrix out(labels.size(), K);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= K)
            throw std::invalid_argument("one_hot: label " + std::to_string(labels[i]) +
                                        " out of range for K = " + std::to_string(K));
        out(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return out;
}

CobiasEstimate estimate_cobias(const Matrix& F, const std::vector<int>& Z,
                               const std::vector<int>& Y, const EstimatorConfig& cfg,
                               RngState rng) {
    if (F.rows() != Z.size() || F.rows() != Y.size())
        throw std::invalid_argument("estimate_cobias: F rows, Z, Y must align");
    std::size_t Kz = 0, Ky = 0;
    for (int z : Z) Kz = std::max(Kz, static_cast<std::size_t>(z) + 1);
    for (int y : Y) Ky = std::max(Ky, static_cast<std::size_t>(y) + 1);
    Matrix zy = hstack(one_hot(Z, Kz), one_hot(Y, Ky));
    EstimatorRun r_zy = train_mi_estimator(F, zy, cfg, rng.derive("i-f-zy"));
    EstimatorRun r_y = train_mi_estimator(F, one_hot(Y, Ky), cfg, rng.derive("i-f-y"));
    CobiasEstimate e;
    e.mi_f_zy = r_zy.estimate;
    e.mi_f_y = r_y.estimate;
    e.value = r_zy.estimate.value - r_y.estimate.value;
    e.clamped = e.value < 0.0 ? 0.0 : e.value;
    return e;
}

NodePtr surrogate_bias_term(const StatisticsNetwork& net, const NodePtr& F,
                            const std::vector<int>& Y, const std::vector<int>& Z, std::size_t A,
                            std::size_t B, const std::vector<std::size_t>& perm) {
    NodePtr u = concat(F, constant(one_hot(Y, A)), 1);
    NodePtr v = constant(one_hot(Z, B));
    return dv_bound_node(net, u, v, perm);
}

}  // namespace cobias
