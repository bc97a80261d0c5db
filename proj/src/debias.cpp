#include "cobias/debias.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "cobias/autodiff.hpp"
#include "cobias/optim.hpp"
#include "cobias/textio.hpp"

namespace cobias {

void TrainConfig::validate(std::size_t n_classes) const {
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (batch < 8) throw std::invalid_argument("TrainConfig: batch must be >= 8");
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
    if (!std::isfinite(beta)) throw std::invalid_argument("TrainConfig: beta must be finite");
    if (dro_eta < 0.0) throw std::invalid_argument("TrainConfig: dro_eta must be >= 0");
    if (use_noise) {
        double cap = 1.0 - 1.0 / static_cast<double>(n_classes);
        if (rho < 0.0 || rho >= cap)
            throw std::invalid_argument("TrainConfig: rho must lie in [0, 1 - 1/K)");
    }
    if (feature_dim == 0) throw std::invalid_argument("TrainConfig: feature_dim must be positive");
}

namespace {

void set_requires_grad(const std::vector<NodePtr>& params, bool on) {
    for (const auto& p : params) p->requires_grad = on;
}

double params_checksum(const std::vector<NodePtr>& params) {
    double s = 0.0;
    for (const auto& p : params) s += total_sum(p->value);
    return s;
}

std::vector<Matrix> snapshot_params(const std::vector<NodePtr>& params) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p->value);
    return out;
}

void restore_params(const std::vector<NodePtr>& params, const std::vector<Matrix>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

// Batch index ranges over a permuted order; tails shorter than 8 rows are
// skipped so every method sees the same step sequence.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   int batch) {
    std::vector<std::vector<std::size_t>> out;
    std::size_t n = order.size();
    std::size_t b = static_cast<std::size_t>(batch);
    for (std::size_t start = 0; start < n; start += b) {
        std::size_t end = std::min(n, start + b);
        if (end - start < 8) break;
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

std::vector<int> take_ints(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
    return out;
}

// Multiplicative weights over the groups actually populated in the training
// data; a group absent from one batch keeps its weight for that step.
struct DroState {
    std::vector<std::size_t> groups;  // populated group ids
    std::vector<double> w;            // aligned with `groups`
    explicit DroState(const LabeledDataset& ds) {
        std::vector<std::size_t> count(ds.A * ds.B, 0);
        for (std::size_t i = 0; i < ds.n(); ++i) count[ds.group(i)]++;
        for (std::size_t g = 0; g < count.size(); ++g)
            if (count[g] > 0) groups.push_back(g);
        w.assign(groups.size(), 1.0 / static_cast<double>(groups.size()));
    }
};

// One model update on a mini-batch. Returns (task objective, surrogate bound).
std::pair<double, double> model_step(BiasModel& m, Adam& opt, StatisticsNetwork* critic,
                                     const LabeledDataset& ds,
                                     const std::vector<std::size_t>& idx,
                                     const std::vector<int>& targets, const TrainConfig& cfg,
                                     RngState& perm_rng) {
    Matrix xb = take_rows(ds.X, idx);
    NodePtr feats = m.features(constant(xb, "xb"));
    NodePtr logits = m.head_apply(feats);
    NodePtr task = softmax_cross_entropy(logits, targets);

    NodePtr loss = task;
    double bound_val = 0.0;
    if (cfg.use_regularizer && cfg.beta != 0.0 && critic != nullptr) {
        std::vector<std::size_t> perm = perm_rng.permutation(idx.size());
        std::vector<int> yb = take_ints(ds.Y, idx);
        std::vector<int> zb = take_ints(ds.Z, idx);
        NodePtr bound = surrogate_bias_term(*critic, feats, yb, zb, ds.A, ds.B, perm);
        bound_val = bound->value.at(0);
        loss = add(task, scale(bound, cfg.beta));
    }
    double task_val = task->value.at(0);
    if (!std::isfinite(task_val))
        throw std::runtime_error("training loss is not finite");
    opt.zero_grad();
    backward(loss);
    opt.step();
    return {task_val, bound_val};
}

// Group DRO update: multiplicative weights on per-group mean losses.
double dro_step(BiasModel& m, Adam& opt, DroState& st, const LabeledDataset& ds,
                const std::vector<std::size_t>& idx, const std::vector<int>& targets,
                const TrainConfig& cfg) {
    Matrix xb = take_rows(ds.X, idx);
    NodePtr logits = m.logits(constant(xb, "xb"));
    NodePtr ce_rows = cross_entropy_rows(logits, targets);

    // Selector averaging rows of each populated group; groups absent from
    // this batch get a zero row and keep their current weight.
    std::size_t ng = st.groups.size();
    std::vector<std::size_t> slot(ds.A * ds.B, ng);
    for (std::size_t s = 0; s < ng; ++s) slot[st.groups[s]] = s;
    Matrix sel(ng, idx.size());
    std::vector<std::size_t> count(ng, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) count[slot[ds.group(idx[i])]]++;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::size_t s = slot[ds.group(idx[i])];
        sel(s, i) = 1.0 / static_cast<double>(count[s]);
    }
    NodePtr group_losses = matmul(constant(sel, "group_sel"), ce_rows);

    // Update weights first with detached losses, then form the objective.
    double zsum = 0.0;
    for (std::size_t s = 0; s < ng; ++s) {
        st.w[s] *= std::exp(cfg.dro_eta * group_losses->value.at(s));
        zsum += st.w[s];
    }
    for (double& w : st.w) w /= zsum;

    Matrix wrow(1, ng);
    for (std::size_t s = 0; s < ng; ++s) wrow(0, s) = st.w[s];
    NodePtr loss = matmul(constant(wrow, "group_w"), group_losses);
    double loss_val = loss->value.at(0);
    if (!std::isfinite(loss_val))
        throw std::runtime_error("training loss is not finite");
    opt.zero_grad();
    backward(loss);
    opt.step();
    return loss_val;
}

// One critic update maximizing the DV bound on (F, Y) vs Z with the model
// held fixed (features enter as constants).
double critic_step(BiasModel& m, StatisticsNetwork& critic, Adam& opt, const LabeledDataset& ds,
                   const std::vector<std::size_t>& idx, const TrainConfig& cfg,
                   RngState& perm_rng) {
    Matrix xb = take_rows(ds.X, idx);
    Matrix fb = m.features(xb);
    std::vector<int> yb = take_ints(ds.Y, idx);
    std::vector<int> zb = take_ints(ds.Z, idx);
    std::vector<std::size_t> perm = perm_rng.permutation(idx.size());
    NodePtr bound = surrogate_bias_term(critic, constant(fb, "fb"), yb, zb, ds.A, ds.B, perm);
    double val = bound->value.at(0);
    if (!std::isfinite(val) || std::abs(val) > cfg.critic.diverge_abs)
        throw std::runtime_error(
            "critic bound diverged (|" + fmt_g17(val) + "| > " +
            fmt_g17(cfg.critic.diverge_abs) + "); try a smaller critic lr or beta");
    NodePtr neg = scale(bound, -1.0);
    opt.zero_grad();
    backward(neg);
    opt.step();
    return val;
}

// Shared driver for all four methods.
TrainLog run_training(BiasModel& m, StatisticsNetwork* critic, const LabeledDataset& ds,
                      const TrainConfig& cfg) {
    cfg.validate(m.n_classes());
    if (ds.X.cols() != m.input_dim())
        throw std::invalid_argument("train: dataset width " + std::to_string(ds.X.cols()) +
                                    " does not match model input dim " +
                                    std::to_string(m.input_dim()));
    RngState base(cfg.seed);
    LabeledDataset data = ds;
    if (cfg.resample) {
        RngState rs = base.derive("resample");
        data = resample_by_class(ds, rs);
    }
    if (data.n() < 8) throw std::invalid_argument("train: need at least 8 rows");

    auto model_params = m.trainable_parameters();
    Adam opt_model(model_params, cfg.lr, cfg.weight_decay);
    std::unique_ptr<Adam> opt_critic;
    std::vector<NodePtr> critic_params;
    if (critic != nullptr) {
        critic_params = critic->parameters();
        opt_critic = std::make_unique<Adam>(critic_params, cfg.critic.lr);
    }

    TrainLog log;
    DroState dro(data);
    std::vector<Matrix> good_model = snapshot_params(m.parameters());
    std::vector<Matrix> good_critic =
        critic ? snapshot_params(critic_params) : std::vector<Matrix>{};
    int model_epoch = 0;
    int critic_epoch = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        bool is_critic_epoch =
            cfg.use_regularizer && !cfg.per_step_alternation && (epoch % 2 == 1);
        EpochLog el;
        el.epoch = epoch;
        el.critic_epoch = is_critic_epoch;
        try {
            if (is_critic_epoch) {
                if (cfg.cold_start_critic) {
                    StatisticsNetwork fresh = StatisticsNetwork::init(
                        critic->input_dim(), cfg.critic.hidden, cfg.critic.soft_clip,
                        base.derive("critic-init").derive(
                            static_cast<std::uint64_t>(critic_epoch) + 1));
                    auto fp = fresh.parameters();
                    for (std::size_t i = 0; i < critic_params.size(); ++i)
                        critic_params[i]->value = fp[i]->value;
                    opt_critic = std::make_unique<Adam>(critic_params, cfg.critic.lr);
                }
                set_requires_grad(critic_params, true);
                RngState shuf = base.derive("critic-shuffle").derive(
                    static_cast<std::uint64_t>(critic_epoch));
                auto order = shuf.permutation(data.n());
                auto batches = make_batches(order, cfg.batch);
                RngState perm_root = base.derive("dv-perm-critic").derive(
                    static_cast<std::uint64_t>(critic_epoch));
                double sum = 0.0;
                for (std::size_t bi = 0; bi < batches.size(); ++bi) {
                    RngState pr = perm_root.derive(bi);
                    sum += critic_step(m, *critic, *opt_critic, data, batches[bi], cfg, pr);
                }
                el.critic_bound = batches.empty() ? 0.0 : sum / batches.size();
                critic_epoch++;
            } else {
                if (critic != nullptr) set_requires_grad(critic_params, false);
                RngState shuf =
                    base.derive("shuffle").derive(static_cast<std::uint64_t>(model_epoch));
                auto order = shuf.permutation(data.n());
                auto batches = make_batches(order, cfg.batch);
                RngState noise_root =
                    base.derive("noise").derive(static_cast<std::uint64_t>(model_epoch));
                RngState perm_root = base.derive("dv-perm-model").derive(
                    static_cast<std::uint64_t>(model_epoch));
                RngState cperm_root = base.derive("dv-perm-critic-step").derive(
                    static_cast<std::uint64_t>(model_epoch));
                double task_sum = 0.0, reg_sum = 0.0, critic_sum = 0.0;
                for (std::size_t bi = 0; bi < batches.size(); ++bi) {
                    const auto& idx = batches[bi];
                    std::vector<int> targets = take_ints(data.Y, idx);
                    if (cfg.use_noise) {
                        RngState nb = noise_root.derive(bi);
                        targets = apply_label_noise(targets, cfg.rho, data.A, nb);
                    }
                    if (cfg.use_dro) {
                        task_sum += dro_step(m, opt_model, dro, data, idx, targets, cfg);
                    } else {
                        RngState pr = perm_root.derive(bi);
                        auto [tv, rv] = model_step(m, opt_model, critic, data, idx, targets,
                                                   cfg, pr);
                        task_sum += tv;
                        reg_sum += rv;
                    }
                    if (cfg.use_regularizer && cfg.per_step_alternation && critic != nullptr) {
                        set_requires_grad(critic_params, true);
                        RngState cp = cperm_root.derive(bi);
                        critic_sum +=
                            critic_step(m, *critic, *opt_critic, data, idx, cfg, cp);
                        set_requires_grad(critic_params, false);
                    }
                }
                if (!batches.empty()) {
                    el.task_loss = task_sum / batches.size();
                    el.reg_value = reg_sum / batches.size();
                    el.critic_bound = critic_sum / batches.size();
                }
                model_epoch++;
            }
        } catch (const std::runtime_error& e) {
            restore_params(m.parameters(), good_model);
            if (critic != nullptr) restore_params(critic_params, good_critic);
            throw std::runtime_error(std::string(e.what()) + " at epoch " +
                                     std::to_string(epoch) +
                                     "; model restored to the last completed epoch");
        }
        if (critic != nullptr) set_requires_grad(critic_params, true);
        el.theta_psi_checksum = params_checksum(m.parameters());
        el.phi_checksum = critic ? params_checksum(critic_params) : 0.0;
        good_model = snapshot_params(m.parameters());
        if (critic != nullptr) good_critic = snapshot_params(critic_params);
        log.epochs.push_back(el);
    }
    return log;
}

}  // namespace

BiasModel make_model(std::size_t input_dim, std::size_t n_classes, const TrainConfig& cfg) {
    RngState init = RngState(cfg.seed).derive("model-init");
    return BiasModel::init(input_dim, cfg.hidden, cfg.feature_dim, n_classes, init);
}

StatisticsNetwork make_training_critic(const BiasModel& m, const LabeledDataset& ds,
                                       const TrainConfig& cfg) {
    RngState init = RngState(cfg.seed).derive("critic-init");
    return StatisticsNetwork::init(m.feature_dim() + ds.A + ds.B, cfg.critic.hidden,
                                   cfg.critic.soft_clip, init);
}

TrainLog train_erm(BiasModel& m, const LabeledDataset& ds, const TrainConfig& cfg) {
    TrainConfig c = cfg;
    c.use_noise = false;
    c.use_regularizer = false;
    c.use_dro = false;
    return run_training(m, nullptr, ds, c);
}

TrainLog train_label_noise(BiasModel& m, const LabeledDataset& ds, const TrainConfig& cfg) {
    TrainConfig c = cfg;
    c.use_noise = true;
    c.use_regularizer = false;
    c.use_dro = false;
    return run_training(m, nullptr, ds, c);
}

TrainLog train_with_regularizer(BiasModel& m, StatisticsNetwork& critic, const LabeledDataset& ds,
                                const TrainConfig& cfg) {
    TrainConfig c = cfg;
    c.use_regularizer = true;
    if (critic.input_dim() != m.feature_dim() + ds.A + ds.B)
        throw std::invalid_argument(
            "train_with_regularizer: critic input dim " + std::to_string(critic.input_dim()) +
            " != feature_dim + A + B = " + std::to_string(m.feature_dim() + ds.A + ds.B));
    return run_training(m, &critic, ds, c);
}

TrainLog train_group_dro(BiasModel& m, const LabeledDataset& ds, const TrainConfig& cfg) {
    TrainConfig c = cfg;
    c.use_dro = true;
    c.use_noise = false;
    c.use_regularizer = false;
    return run_training(m, nullptr, ds, c);
}

void TrainLog::save_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "epoch,task_loss,reg_value,critic_bound,critic_epoch,theta_psi_checksum,phi_checksum\n";
    for (const auto& e : epochs) {
        f << e.epoch << ',' << fmt_g17(e.task_loss) << ',' << fmt_g17(e.reg_value) << ','
          << fmt_g17(e.critic_bound) << ',' << (e.critic_epoch ? 1 : 0) << ','
          << fmt_g17(e.theta_psi_checksum) << ',' << fmt_g17(e.phi_checksum) << '\n';
    }
    if (!f) throw std::runtime_error("write failed for " + path);
}

TrainLog TrainLog::load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
    TrainLog log;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        lineno++;
        if (line.empty()) continue;
        auto parts = split(line, ',');
        if (parts.size() != 7)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 7 fields, got " + std::to_string(parts.size()));
        EpochLog e;
        e.epoch = static_cast<int>(parse_int(parts[0], "epoch"));
        e.task_loss = parse_double(parts[1], "task_loss");
        e.reg_value = parse_double(parts[2], "reg_value");
        e.critic_bound = parse_double(parts[3], "critic_bound");
        e.critic_epoch = parse_int(parts[4], "critic_epoch") != 0;
        e.theta_psi_checksum = parse_double(parts[5], "theta_psi_checksum");
        e.phi_checksum = parse_double(parts[6], "phi_checksum");
        log.epochs.push_back(e);
    }
    return log;
}

ProbeResult linear_probe_experiment(BiasModel& m, const LabeledDataset& ds_train,
                                    const LabeledDataset& ds_test, const TrainConfig& cfg,
                                    const ReportConfig& rcfg) {
    cfg.validate(m.n_classes());
    ProbeResult out;
    ReportConfig before_cfg = rcfg;
    out.before = full_report(m, ds_test, before_cfg);

    Matrix f_test_before = m.features(ds_test.X);

    RngState base(cfg.seed);
    m.freeze_extractor();
    if (!cfg.keep_head_weights) {
        RngState hr = base.derive("probe-head-init");
        m.reinit_head(hr);
    }

    LabeledDataset data = ds_train;
    if (cfg.resample) {
        RngState rs = base.derive("probe-resample");
        data = resample_by_class(ds_train, rs);
    }
    // Extractor is frozen, so features can be computed once.
    Matrix f_train = m.features(data.X);
    auto head_params = m.head_parameters();
    Adam opt(head_params, cfg.lr, cfg.weight_decay);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngState shuf = base.derive("probe-shuffle").derive(static_cast<std::uint64_t>(epoch));
        auto order = shuf.permutation(data.n());
        auto batches = make_batches(order, cfg.batch);
        for (const auto& idx : batches) {
            Matrix fb = take_rows(f_train, idx);
            std::vector<int> targets = take_ints(data.Y, idx);
            NodePtr logits = m.head_apply(constant(fb, "fb"));
            NodePtr loss = softmax_cross_entropy(logits, targets);
            if (!std::isfinite(loss->value.at(0)))
                throw std::runtime_error("probe loss is not finite at epoch " +
                                         std::to_string(epoch));
            opt.zero_grad();
            backward(loss);
            opt.step();
        }
    }

    Matrix f_test_after = m.features(ds_test.X);
    out.features_identical =
        f_test_before.rows() == f_test_after.rows() &&
        f_test_before.cols() == f_test_after.cols() &&
        std::memcmp(f_test_before.data().data(), f_test_after.data().data(),
                    f_test_before.size() * sizeof(double)) == 0;

    ReportConfig after_cfg = rcfg;
    after_cfg.seed = rcfg.seed + 0x9e3779b97f4a7c15ULL;  // distinct estimator stream
    out.after = full_report(m, ds_test, after_cfg);
    return out;
}

}  // namespace cobias
