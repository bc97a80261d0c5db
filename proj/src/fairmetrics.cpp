#include "cobias/fairmetrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cobias/textio.hpp"

namespace cobias {

GroupReport group_accuracies(const std::vector<int>& pred, const std::vector<int>& Y,
                             const std::vector<int>& Z, std::size_t A, std::size_t B) {
    if (pred.size() != Y.size() || pred.size() != Z.size())
        throw std::invalid_argument("group_accuracies: pred, Y, Z must align");
    if (pred.empty()) throw std::invalid_argument("group_accuracies: empty inputs");
    GroupReport r;
    r.A = A;
    r.B = B;
    r.group_acc.assign(A * B, std::numeric_limits<double>::quiet_NaN());
    r.group_n.assign(A * B, 0);
    std::vector<std::size_t> correct(A * B, 0);
    std::size_t total_correct = 0;
    for (std::size_t i = 0; i < Y.size(); ++i) {
        if (Y[i] < 0 || static_cast<std::size_t>(Y[i]) >= A || Z[i] < 0 ||
            static_cast<std::size_t>(Z[i]) >= B)
            throw std::invalid_argument("group_accuracies: label out of range at row " +
                                        std::to_string(i));
        std::size_t g = static_cast<std::size_t>(Y[i]) * B + static_cast<std::size_t>(Z[i]);
        r.group_n[g]++;
        if (pred[i] == Y[i]) {
            correct[g]++;
            total_correct++;
        }
    }
    double sum = 0.0, mn = 2.0, mx = -1.0;
    std::size_t populated = 0;
    for (std::size_t g = 0; g < A * B; ++g) {
        if (r.group_n[g] == 0) {
            r.has_empty_groups = true;
            continue;
        }
        double acc = static_cast<double>(correct[g]) / static_cast<double>(r.group_n[g]);
        r.group_acc[g] = acc;
        sum += acc;
        mn = std::min(mn, acc);
        mx = std::max(mx, acc);
        populated++;
    }
    if (populated == 0) throw std::invalid_argument("group_accuracies: all groups empty");
    r.unbiased_acc = sum / static_cast<double>(populated);
    r.worst_group_acc = mn;
    r.disparity = mx - mn;
    r.average_acc = static_cast<double>(total_correct) / static_cast<double>(Y.size());
    return r;
}

ExtraFairness extra_fairness(const std::vector<int>& pred, const std::vector<int>& Y,
                             const std::vector<int>& Z) {
    if (pred.size() != Y.size() || pred.size() != Z.size())
        throw std::invalid_argument("extra_fairness: pred, Y, Z must align");
    std::size_t n = Y.size();
    if (n == 0) throw std::invalid_argument("extra_fairness: empty inputs");
    for (std::size_t i = 0; i < n; ++i)
        if (Y[i] < 0 || Y[i] > 1 || Z[i] < 0 || Z[i] > 1 || pred[i] < 0 || pred[i] > 1)
            throw std::invalid_argument("extra_fairness: defined for binary Y, Z only");

    // per-z tallies
    double nz[2] = {0, 0};            // samples with Z = z
    double pos_pred[2] = {0, 0};      // Yhat = 1 and Z = z
    double pos_true[2] = {0, 0};      // Y = 1 and Z = z
    double tp[2] = {0, 0};            // Yhat = 1, Y = 1, Z = z
    for (std::size_t i = 0; i < n; ++i) {
        int z = Z[i];
        nz[z] += 1;
        if (pred[i] == 1) pos_pred[z] += 1;
        if (Y[i] == 1) {
            pos_true[z] += 1;
            if (pred[i] == 1) tp[z] += 1;
        }
    }
    if (nz[0] == 0 || nz[1] == 0)
        throw std::invalid_argument("extra_fairness: a bias-value slice is empty");

    // bias value more associated with the positive class
    int zstar = (pos_true[1] / nz[1] > pos_true[0] / nz[0]) ? 1 : 0;
    ExtraFairness out{};
    double dn = static_cast<double>(n);
    out.BA = pos_pred[zstar] / dn - pos_true[zstar] / dn;
    if (pos_true[0] > 0 && pos_true[1] > 0)
        out.EO = std::abs(tp[0] / pos_true[0] - tp[1] / pos_true[1]);
    out.DI = std::abs(pos_pred[0] / nz[0] - pos_pred[1] / nz[1]);
    return out;
}

GroupReport full_report(const BiasModel& m, const LabeledDataset& ds, const ReportConfig& cfg) {
    // features and predictions computed exactly once
    Matrix F = m.features(ds.X);
    Matrix lg = m.head_logits(F);
    std::vector<int> pred(lg.rows());
    for (std::size_t i = 0; i < lg.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < lg.cols(); ++j)
            if (lg(i, j) > lg(i, best)) best = j;
        pred[i] = static_cast<int>(best);
    }
    GroupReport r = group_accuracies(pred, ds.Y, ds.Z, ds.A, ds.B);
    if (ds.A == 2 && ds.B == 2) {
        ExtraFairness ef = extra_fairness(pred, ds.Y, ds.Z);
        r.BA = ef.BA;
        r.EO = ef.EO;
        r.DI = ef.DI;
    }
    auto joint = ContingencyTable::from_samples(ds.Y, ds.Z, ds.A, ds.B);
    auto curve = label_noise_mi_curve(joint, {cfg.rho}, ds.A);
    r.ratio_R = curve[0].ratio;
    if (cfg.with_cobias)
        r.cobias = estimate_cobias(F, ds.Z, ds.Y, cfg.estimator,
                                   RngState(cfg.seed).derive("report-cobias"));
    return r;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

}  // namespace

std::string GroupReport::to_json() const {
    nlohmann::json j;
    j["A"] = A;
    j["B"] = B;
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t a = 0; a < A; ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t b = 0; b < B; ++b) {
            double v = group_acc[a * B + b];
            row.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
        }
        grid.push_back(row);
    }
    j["group_acc"] = grid;
    j["group_n"] = group_n;
    j["unbiased_acc"] = unbiased_acc;
    j["worst_group_acc"] = worst_group_acc;
    j["disparity"] = disparity;
    j["average_acc"] = average_acc;
    j["has_empty_groups"] = has_empty_groups;
    j["BA"] = opt_json(BA);
    j["EO"] = opt_json(EO);
    j["DI"] = opt_json(DI);
    if (cobias) {
        j["cobias"] = cobias->value;
        j["cobias_clamped"] = cobias->clamped;
        j["mi_f_zy"] = cobias->mi_f_zy.value;
        j["mi_f_y"] = cobias->mi_f_y.value;
    } else {
        j["cobias"] = nullptr;
    }
    j["ratio_R"] = opt_json(ratio_R);
    return j.dump(2);
}

std::string GroupReport::csv_header() {
    return "unbiased_acc,worst_group_acc,disparity,average_acc,BA,EO,DI,cobias,cobias_clamped,"
           "ratio_R";
}

namespace {

std::string opt_csv(const std::optional<double>& v) {
    return v && std::isfinite(*v) ? fmt_g17(*v) : "";
}

}  // namespace

std::string GroupReport::to_csv_row() const {
    std::string row = fmt_g17(unbiased_acc) + "," + fmt_g17(worst_group_acc) + "," +
                      fmt_g17(disparity) + "," + fmt_g17(average_acc) + "," + opt_csv(BA) + "," +
                      opt_csv(EO) + "," + opt_csv(DI) + ",";
    row += cobias ? fmt_g17(cobias->value) : "";
    row += ",";
    row += cobias ? fmt_g17(cobias->clamped) : "";
    row += ",";
    row += opt_csv(ratio_R);
    return row;
}

}  // namespace cobias
