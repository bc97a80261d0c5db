#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cobias/mine.hpp"
#include "cobias/synthdata.hpp"

namespace cobias {

struct GroupReport {
    std::size_t A = 0, B = 0;
    std::vector<double> group_acc;       // A x B grid, row-major; NaN for empty groups
    std::vector<std::size_t> group_n;    // A x B counts
    double unbiased_acc = 0.0;           // mean over populated groups
    double worst_group_acc = 0.0;        // min over populated groups
    double disparity = 0.0;              // max - min over populated groups
    double average_acc = 0.0;            // plain sample accuracy
    bool has_empty_groups = false;
    // binary-only extras; absent when Y or Z is not binary, or undefined
    std::optional<double> BA;
    std::optional<double> EO;
    std::optional<double> DI;
    std::optional<CobiasEstimate> cobias;
    std::optional<double> ratio_R;

    std::string to_json() const;
    static std::string csv_header();
    std::string to_csv_row() const;
};

// Per-group accuracy grid plus the aggregate scores. Empty groups are
// excluded from aggregates and flagged rather than erroring.
GroupReport group_accuracies(const std::vector<int>& pred, const std::vector<int>& Y,
                             const std::vector<int>& Z, std::size_t A, std::size_t B);

struct ExtraFairness {
    double BA;
    std::optional<double> EO;  // undefined when a z-slice has no positives
    double DI;
};

// Binary-only fairness trio. z* below is the bias value more associated with
// the positive class in the data.
//   BA = p(Yhat=1, z=z*) - p(Y=1, z=z*)           (signed)
//   EO = |TPR(z=0) - TPR(z=1)| on the positive class
//   DI = |p(Yhat=1 | z=0) - p(Yhat=1 | z=1)|
ExtraFairness extra_fairness(const std::vector<int>& pred, const std::vector<int>& Y,
                             const std::vector<int>& Z);

struct ReportConfig {
    EstimatorConfig estimator;
    bool with_cobias = true;
    double rho = 0.0;  // noise rate used for the reported ratio R
    std::uint64_t seed = 0;
};

// Predictions and features computed once over ds; fills the accuracy grid,
// the binary extras when applicable, the Cobias estimate on (F, Z, Y), and
// the analytic ratio R of the dataset's empirical (Y, Z) joint under the
// configured noise rate.
GroupReport full_report(const BiasModel& m, const LabeledDataset& ds, const ReportConfig& cfg);

}  // namespace cobias
