#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cobias {

enum class Estimator { exact_discrete, dv_neural, gaussian_closed_form };

struct MIEstimate {
    double value = 0.0;  // nats
    Estimator estimator = Estimator::exact_discrete;
    bool is_lower_bound = false;
    std::optional<std::size_t> n_samples;
};

// Dense joint probability table over 2 or 3 discrete variables.
class ContingencyTable {
public:
    // explicit probabilities; must be >= 0 and sum to 1 within 1e-12 of slack
    static ContingencyTable from_probs(std::vector<std::size_t> cards, std::vector<double> probs);
    // maximum-likelihood normalization of sample counts
    static ContingencyTable from_counts(std::vector<std::size_t> cards,
                                        std::vector<std::size_t> counts);
    // tabulate aligned label vectors (2 or 3 of them)
    static ContingencyTable from_samples(const std::vector<int>& u, const std::vector<int>& v,
                                         std::size_t card_u, std::size_t card_v);
    static ContingencyTable from_samples(const std::vector<int>& u, const std::vector<int>& v,
                                         const std::vector<int>& w, std::size_t card_u,
                                         std::size_t card_v, std::size_t card_w);

    std::size_t arity() const { return cards_.size(); }
    const std::vector<std::size_t>& cardinalities() const { return cards_; }
    double prob(std::size_t i, std::size_t j) const;
    double prob(std::size_t i, std::size_t j, std::size_t k) const;
    const std::vector<double>& probs() const { return probs_; }

    // marginal over one axis
    std::vector<double> marginal(std::size_t axis) const;
    // arity-3 only: collapse to the 2-variable joint of the two kept axes
    ContingencyTable marginalize_to(std::size_t axis_a, std::size_t axis_b) const;

    void save_csv(std::ostream& out) const;
    static ContingencyTable load_csv(std::istream& in);

private:
    ContingencyTable(std::vector<std::size_t> cards, std::vector<double> probs);
    std::size_t index(const std::vector<std::size_t>& idx) const;
    std::vector<std::size_t> cards_;
    std::vector<double> probs_;
};

// Shannon entropy of the marginal on `axis`, in nats; 0 ln 0 := 0
double entropy(const ContingencyTable& t, std::size_t axis);
double entropy(const std::vector<double>& dist);

// I(U;V) of an arity-2 table
MIEstimate exact_mi(const ContingencyTable& t);
// Miller-Madow bias correction for sample-built tables: adds
// (nonzero cells - 1) / (2n). Off unless requested.
MIEstimate exact_mi(const ContingencyTable& t, std::size_t n_samples, bool miller_madow);

// I(U;V|W) of an arity-3 table; cond_axis names W. Zero-probability
// conditioning slices contribute nothing.
MIEstimate exact_conditional_mi(const ContingencyTable& t, std::size_t cond_axis);

// closed-form MI of a bivariate standard Gaussian with correlation rho
double gaussian_mi_oracle(double rho);

struct NoiseCurvePoint {
    double rho;
    double mi_z_ynoisy;          // I(Z; Y~)
    double mi_y_ynoisy;          // I(Y; Y~)
    std::optional<double> ratio;  // R = I(Z;Y~) / I(Y;Y~); absent when denominator is 0
};

// Composes the symmetric label-noise channel p(Y~=k|Y=y) = rho/(K-1), k != y
// onto an (Y,Z) joint and evaluates both MIs exactly at each rho.
std::vector<NoiseCurvePoint> label_noise_mi_curve(const ContingencyTable& joint_yz,
                                                  const std::vector<double>& rhos, std::size_t K);

}  // namespace cobias
