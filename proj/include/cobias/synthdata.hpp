#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cobias/matrix.hpp"
#include "cobias/rng.hpp"

namespace cobias {

// Alternative (corr, signal_sep) pair applied to the test split only,
// standing in for a train/test domain shift.
struct ShiftSpec {
    double corr;
    double signal_sep;
};

struct SpuriousSpec {
    std::size_t n = 4000;           // train size; test split drawn with the same n
    std::size_t A = 2;              // target classes
    std::size_t B = 2;              // bias classes
    double corr = 0.95;             // p(Z = matched value | Y); in [1/B, 1]
    std::size_t d_core = 2;         // dims carrying the Y signal
    std::size_t d_bias = 2;         // dims carrying the Z signal
    std::size_t d_noise = 60;       // pure-noise dims
    double signal_sep = 2.0;        // mean separation of the signal patterns
    double noise_sigma = 1.0;
    std::optional<ShiftSpec> shift; // test-split override
    std::uint64_t seed = 0;

    std::size_t input_dim() const { return d_core + d_bias + d_noise; }
    void validate() const;
};

struct LabeledDataset {
    Matrix X;            // n x (d_core + d_bias + d_noise)
    std::vector<int> Y;  // in {0..A-1}
    std::vector<int> Z;  // in {0..B-1}
    std::size_t A = 0;
    std::size_t B = 0;

    std::size_t n() const { return Y.size(); }
    std::size_t group(std::size_t i) const {
        return static_cast<std::size_t>(Y[i]) * B + static_cast<std::size_t>(Z[i]);
    }
};

struct DatasetPair {
    LabeledDataset train;
    LabeledDataset test;
};

// Y uniform over A; Z | Y=y equals y mod B with probability corr, otherwise
// uniform over the remaining values; X places signal_sep at core dim
// (y mod d_core) and bias dim (z mod d_bias) plus N(0, sigma^2) everywhere.
// The test split is group-balanced (corr = 1/B) unless the shift override
// says otherwise. Fully determined by spec.seed.
DatasetPair generate(const SpuriousSpec& spec);

// Symmetric label-noise channel: each label moves to any one of the K-1 other
// classes with total probability rho, independently per call.
std::vector<int> apply_label_noise(const std::vector<int>& y, double rho, std::size_t K,
                                   RngState& rng);

// Resample with replacement so every target class has equal expected
// frequency; output size equals input size.
LabeledDataset resample_by_class(const LabeledDataset& ds, RngState& rng);

void save_csv(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_csv(const std::string& path);

}  // namespace cobias
