#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cobias/fairmetrics.hpp"
#include "cobias/mine.hpp"
#include "cobias/model.hpp"
#include "cobias/synthdata.hpp"

namespace cobias {

struct TrainConfig {
    int epochs = 50;
    int batch = 256;
    double lr = 1e-4;
    double weight_decay = 1e-4;
    double beta = 5.0;    // regularizer weight
    double rho = 0.2;     // label-noise rate
    double dro_eta = 0.01;
    bool resample = true; // class resampling applied to every method
    bool per_step_alternation = false;  // minimax: alternate per step instead of per epoch
    bool cold_start_critic = false;     // reinitialize phi at each of its epochs
    bool keep_head_weights = false;     // linear probe: fine-tune instead of reinit
    // composable method flags; all off = plain ERM
    bool use_noise = false;
    bool use_regularizer = false;
    bool use_dro = false;
    std::vector<std::size_t> hidden{32};
    std::size_t feature_dim = 16;
    EstimatorConfig critic;  // architecture and lr of the training critic
    std::uint64_t seed = 0;

    void validate(std::size_t n_classes) const;
};

struct EpochLog {
    int epoch = 0;
    double task_loss = 0.0;     // mean cross entropy over the epoch's batches
    double reg_value = 0.0;     // mean surrogate bound (model epochs, regularizer on)
    double critic_bound = 0.0;  // mean DV bound (critic epochs)
    bool critic_epoch = false;
    double theta_psi_checksum = 0.0;  // sum of all model parameters after the epoch
    double phi_checksum = 0.0;        // sum of all critic parameters after the epoch
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    void save_csv(const std::string& path) const;
    static TrainLog load_csv(const std::string& path);
};

// Deterministic model construction for a config (init stream "model-init").
BiasModel make_model(std::size_t input_dim, std::size_t n_classes, const TrainConfig& cfg);
// Critic for the minimax regularizer; input dim d_f + A + B.
StatisticsNetwork make_training_critic(const BiasModel& m, const LabeledDataset& ds,
                                       const TrainConfig& cfg);

// Mini-batch cross-entropy minimization with class resampling.
TrainLog train_erm(BiasModel& m, const LabeledDataset& ds, const TrainConfig& cfg);
// ERM with each mini-batch's labels passed through the symmetric noise
// channel, fresh randomness per batch.
TrainLog train_label_noise(BiasModel& m, const LabeledDataset& ds, const TrainConfig& cfg);
// Minimax alternation: even epochs update (theta, psi) on ce + beta * bound
// with phi frozen; odd epochs update phi on the DV bound with (theta, psi)
// frozen. The critic is warm-started across its epochs.
TrainLog train_with_regularizer(BiasModel& m, StatisticsNetwork& critic, const LabeledDataset& ds,
                                const TrainConfig& cfg);
// Multiplicative-weights worst-case group reweighting.
TrainLog train_group_dro(BiasModel& m, const LabeledDataset& ds, const TrainConfig& cfg);

struct ProbeResult {
    GroupReport before;
    GroupReport after;
    bool features_identical = false;  // byte-level check of the eval feature matrix
};

// Freezes the extractor of a trained model, reinitializes (or keeps) the
// head, retrains it with class resampling on ds_train, and reports on
// ds_test before and after.
ProbeResult linear_probe_experiment(BiasModel& m, const LabeledDataset& ds_train,
                                    const LabeledDataset& ds_test, const TrainConfig& cfg,
                                    const ReportConfig& rcfg);

}  // namespace cobias
