#pragma once

#include <cstdint>
#include <vector>

#include "invrec/dataset.hpp"
#include "invrec/invariant_model.hpp"

namespace invrec {

struct TrainConfig {
    double learning_rate = 0.05;
    long epochs = 20000;
    double target_loss = 1e-5;
    std::uint64_t seed = 0;
    long log_every = 100;
    /// Multiplies the N(0, 1/fan_in) initialization (see train_model).
    double init_scale = 1.0;

    void validate() const;
};

struct HistoryRow {
    long epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    double min_margin = 0.0;
};

struct TrainStats {
    double loss = 0.0;
    double accuracy = 0.0;
    double min_margin = 0.0;
};

struct TrainResult {
    std::vector<HistoryRow> history;
    long epochs_run = 0;
    TrainStats final;
};

/// (1/n) sum log(1 + exp(-y_i phi(x_i)))
double bce_loss(const InvariantModel& model, const LabeledDataset& data);

TrainStats evaluate_fit(const InvariantModel& model, const LabeledDataset& data);

/// Full-batch constant-step gradient descent on the BCE loss. Stops after
/// config.epochs or once the loss reaches config.target_loss. History rows
/// are logged at epoch 0, every log_every epochs and at the final epoch.
/// Throws DivergenceError on a non-finite loss.
TrainResult train(InvariantModel& model, const LabeledDataset& data, const TrainConfig& config);

/// BCE loss and its parameter gradient (parallel over samples, ordered reduction).
double bce_loss_and_grad(const InvariantModel& model, const LabeledDataset& data, std::span<double> grad);

struct KktFit {
    double residual = 0.0;          ///< ||theta - sum lambda_i y_i grad phi(x_i)|| / ||theta||
    std::vector<double> lambdas;    ///< >= 0
};

/// Nonnegative least-squares fit of theta onto {y_i grad_theta phi(x_i)} by
/// accelerated projected gradient with a fixed iteration budget.
KktFit kkt_residual(const InvariantModel& model, const LabeledDataset& data, int iterations = 20000);

}  // namespace invrec
