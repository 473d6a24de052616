#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mrmae/baselines.hpp"
#include "mrmae/dataset.hpp"
#include "mrmae/ensemble.hpp"
#include "mrmae/masking.hpp"

namespace mrmae {

// 100 * (1 - mean_{j in scope} |pred_j - truth_j|). Can be negative. On
// normalized data 100 is a perfect match and mean-prediction lands near the
// paper's 0% convention (exactly where the mean absolute deviation is 1).
double accuracy(std::span<const double> truth, std::span<const double> prediction,
                std::span<const std::size_t> scope);

// Accuracy of always predicting the training means, averaged over the given
// rows; logged as the calibration point for the 0% convention.
double mean_baseline_accuracy(const LayeredDataset& dataset, const FeatureMeans& means,
                              std::span<const std::size_t> rows,
                              std::span<const std::size_t> scope);

// One entrant in a masking sweep. predict_outputs receives the raw dataset
// row (may contain NaN), the masked input features for this trial, and a
// per-row derived seed for stochastic predictors; it returns predictions in
// task-output order.
struct SweepModel {
    std::string name;
    std::function<std::vector<double>(std::span<const double> row, const Mask& masked_inputs,
                                      std::uint64_t seed)>
        predict_outputs;
};

// Task-blind MAE evaluated on the task: non-input features and the sampled
// input mask are imputed, one forward pass, outputs read off.
SweepModel sweep_model_mae(std::string name, const MlpModel& model, const FeatureMeans& means,
                           const ResolvedTask& task, const LayeredDataset& dataset);

// Same, with the implicit ensemble on top. If the ensemble's target size ends
// up below the base mask (heavy sweep masking), the members degrade to the
// base mask itself.
SweepModel sweep_model_mae_ensemble(std::string name, const MlpModel& model,
                                    const FeatureMeans& means, const ResolvedTask& task,
                                    const LayeredDataset& dataset, EnsembleConfig ensemble);

SweepModel sweep_model_task_mlp(std::string name, const MlpModel& model, const FeatureMeans& means,
                                const ResolvedTask& task);

SweepModel sweep_model_linear(std::string name, const LinearModel& model, const FeatureMeans& means,
                              const ResolvedTask& task);

struct SweepConfig {
    std::vector<double> fractions; // strictly increasing, within [0, 0.95]
    std::size_t trials = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SweepRow {
    std::string model;
    double fraction = 0.0;
    double mean_acc = 0.0;
    double std_acc = 0.0; // population std over trials
    std::size_t trials = 0;
};

// For each fraction and trial, masks that share of the task's input features
// (outputs are never masked) and scores every model on the test rows.
// Trial seeds derive from (fraction, trial, model), so runs are reproducible
// and shards can be computed independently.
std::vector<SweepRow> masking_sweep(const SweepConfig& cfg, const LayeredDataset& dataset,
                                    const ResolvedTask& task,
                                    const std::vector<SweepModel>& models);

// CSV: model,fraction,mean_acc,std_acc,trials.
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

} // namespace mrmae
