#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mrmae/dataset.hpp"
#include "mrmae/nnet.hpp"
#include "mrmae/training.hpp"

namespace mrmae {

// Which layers a task-specific model maps from and to.
struct TaskSpec {
    std::vector<std::string> input_layers;
    std::vector<std::string> output_layers;
};

struct ResolvedTask {
    TaskSpec spec;
    std::vector<std::size_t> input_features;  // ascending
    std::vector<std::size_t> output_features; // ascending
};

// Validates: both sets non-empty, disjoint, and known to the dataset.
ResolvedTask resolve_task(const LayeredDataset& dataset, const TaskSpec& spec);

struct LinearModel {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights; // outputs x inputs, row-major
    std::vector<double> bias;    // outputs
    double l1_penalty = 0.0;
};

struct LinearFitOptions {
    double ridge = 1e-8;           // OLS conditioning on the normalized Gram
    double tol = 1e-6;             // lasso duality-gap tolerance (relative)
    std::size_t max_sweeps = 10000;
    const std::vector<double>* row_weights = nullptr; // per dataset row index
};

// l1_penalty == 0: normal equations with a tiny ridge. l1_penalty > 0:
// cyclic coordinate descent with soft thresholding, stopping on the lasso
// duality gap; throws FitError with the sweep count if it fails to converge.
// Inputs with missing values are imputed with training means; rows with a
// missing output are dropped from the fit.
LinearModel fit_linear(const LayeredDataset& dataset, const ResolvedTask& task, double l1_penalty,
                       const LinearFitOptions& options = {});

std::vector<double> predict_linear(const LinearModel& model, std::span<const double> inputs);

// Two-hidden-layer template in -> h -> h -> out: parameter count as a
// function of the hidden width.
std::size_t task_mlp_param_count(std::size_t inputs, std::size_t outputs, std::size_t hidden);

// Smallest-error hidden width whose parameter count lands within
// tolerance_fraction of the budget; ConfigError if none does.
std::size_t solve_hidden_width(std::size_t inputs, std::size_t outputs, std::size_t param_budget,
                               double tolerance_fraction = 0.02);

struct TaskMlpConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    LossBase loss = LossBase::L1;
    OptimConfig optim{OptimKind::Sgd, 0.01, 0.9};
    Activation activation = Activation::Relu;
    std::uint64_t seed = 0;
    const std::vector<double>* row_weights = nullptr;
};

struct TaskMlpResult {
    MlpModel model;
    std::size_t hidden_width = 0;
    std::vector<double> epoch_loss;
};

// Supervised input->output MLP sized to the parameter budget (the "same
// number of parameters" comparison condition).
TaskMlpResult fit_task_mlp(const LayeredDataset& dataset, const ResolvedTask& task,
                           std::size_t param_budget, const TaskMlpConfig& cfg);

// Prediction with the task-model input convention: masked or missing inputs
// are imputed with the training means of the input features.
std::vector<double> task_inputs_from_row(std::span<const double> row,
                                         const std::vector<std::size_t>& input_features,
                                         const FeatureMeans& means,
                                         std::span<const std::uint32_t> masked_inputs = {});

struct LassoSelection {
    double penalty = 0.0;
    double val_accuracy = 0.0;
    std::vector<std::pair<double, double>> grid_scores; // (penalty, accuracy)
};

// Grid search over penalties, scored on a held-out chronological suffix of
// the training split (validation_fraction of the training rows). Ties go to
// the smaller penalty.
LassoSelection select_lasso_penalty(const LayeredDataset& dataset, const ResolvedTask& task,
                                    std::span<const double> penalty_grid,
                                    double validation_fraction = 0.2);

} // namespace mrmae
