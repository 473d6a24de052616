#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mrmae {

enum class Activation { Relu, Tanh };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully-connected network. Hidden layers use the configured activation, the
// output layer is identity. weights[l] is out x in, row-major.
struct MlpModel {
    std::vector<std::size_t> layer_dims;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    Activation activation = Activation::Relu;

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }
    std::size_t param_count() const;
    bool all_finite() const;
};

// Glorot-uniform initialization: +-sqrt(6 / (fan_in + fan_out)) per layer.
MlpModel init_mlp(std::vector<std::size_t> layer_dims, Activation activation, std::uint64_t seed);

struct ForwardCache {
    std::vector<std::vector<double>> activations; // a_0 = input, ..., a_L = output
    std::vector<std::vector<double>> preacts;     // z_1 ... z_L
};

std::vector<double> forward(const MlpModel& model, std::span<const double> input);
const std::vector<double>& forward_cached(const MlpModel& model, std::span<const double> input,
                                          ForwardCache& cache);

struct Gradients {
    std::vector<std::vector<double>> dweights;
    std::vector<std::vector<double>> dbiases;
    std::vector<double> dinput;

    void init_like(const MlpModel& model);
    void set_zero();
    void accumulate(const Gradients& other);
    void scale(double factor);
};

// Exact gradients of the scalar whose output gradient is grad_out, evaluated
// at the inputs recorded in cache.
void backward(const MlpModel& model, const ForwardCache& cache, std::span<const double> grad_out,
              Gradients& out);

enum class OptimKind { Sgd, Momentum };

struct OptimConfig {
    OptimKind kind = OptimKind::Sgd;
    double learning_rate = 0.01;
    double beta = 0.9; // momentum only
};

struct OptimState {
    OptimConfig config;
    std::vector<std::vector<double>> velocity_w;
    std::vector<std::vector<double>> velocity_b;

    static OptimState create(const OptimConfig& config, const MlpModel& model);
};

// sgd: theta -= lr * g.  momentum: v = beta v + g; theta -= lr * v.
// Throws TrainError if any parameter becomes non-finite.
void step(MlpModel& model, const Gradients& grads, OptimState& optim);

// Sidecar metadata stored next to the binary checkpoint as <path>.json.
struct CheckpointMeta {
    std::string model_kind = "mae"; // mae | mlp | linear | lasso
    std::uint64_t seed = 0;
    std::string rng_identity;
    std::string norm_stats_hash; // hex
    std::vector<std::string> task_inputs;  // task-specific models only
    std::vector<std::string> task_outputs;
    double l1_penalty = 0.0; // lasso only
};

// Binary container: magic "MRMAE1", u32 dim count, u32 dims, then per layer
// the weight matrix (row-major) followed by the bias vector, all LE f64.
void save_checkpoint(const std::filesystem::path& path, const MlpModel& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
    MlpModel model;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

} // namespace mrmae
