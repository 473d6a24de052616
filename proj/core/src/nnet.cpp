#include "mrmae/nnet.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include <nlohmann/json.hpp>

#include "mrmae/errors.hpp"
#include "mrmae/io_util.hpp"
#include "mrmae/rng.hpp"

namespace mrmae {

using json = nlohmann::json;

std::string activation_name(Activation a) {
    return a == Activation::Relu ? "relu" : "tanh";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    throw ConfigError("unknown activation '" + name + "'");
}

std::size_t MlpModel::param_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        total += weights[l].size() + biases[l].size();
    }
    return total;
}

bool MlpModel::all_finite() const {
    for (std::size_t l = 0; l < num_layers(); ++l) {
        for (double w : weights[l]) {
            if (!std::isfinite(w)) return false;
        }
        for (double b : biases[l]) {
            if (!std::isfinite(b)) return false;
        }
    }
    return true;
}

MlpModel init_mlp(std::vector<std::size_t> layer_dims, Activation activation, std::uint64_t seed) {
    if (layer_dims.size() < 2) throw ConfigError("mlp needs at least input and output dims");
    for (std::size_t d : layer_dims) {
        if (d == 0) throw ConfigError("mlp layer dims must be positive");
    }
    MlpModel model;
    model.layer_dims = std::move(layer_dims);
    model.activation = activation;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
        const std::size_t in = model.layer_dims[l];
        const std::size_t out = model.layer_dims[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        std::vector<double> w(out * in);
        for (double& v : w) v = rng.uniform(-bound, bound);
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(out, 0.0);
    }
    return model;
}

namespace {

void affine(const std::vector<double>& w, const std::vector<double>& b, std::size_t out_dim,
            std::size_t in_dim, const std::vector<double>& a, std::vector<double>& z) {
    z.resize(out_dim);
    for (std::size_t o = 0; o < out_dim; ++o) {
        const double* row = w.data() + o * in_dim;
        double acc = b[o];
        for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * a[i];
        z[o] = acc;
    }
}

void activate(Activation act, const std::vector<double>& z, std::vector<double>& a) {
    a.resize(z.size());
    if (act == Activation::Relu) {
        for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
    } else {
        for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::tanh(z[i]);
    }
}

} // namespace

const std::vector<double>& forward_cached(const MlpModel& model, std::span<const double> input,
                                          ForwardCache& cache) {
    if (input.size() != model.input_dim()) {
        throw DataError("forward: input length " + std::to_string(input.size()) +
                        " does not match model input dim " + std::to_string(model.input_dim()));
    }
    for (double v : input) {
        if (!std::isfinite(v)) throw DataError("forward: non-finite input");
    }
    const std::size_t layers = model.num_layers();
    cache.activations.resize(layers + 1);
    cache.preacts.resize(layers);
    cache.activations[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < layers; ++l) {
        affine(model.weights[l], model.biases[l], model.layer_dims[l + 1], model.layer_dims[l],
               cache.activations[l], cache.preacts[l]);
        if (l + 1 == layers) {
            cache.activations[l + 1] = cache.preacts[l]; // identity output
        } else {
            activate(model.activation, cache.preacts[l], cache.activations[l + 1]);
        }
    }
    return cache.activations[layers];
}

std::vector<double> forward(const MlpModel& model, std::span<const double> input) {
    ForwardCache cache;
    return forward_cached(model, input, cache);
}

void Gradients::init_like(const MlpModel& model) {
    dweights.resize(model.num_layers());
    dbiases.resize(model.num_layers());
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        dweights[l].assign(model.weights[l].size(), 0.0);
        dbiases[l].assign(model.biases[l].size(), 0.0);
    }
    dinput.assign(model.input_dim(), 0.0);
}

void Gradients::set_zero() {
    for (auto& w : dweights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : dbiases) std::fill(b.begin(), b.end(), 0.0);
    std::fill(dinput.begin(), dinput.end(), 0.0);
}

void Gradients::accumulate(const Gradients& other) {
    for (std::size_t l = 0; l < dweights.size(); ++l) {
        for (std::size_t i = 0; i < dweights[l].size(); ++i) dweights[l][i] += other.dweights[l][i];
        for (std::size_t i = 0; i < dbiases[l].size(); ++i) dbiases[l][i] += other.dbiases[l][i];
    }
    for (std::size_t i = 0; i < dinput.size(); ++i) dinput[i] += other.dinput[i];
}

void Gradients::scale(double factor) {
    for (auto& w : dweights) {
        for (double& v : w) v *= factor;
    }
    for (auto& b : dbiases) {
        for (double& v : b) v *= factor;
    }
    for (double& v : dinput) v *= factor;
}

void backward(const MlpModel& model, const ForwardCache& cache, std::span<const double> grad_out,
              Gradients& out) {
    const std::size_t layers = model.num_layers();
    if (grad_out.size() != model.output_dim()) {
        throw Error("backward: grad_out length mismatch");
    }
    if (out.dweights.size() != layers) out.init_like(model);

    // delta starts as dLoss/dz of the identity output layer.
    std::vector<double> delta(grad_out.begin(), grad_out.end());
    std::vector<double> prev_delta;
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = model.layer_dims[l];
        const std::size_t out_dim = model.layer_dims[l + 1];
        const std::vector<double>& a_in = cache.activations[l];

        for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            double* wrow = out.dweights[l].data() + o * in;
            for (std::size_t i = 0; i < in; ++i) wrow[i] += d * a_in[i];
            out.dbiases[l][o] += d;
        }

        // dLoss/da_in, then through the previous layer's activation.
        prev_delta.assign(in, 0.0);
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            const double* wrow = model.weights[l].data() + o * in;
            for (std::size_t i = 0; i < in; ++i) prev_delta[i] += wrow[i] * d;
        }
        if (l == 0) {
            for (std::size_t i = 0; i < in; ++i) out.dinput[i] += prev_delta[i];
        } else {
            const std::vector<double>& z = cache.preacts[l - 1];
            if (model.activation == Activation::Relu) {
                for (std::size_t i = 0; i < in; ++i) {
                    prev_delta[i] = z[i] > 0.0 ? prev_delta[i] : 0.0;
                }
            } else {
                const std::vector<double>& a = cache.activations[l];
                for (std::size_t i = 0; i < in; ++i) {
                    prev_delta[i] *= 1.0 - a[i] * a[i];
                }
            }
            delta = prev_delta;
        }
    }
}

OptimState OptimState::create(const OptimConfig& config, const MlpModel& model) {
    if (!(config.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
    OptimState state;
    state.config = config;
    if (config.kind == OptimKind::Momentum) {
        for (std::size_t l = 0; l < model.num_layers(); ++l) {
            state.velocity_w.emplace_back(model.weights[l].size(), 0.0);
            state.velocity_b.emplace_back(model.biases[l].size(), 0.0);
        }
    }
    return state;
}

void step(MlpModel& model, const Gradients& grads, OptimState& optim) {
    const double lr = optim.config.learning_rate;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        if (optim.config.kind == OptimKind::Sgd) {
            for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
                model.weights[l][i] -= lr * grads.dweights[l][i];
            }
            for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
                model.biases[l][i] -= lr * grads.dbiases[l][i];
            }
        } else {
            const double beta = optim.config.beta;
            for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
                double& v = optim.velocity_w[l][i];
                v = beta * v + grads.dweights[l][i];
                model.weights[l][i] -= lr * v;
            }
            for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
                double& v = optim.velocity_b[l][i];
                v = beta * v + grads.dbiases[l][i];
                model.biases[l][i] -= lr * v;
            }
        }
    }
    if (!model.all_finite()) throw TrainError("parameter update produced non-finite values");
}

namespace {
constexpr char kMagic[6] = {'M', 'R', 'M', 'A', 'E', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model,
                     const CheckpointMeta& meta) {
    std::string bin(kMagic, sizeof(kMagic));
    put_u32(bin, static_cast<std::uint32_t>(model.layer_dims.size()));
    for (std::size_t d : model.layer_dims) put_u32(bin, static_cast<std::uint32_t>(d));
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        for (double w : model.weights[l]) put_f64(bin, w);
        for (double b : model.biases[l]) put_f64(bin, b);
    }
    atomic_write_file(path, bin);

    json side;
    side["model_kind"] = meta.model_kind;
    side["architecture"] = model.layer_dims;
    side["activation"] = activation_name(model.activation);
    side["seed"] = meta.seed;
    side["rng"] = meta.rng_identity.empty() ? kRngIdentity : meta.rng_identity;
    side["norm_stats_hash"] = meta.norm_stats_hash;
    if (!meta.task_inputs.empty()) side["task_inputs"] = meta.task_inputs;
    if (!meta.task_outputs.empty()) side["task_outputs"] = meta.task_outputs;
    if (meta.model_kind == "lasso") side["l1_penalty"] = meta.l1_penalty;
    atomic_write_file(path.string() + ".json", side.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string bin = read_file(path);
    if (bin.size() < sizeof(kMagic) || bin.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0) {
        throw DataError("checkpoint " + path.string() + ": bad magic");
    }
    std::size_t pos = sizeof(kMagic);
    const auto get_u32_at = [&bin, &path](std::size_t& p) {
        if (p + 4 > bin.size()) throw DataError("checkpoint " + path.string() + ": truncated");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bin[p + i])) << (8 * i);
        p += 4;
        return v;
    };
    const auto get_f64_at = [&bin, &path](std::size_t& p) {
        if (p + 8 > bin.size()) throw DataError("checkpoint " + path.string() + ": truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bin[p + i])) << (8 * i);
        p += 8;
        double d;
        std::memcpy(&d, &v, sizeof(d));
        return d;
    };

    LoadedCheckpoint out;
    const std::uint32_t ndims = get_u32_at(pos);
    if (ndims < 2 || ndims > 64) throw DataError("checkpoint " + path.string() + ": bad dim count");
    out.model.layer_dims.resize(ndims);
    for (auto& d : out.model.layer_dims) d = get_u32_at(pos);
    for (std::size_t l = 0; l + 1 < ndims; ++l) {
        const std::size_t in = out.model.layer_dims[l];
        const std::size_t odim = out.model.layer_dims[l + 1];
        std::vector<double> w(odim * in);
        for (double& v : w) v = get_f64_at(pos);
        std::vector<double> b(odim);
        for (double& v : b) v = get_f64_at(pos);
        out.model.weights.push_back(std::move(w));
        out.model.biases.push_back(std::move(b));
    }
    if (pos != bin.size()) throw DataError("checkpoint " + path.string() + ": trailing bytes");

    const auto side_path = path.string() + ".json";
    json side;
    try {
        side = json::parse(read_file(side_path));
    } catch (const json::exception& e) {
        throw DataError("checkpoint sidecar " + side_path + ": " + e.what());
    }
    out.model.activation = activation_from_name(side.value("activation", "relu"));
    out.meta.model_kind = side.value("model_kind", "mae");
    out.meta.seed = side.value("seed", 0ULL);
    out.meta.rng_identity = side.value("rng", "");
    out.meta.norm_stats_hash = side.value("norm_stats_hash", "");
    if (side.contains("task_inputs")) out.meta.task_inputs = side["task_inputs"].get<std::vector<std::string>>();
    if (side.contains("task_outputs")) out.meta.task_outputs = side["task_outputs"].get<std::vector<std::string>>();
    out.meta.l1_penalty = side.value("l1_penalty", 0.0);
    return out;
}

} // namespace mrmae
