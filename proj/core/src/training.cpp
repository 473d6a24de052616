#include "mrmae/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrmae/errors.hpp"
#include "mrmae/io_util.hpp"
#include "mrmae/log.hpp"

namespace mrmae {

std::string loss_base_name(LossBase base) { return base == LossBase::L1 ? "l1" : "l2"; }

LossBase loss_base_from_name(const std::string& name) {
    if (name == "l1") return LossBase::L1;
    if (name == "l2") return LossBase::L2;
    throw ConfigError("unknown loss base '" + name + "'");
}

void LossConfig::validate() const {
    if (masked_weight < 0.0 || unmasked_weight < 0.0 || masked_weight + unmasked_weight <= 0.0) {
        throw ConfigError("loss weights must be non-negative with a positive sum");
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    loss.validate();
}

namespace {

bool is_excluded(std::span<const std::size_t> excluded, std::size_t j) {
    return std::binary_search(excluded.begin(), excluded.end(), j);
}

} // namespace

MaskedLossResult masked_loss_excluding(std::span<const double> truth,
                                       std::span<const double> prediction, const Mask& mask,
                                       const LossConfig& cfg,
                                       std::span<const std::size_t> excluded) {
    if (truth.size() != prediction.size()) throw Error("masked_loss: length mismatch");
    const std::size_t n = truth.size();
    MaskedLossResult result;
    result.per_feature.assign(n, 0.0);
    double masked_sum = 0.0;
    double unmasked_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (is_excluded(excluded, j)) continue;
        const double diff = prediction[j] - truth[j];
        const double lj = cfg.base == LossBase::L1 ? std::fabs(diff) : diff * diff;
        result.per_feature[j] = lj;
        if (mask.contains(static_cast<std::uint32_t>(j))) {
            masked_sum += lj;
        } else {
            unmasked_sum += lj;
        }
    }
    result.masked_component = cfg.masked_weight * masked_sum / static_cast<double>(n);
    result.unmasked_component = cfg.unmasked_weight * unmasked_sum / static_cast<double>(n);
    result.scalar = result.masked_component + result.unmasked_component;
    return result;
}

MaskedLossResult masked_loss(std::span<const double> truth, std::span<const double> prediction,
                             const Mask& mask, const LossConfig& cfg) {
    return masked_loss_excluding(truth, prediction, mask, cfg, {});
}

std::vector<double> masked_loss_gradient(std::span<const double> truth,
                                         std::span<const double> prediction, const Mask& mask,
                                         const LossConfig& cfg,
                                         std::span<const std::size_t> excluded) {
    if (truth.size() != prediction.size()) throw Error("masked_loss_gradient: length mismatch");
    const std::size_t n = truth.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> grad(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (is_excluded(excluded, j)) continue;
        const double diff = prediction[j] - truth[j];
        const double weight =
            mask.contains(static_cast<std::uint32_t>(j)) ? cfg.masked_weight : cfg.unmasked_weight;
        double dl;
        if (cfg.base == LossBase::L1) {
            dl = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        } else {
            dl = 2.0 * diff;
        }
        grad[j] = weight * dl * inv_n;
    }
    return grad;
}

TrainResult train(const LayeredDataset& dataset, const TrainConfig& cfg, const TrainExtras& extras) {
    cfg.validate();
    if (!dataset.normalized) {
        log_warn("training on a dataset that was not normalized; proceeding");
    }
    const auto rows = dataset.train_rows();
    if (rows.empty()) throw ConfigError("train: empty training split");

    const std::size_t n = dataset.num_features;
    TrainResult result;
    result.means = compute_feature_means(dataset);

    std::vector<std::size_t> dims;
    dims.push_back(n);
    if (cfg.hidden_dims.empty()) {
        dims.push_back(4 * n);
        dims.push_back(4 * n);
    } else {
        dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    }
    dims.push_back(n);
    result.model = init_mlp(dims, cfg.activation, derive_seed(cfg.seed, 0));

    OptimState optim = OptimState::create(cfg.optim, result.model);
    Rng shuffle_rng(derive_seed(cfg.seed, 1));
    Rng mask_rng(derive_seed(cfg.seed, 2));

    // Missing entries per row, computed once: they are force-masked on input
    // and excluded from the loss (no ground truth to compare against).
    std::vector<std::vector<std::size_t>> missing(dataset.num_observations);
    std::vector<std::vector<std::uint32_t>> missing32(dataset.num_observations);
    for (std::size_t i : rows) {
        missing[i] = dataset.missing_in_row(i);
        missing32[i].assign(missing[i].begin(), missing[i].end());
    }

    std::vector<std::size_t> order = rows;
    Gradients sample_grads;
    sample_grads.init_like(result.model);
    Gradients batch_grads;
    batch_grads.init_like(result.model);
    ForwardCache cache;
    std::vector<double> x_filled(n);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        double masked_sum = 0.0;
        double unmasked_sum = 0.0;
        double observed_sum = 0.0, pseudo_sum = 0.0;
        std::size_t observed_count = 0, pseudo_count = 0;

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            batch_grads.set_zero();
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                const auto x = dataset.row(i);
                for (std::size_t j = 0; j < n; ++j) {
                    x_filled[j] = std::isnan(x[j]) ? result.means.means[j] : x[j];
                }

                Mask mask = sample_mask(cfg.policy, n, dataset.layer_partition, mask_rng);
                if (!missing32[i].empty()) {
                    mask = mask.set_union(Mask{missing32[i]});
                }

                const std::vector<double> f = apply_mask(x_filled, mask, result.means);
                const auto& p = forward_cached(result.model, f, cache);
                const MaskedLossResult loss =
                    masked_loss_excluding(x_filled, p, mask, cfg.loss, missing[i]);
                if (!std::isfinite(loss.scalar)) {
                    throw TrainError("training diverged at epoch " + std::to_string(epoch));
                }
                loss_sum += loss.scalar;
                masked_sum += loss.masked_component;
                unmasked_sum += loss.unmasked_component;
                const bool pseudo =
                    extras.pseudo_rows != nullptr && i < extras.pseudo_rows->size() &&
                    (*extras.pseudo_rows)[i] != 0;
                if (pseudo) {
                    pseudo_sum += loss.scalar;
                    ++pseudo_count;
                } else {
                    observed_sum += loss.scalar;
                    ++observed_count;
                }

                std::vector<double> grad_out =
                    masked_loss_gradient(x_filled, p, mask, cfg.loss, missing[i]);
                const double row_weight =
                    extras.row_weights != nullptr && i < extras.row_weights->size()
                        ? (*extras.row_weights)[i]
                        : 1.0;
                if (row_weight != 1.0) {
                    for (double& g : grad_out) g *= row_weight;
                }
                sample_grads.set_zero();
                backward(result.model, cache, grad_out, sample_grads);
                batch_grads.accumulate(sample_grads);
            }
            batch_grads.scale(1.0 / static_cast<double>(stop - start));
            step(result.model, batch_grads, optim);
        }

        EpochStats stats;
        stats.epoch = epoch;
        const double count = static_cast<double>(order.size());
        stats.mean_loss = loss_sum / count;
        stats.masked_loss = masked_sum / count;
        stats.unmasked_loss = unmasked_sum / count;
        stats.observed_loss = observed_count > 0
                                  ? observed_sum / static_cast<double>(observed_count)
                                  : std::numeric_limits<double>::quiet_NaN();
        stats.pseudo_loss = pseudo_count > 0 ? pseudo_sum / static_cast<double>(pseudo_count)
                                             : std::numeric_limits<double>::quiet_NaN();
        result.log.push_back(stats);
        if (extras.callback) extras.callback(result.model, stats);
    }
    return result;
}

void write_training_log_csv(const std::filesystem::path& path, const std::vector<EpochStats>& log,
                            bool with_pseudo_columns) {
    std::string out = "epoch,mean_loss,masked_loss,unmasked_loss";
    if (with_pseudo_columns) out += ",observed_loss,pseudo_loss";
    out += '\n';
    for (const auto& stats : log) {
        out += std::to_string(stats.epoch);
        out += ',';
        out += format_double(stats.mean_loss);
        out += ',';
        out += format_double(stats.masked_loss);
        out += ',';
        out += format_double(stats.unmasked_loss);
        if (with_pseudo_columns) {
            out += ',';
            out += format_double(stats.observed_loss);
            out += ',';
            out += format_double(stats.pseudo_loss);
        }
        out += '\n';
    }
    atomic_write_file(path, out);
}

} // namespace mrmae
