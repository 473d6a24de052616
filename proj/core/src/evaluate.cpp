#include "mrmae/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "mrmae/errors.hpp"
#include "mrmae/io_util.hpp"

namespace mrmae {

double accuracy(std::span<const double> truth, std::span<const double> prediction,
                std::span<const std::size_t> scope) {
    if (scope.empty()) throw DataError("accuracy: empty scope");
    if (truth.size() != prediction.size()) throw Error("accuracy: length mismatch");
    double sum = 0.0;
    for (std::size_t j : scope) sum += std::fabs(prediction[j] - truth[j]);
    return 100.0 * (1.0 - sum / static_cast<double>(scope.size()));
}

double mean_baseline_accuracy(const LayeredDataset& dataset, const FeatureMeans& means,
                              std::span<const std::size_t> rows,
                              std::span<const std::size_t> scope) {
    if (rows.empty()) throw DataError("mean_baseline_accuracy: no rows");
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i : rows) {
        const auto row = dataset.row(i);
        double sum = 0.0;
        std::size_t present = 0;
        for (std::size_t j : scope) {
            if (std::isnan(row[j])) continue;
            sum += std::fabs(means.means[j] - row[j]);
            ++present;
        }
        if (present == 0) continue;
        total += 100.0 * (1.0 - sum / static_cast<double>(present));
        ++counted;
    }
    if (counted == 0) throw DataError("mean_baseline_accuracy: no observed values in scope");
    return total / static_cast<double>(counted);
}

namespace {

std::vector<double> fill_row(std::span<const double> row, const FeatureMeans& means,
                             std::vector<std::uint32_t>* missing_out) {
    std::vector<double> filled(row.begin(), row.end());
    for (std::size_t j = 0; j < filled.size(); ++j) {
        if (std::isnan(filled[j])) {
            filled[j] = means.means[j];
            if (missing_out != nullptr) missing_out->push_back(static_cast<std::uint32_t>(j));
        }
    }
    return filled;
}

Mask mae_base_mask(const ResolvedTask& task, const Mask& masked_inputs, std::size_t n,
                   std::vector<std::uint32_t>&& missing) {
    std::vector<std::uint32_t> members = std::move(missing);
    std::vector<std::uint8_t> is_input(n, 0);
    for (std::size_t j : task.input_features) is_input[j] = 1;
    for (std::uint32_t j = 0; j < n; ++j) {
        if (!is_input[j]) members.push_back(j);
    }
    members.insert(members.end(), masked_inputs.members.begin(), masked_inputs.members.end());
    return Mask::from_indices(std::move(members), n);
}

std::vector<double> gather_outputs(const std::vector<double>& full, const ResolvedTask& task) {
    std::vector<double> out;
    out.reserve(task.output_features.size());
    for (std::size_t j : task.output_features) out.push_back(full[j]);
    return out;
}

} // namespace

SweepModel sweep_model_mae(std::string name, const MlpModel& model, const FeatureMeans& means,
                           const ResolvedTask& task, const LayeredDataset& dataset) {
    const std::size_t n = dataset.num_features;
    return SweepModel{
        std::move(name),
        [&model, &means, task, n](std::span<const double> row, const Mask& masked_inputs,
                                  std::uint64_t) {
            std::vector<std::uint32_t> missing;
            const std::vector<double> filled = fill_row(row, means, &missing);
            const Mask base = mae_base_mask(task, masked_inputs, n, std::move(missing));
            const std::vector<double> f = apply_mask(filled, base, means);
            return gather_outputs(forward(model, f), task);
        }};
}

SweepModel sweep_model_mae_ensemble(std::string name, const MlpModel& model,
                                    const FeatureMeans& means, const ResolvedTask& task,
                                    const LayeredDataset& dataset, EnsembleConfig ensemble) {
    ensemble.validate();
    const std::size_t n = dataset.num_features;
    const auto partition = dataset.layer_partition;
    return SweepModel{
        std::move(name),
        [&model, &means, task, n, partition, ensemble](std::span<const double> row,
                                                       const Mask& masked_inputs,
                                                       std::uint64_t seed) {
            std::vector<std::uint32_t> missing;
            const std::vector<double> filled = fill_row(row, means, &missing);
            const Mask base = mae_base_mask(task, masked_inputs, n, std::move(missing));
            const std::vector<double> x_masked = apply_mask(filled, base, means);

            bool target_below_base = false;
            if (ensemble.policy.kind == MaskPolicyKind::FixedFraction) {
                target_below_base = mask_target_size(ensemble.policy.p, n) < base.size();
            }
            if (target_below_base) {
                return gather_outputs(forward(model, x_masked), task);
            }
            EnsembleConfig cfg = ensemble;
            cfg.seed = seed;
            return gather_outputs(
                ensemble_predict(model, x_masked, base, means, partition, cfg), task);
        }};
}

SweepModel sweep_model_task_mlp(std::string name, const MlpModel& model, const FeatureMeans& means,
                                const ResolvedTask& task) {
    return SweepModel{
        std::move(name),
        [&model, &means, task](std::span<const double> row, const Mask& masked_inputs,
                               std::uint64_t) {
            const std::vector<double> x =
                task_inputs_from_row(row, task.input_features, means, masked_inputs.members);
            return forward(model, x);
        }};
}

SweepModel sweep_model_linear(std::string name, const LinearModel& model, const FeatureMeans& means,
                              const ResolvedTask& task) {
    return SweepModel{
        std::move(name),
        [&model, &means, task](std::span<const double> row, const Mask& masked_inputs,
                               std::uint64_t) {
            const std::vector<double> x =
                task_inputs_from_row(row, task.input_features, means, masked_inputs.members);
            return predict_linear(model, x);
        }};
}

void SweepConfig::validate() const {
    if (fractions.empty()) throw ConfigError("sweep: at least one fraction required");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (fractions[i] < 0.0 || fractions[i] > 0.95) {
            throw ConfigError("sweep: fractions must lie in [0, 0.95]");
        }
        if (i > 0 && fractions[i] <= fractions[i - 1]) {
            throw ConfigError("sweep: fractions must be strictly increasing");
        }
    }
    if (trials < 1) throw ConfigError("sweep: trials must be >= 1");
}

std::vector<SweepRow> masking_sweep(const SweepConfig& cfg, const LayeredDataset& dataset,
                                    const ResolvedTask& task,
                                    const std::vector<SweepModel>& models) {
    cfg.validate();
    const auto test = dataset.test_rows();
    if (test.empty()) throw DataError("sweep: empty test split");
    const std::size_t num_inputs = task.input_features.size();

    std::vector<SweepRow> table;
    for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
        const double fraction = cfg.fractions[fi];
        const std::size_t mask_size = mask_target_size(fraction, num_inputs);
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            const SweepModel& model = models[mi];
            std::vector<double> trial_accs;
            trial_accs.reserve(cfg.trials);
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                const std::uint64_t trial_seed =
                    derive_seed(cfg.seed, (static_cast<std::uint64_t>(fi) << 40) |
                                              (static_cast<std::uint64_t>(mi) << 20) | t);
                Rng rng(trial_seed);

                // Mask a subset of the task's input features, never outputs.
                std::vector<std::size_t> pool = task.input_features;
                std::vector<std::uint32_t> chosen;
                for (std::size_t i = 0; i < mask_size; ++i) {
                    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
                    std::swap(pool[i], pool[j]);
                    chosen.push_back(static_cast<std::uint32_t>(pool[i]));
                }
                const Mask masked_inputs =
                    Mask::from_indices(std::move(chosen), dataset.num_features);

                double acc_sum = 0.0;
                std::size_t scored = 0;
                for (std::size_t row_pos = 0; row_pos < test.size(); ++row_pos) {
                    const std::size_t i = test[row_pos];
                    const auto row = dataset.row(i);
                    const std::vector<double> pred = model.predict_outputs(
                        row, masked_inputs, derive_seed(trial_seed, row_pos));

                    double err = 0.0;
                    std::size_t present = 0;
                    for (std::size_t s = 0; s < task.output_features.size(); ++s) {
                        const double truth = row[task.output_features[s]];
                        if (std::isnan(truth)) continue;
                        err += std::fabs(pred[s] - truth);
                        ++present;
                    }
                    if (present == 0) continue;
                    acc_sum += 100.0 * (1.0 - err / static_cast<double>(present));
                    ++scored;
                }
                if (scored == 0) throw DataError("sweep: no test rows with observed outputs");
                trial_accs.push_back(acc_sum / static_cast<double>(scored));
            }

            double mean = 0.0;
            for (double a : trial_accs) mean += a;
            mean /= static_cast<double>(trial_accs.size());
            double var = 0.0;
            for (double a : trial_accs) var += (a - mean) * (a - mean);
            var /= static_cast<double>(trial_accs.size());
            table.push_back({model.name, fraction, mean, std::sqrt(var), cfg.trials});
        }
    }
    return table;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    std::string out = "model,fraction,mean_acc,std_acc,trials\n";
    for (const auto& row : rows) {
        out += row.model;
        out += ',';
        out += format_double(row.fraction);
        out += ',';
        out += format_double(row.mean_acc);
        out += ',';
        out += format_double(row.std_acc);
        out += ',';
        out += std::to_string(row.trials);
        out += '\n';
    }
    atomic_write_file(path, out);
}

} // namespace mrmae
