#include "mrmae/semisup.hpp"

#include <cmath>

#include "mrmae/errors.hpp"

namespace mrmae {

std::vector<PseudoRow> generate_pseudo_labels(const MlpModel& teacher,
                                              const std::vector<UnlabeledObservation>& unlabeled,
                                              const EnsembleConfig& cfg, const FeatureMeans& means,
                                              std::span<const LayerRange> layer_partition) {
    std::vector<PseudoRow> rows;
    rows.reserve(unlabeled.size());
    for (std::size_t r = 0; r < unlabeled.size(); ++r) {
        const auto& obs = unlabeled[r];
        const std::size_t n = obs.values.size();

        std::vector<double> filled = obs.values;
        std::vector<std::uint32_t> missing;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::isnan(filled[j])) {
                filled[j] = means.means[j];
                missing.push_back(static_cast<std::uint32_t>(j));
            }
        }
        // Unobserved-but-known-missing entries count as unknown too.
        const Mask base = obs.unknown.set_union(Mask::from_indices(std::move(missing), n));

        PseudoRow row;
        row.timestamp = obs.timestamp;
        row.provenance.assign(n, static_cast<std::uint8_t>(Provenance::Observed));
        if (base.size() == 0) {
            row.values = filled; // nothing to label
            rows.push_back(std::move(row));
            continue;
        }

        const std::vector<double> x_masked = apply_mask(filled, base, means);
        EnsembleConfig row_cfg = cfg;
        row_cfg.seed = derive_seed(cfg.seed, r);
        const std::vector<double> aggregate =
            ensemble_predict(teacher, x_masked, base, means, layer_partition, row_cfg);

        row.values = filled;
        for (std::uint32_t j : base.members) {
            row.values[j] = aggregate[j];
            row.provenance[j] = static_cast<std::uint8_t>(Provenance::Pseudo);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

PseudoLabeledDataset build_pseudo_labeled_dataset(const LayeredDataset& base,
                                                  const std::vector<PseudoRow>& pseudo_rows) {
    PseudoLabeledDataset out;
    out.combined = base;
    out.is_pseudo_row.assign(base.num_observations, 0);
    out.provenance.assign(base.num_observations,
                          std::vector<std::uint8_t>(base.num_features,
                                                    static_cast<std::uint8_t>(Provenance::Observed)));
    for (const auto& row : pseudo_rows) {
        if (row.values.size() != base.num_features) {
            throw DataError("pseudo row feature count does not match the base dataset");
        }
        out.combined.data.insert(out.combined.data.end(), row.values.begin(), row.values.end());
        out.combined.timestamps.push_back(row.timestamp);
        out.combined.split.push_back(Split::Train);
        out.combined.num_observations += 1;
        out.is_pseudo_row.push_back(1);
        out.provenance.push_back(row.provenance);
        for (std::uint8_t tag : row.provenance) {
            if (tag == static_cast<std::uint8_t>(Provenance::Pseudo)) {
                out.pseudo_feature_total += 1;
            } else {
                out.observed_feature_total += 1;
            }
        }
    }
    out.combined.validate_partition();
    return out;
}

AuditCounts audit_provenance(const PseudoLabeledDataset& dataset) {
    AuditCounts counts;
    for (std::size_t i = 0; i < dataset.provenance.size(); ++i) {
        if (!dataset.is_pseudo_row[i]) continue; // base rows are not part of the appended log
        for (std::uint8_t tag : dataset.provenance[i]) {
            if (tag == static_cast<std::uint8_t>(Provenance::Pseudo)) {
                ++counts.pseudo;
            } else {
                ++counts.observed;
            }
        }
    }
    return counts;
}

std::string student_kind_name(StudentKind kind) {
    switch (kind) {
    case StudentKind::Mae: return "mae";
    case StudentKind::Mlp: return "mlp";
    case StudentKind::Linear: return "linear";
    case StudentKind::Lasso: return "lasso";
    }
    return "?";
}

StudentKind student_kind_from_name(const std::string& name) {
    if (name == "mae") return StudentKind::Mae;
    if (name == "mlp") return StudentKind::Mlp;
    if (name == "linear") return StudentKind::Linear;
    if (name == "lasso") return StudentKind::Lasso;
    throw ConfigError("unknown student kind '" + name + "'");
}

StudentResult train_student(const PseudoLabeledDataset& dataset, const StudentConfig& cfg) {
    StudentResult result;
    result.kind = cfg.kind;

    std::vector<double> row_weights(dataset.combined.num_observations, 1.0);
    bool any_pseudo = false;
    for (std::size_t i = 0; i < dataset.is_pseudo_row.size(); ++i) {
        if (dataset.is_pseudo_row[i]) {
            row_weights[i] = cfg.pseudo_weight;
            any_pseudo = true;
        }
    }
    const std::vector<double>* weights = any_pseudo && cfg.pseudo_weight != 1.0 ? &row_weights : nullptr;

    switch (cfg.kind) {
    case StudentKind::Mae: {
        TrainExtras extras;
        extras.row_weights = weights;
        extras.pseudo_rows = any_pseudo ? &dataset.is_pseudo_row : nullptr;
        result.mae = train(dataset.combined, cfg.mae, extras);
        break;
    }
    case StudentKind::Mlp: {
        const ResolvedTask task = resolve_task(dataset.combined, cfg.task);
        TaskMlpConfig mlp_cfg = cfg.mlp;
        mlp_cfg.row_weights = weights;
        result.mlp = fit_task_mlp(dataset.combined, task, cfg.mlp_param_budget, mlp_cfg);
        break;
    }
    case StudentKind::Linear:
    case StudentKind::Lasso: {
        const ResolvedTask task = resolve_task(dataset.combined, cfg.task);
        LinearFitOptions options = cfg.linear_options;
        options.row_weights = weights;
        const double penalty = cfg.kind == StudentKind::Lasso ? cfg.lasso_penalty : 0.0;
        result.linear = fit_linear(dataset.combined, task, penalty, options);
        break;
    }
    }
    return result;
}

} // namespace mrmae
