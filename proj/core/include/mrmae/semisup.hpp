#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mrmae/baselines.hpp"
#include "mrmae/dataset.hpp"
#include "mrmae/ensemble.hpp"
#include "mrmae/training.hpp"

namespace mrmae {

// One observation with some features truly unknown (the base mask the
// teacher's ensemble fills in). Values are normalized; unknown entries may
// be NaN.
struct UnlabeledObservation {
    YearMonth timestamp;
    std::vector<double> values;
    Mask unknown;
};

enum class Provenance : std::uint8_t { Observed = 0, Pseudo = 1 };

struct PseudoRow {
    YearMonth timestamp;
    std::vector<double> values;            // completed
    std::vector<std::uint8_t> provenance;  // per feature
};

// Fills each row's unknown features with the teacher ensemble's aggregate
// prediction; known features are kept verbatim. The ensemble seed is derived
// per row, so the result is independent of processing order.
std::vector<PseudoRow> generate_pseudo_labels(const MlpModel& teacher,
                                              const std::vector<UnlabeledObservation>& unlabeled,
                                              const EnsembleConfig& cfg, const FeatureMeans& means,
                                              std::span<const LayerRange> layer_partition);

// Base dataset with pseudo rows appended to the training split. Pseudo rows
// never touch norm_stats (stats stay those of the base training split).
struct PseudoLabeledDataset {
    LayeredDataset combined;
    std::vector<std::uint8_t> is_pseudo_row;                // per combined row
    std::vector<std::vector<std::uint8_t>> provenance;      // per combined row, per feature
    std::size_t observed_feature_total = 0;                 // construction log
    std::size_t pseudo_feature_total = 0;
};

PseudoLabeledDataset build_pseudo_labeled_dataset(const LayeredDataset& base,
                                                  const std::vector<PseudoRow>& pseudo_rows);

struct AuditCounts {
    std::size_t observed = 0;
    std::size_t pseudo = 0;
};

// Recounts provenance tags; must equal the construction totals exactly.
AuditCounts audit_provenance(const PseudoLabeledDataset& dataset);

enum class StudentKind { Mae, Mlp, Linear, Lasso };

std::string student_kind_name(StudentKind kind);
StudentKind student_kind_from_name(const std::string& name);

struct StudentConfig {
    StudentKind kind = StudentKind::Mae;
    double pseudo_weight = 1.0; // relative weight of pseudo rows
    TrainConfig mae;            // StudentKind::Mae
    TaskSpec task;              // task-specific students
    TaskMlpConfig mlp;
    std::size_t mlp_param_budget = 0;
    double lasso_penalty = 0.0;
    LinearFitOptions linear_options;
};

struct StudentResult {
    StudentKind kind = StudentKind::Mae;
    std::optional<TrainResult> mae;
    std::optional<TaskMlpResult> mlp;
    std::optional<LinearModel> linear;
};

// Trains the second model on the combined dataset, treating pseudo-labels as
// ground truth; with zero pseudo rows this is bit-identical to supervised
// training under the same seeds.
StudentResult train_student(const PseudoLabeledDataset& dataset, const StudentConfig& cfg);

} // namespace mrmae
