#include "mrmae/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mrmae/errors.hpp"
#include "mrmae/log.hpp"
#include "mrmae/rng.hpp"

namespace mrmae {

ResolvedTask resolve_task(const LayeredDataset& dataset, const TaskSpec& spec) {
    if (spec.input_layers.empty() || spec.output_layers.empty()) {
        throw ConfigError("task: input and output layer sets must be non-empty");
    }
    std::set<std::string> inputs(spec.input_layers.begin(), spec.input_layers.end());
    for (const auto& name : spec.output_layers) {
        if (inputs.count(name) > 0) {
            throw ConfigError("task: layer '" + name + "' appears as both input and output");
        }
    }
    ResolvedTask task;
    task.spec = spec;
    for (const auto& name : spec.input_layers) {
        const auto& range = dataset.layer_partition[dataset.layer_index(name)];
        for (std::size_t j = range.begin; j < range.end; ++j) task.input_features.push_back(j);
    }
    for (const auto& name : spec.output_layers) {
        const auto& range = dataset.layer_partition[dataset.layer_index(name)];
        for (std::size_t j = range.begin; j < range.end; ++j) task.output_features.push_back(j);
    }
    std::sort(task.input_features.begin(), task.input_features.end());
    std::sort(task.output_features.begin(), task.output_features.end());
    return task;
}

namespace {

struct DesignMatrix {
    std::size_t rows = 0;
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> x; // rows x in, centered and sqrt-weight scaled
    std::vector<double> y; // rows x out, centered and sqrt-weight scaled
    std::vector<double> x_mean;
    std::vector<double> y_mean;
    double weight_total = 0.0;
};

// Centered, sqrt(weight)-scaled design over usable training rows. Missing
// inputs are imputed with their training means; rows missing any output are
// dropped.
DesignMatrix build_design(const LayeredDataset& dataset, const ResolvedTask& task,
                          const std::vector<double>* row_weights) {
    const auto train = dataset.train_rows();
    if (train.empty()) throw ConfigError("fit: empty training split");
    const FeatureMeans means = compute_feature_means(dataset);

    const std::size_t in = task.input_features.size();
    const std::size_t out = task.output_features.size();

    std::vector<std::size_t> usable;
    std::vector<double> weights;
    for (std::size_t i : train) {
        const auto row = dataset.row(i);
        bool output_ok = true;
        for (std::size_t j : task.output_features) {
            if (std::isnan(row[j])) {
                output_ok = false;
                break;
            }
        }
        if (!output_ok) continue;
        const double w = row_weights != nullptr && i < row_weights->size() ? (*row_weights)[i] : 1.0;
        if (w <= 0.0) continue;
        usable.push_back(i);
        weights.push_back(w);
    }
    if (usable.empty()) throw DataError("fit: no training rows with complete outputs");

    DesignMatrix d;
    d.rows = usable.size();
    d.in = in;
    d.out = out;
    d.x.assign(d.rows * in, 0.0);
    d.y.assign(d.rows * out, 0.0);
    for (std::size_t r = 0; r < d.rows; ++r) {
        const auto row = dataset.row(usable[r]);
        for (std::size_t c = 0; c < in; ++c) {
            const std::size_t j = task.input_features[c];
            const double v = row[j];
            d.x[r * in + c] = std::isnan(v) ? means.means[j] : v;
        }
        for (std::size_t c = 0; c < out; ++c) {
            d.y[r * out + c] = row[task.output_features[c]];
        }
    }

    d.x_mean.assign(in, 0.0);
    d.y_mean.assign(out, 0.0);
    for (double w : weights) d.weight_total += w;
    for (std::size_t r = 0; r < d.rows; ++r) {
        for (std::size_t c = 0; c < in; ++c) d.x_mean[c] += weights[r] * d.x[r * in + c];
        for (std::size_t c = 0; c < out; ++c) d.y_mean[c] += weights[r] * d.y[r * out + c];
    }
    for (double& m : d.x_mean) m /= d.weight_total;
    for (double& m : d.y_mean) m /= d.weight_total;
    for (std::size_t r = 0; r < d.rows; ++r) {
        const double s = std::sqrt(weights[r]);
        for (std::size_t c = 0; c < in; ++c) d.x[r * in + c] = s * (d.x[r * in + c] - d.x_mean[c]);
        for (std::size_t c = 0; c < out; ++c) d.y[r * out + c] = s * (d.y[r * out + c] - d.y_mean[c]);
    }
    return d;
}

// Cholesky solve of (G + ridge I) W^T = B, G symmetric positive definite.
std::vector<double> cholesky_solve(std::vector<double> g, std::size_t dim,
                                   const std::vector<double>& rhs, std::size_t nrhs) {
    for (std::size_t c = 0; c < dim; ++c) {
        for (std::size_t r = c; r < dim; ++r) {
            double sum = g[r * dim + c];
            for (std::size_t k = 0; k < c; ++k) sum -= g[r * dim + k] * g[c * dim + k];
            if (r == c) {
                if (sum <= 0.0) throw FitError("normal equations not positive definite");
                g[r * dim + c] = std::sqrt(sum);
            } else {
                g[r * dim + c] = sum / g[c * dim + c];
            }
        }
    }
    std::vector<double> solution(rhs.size());
    for (std::size_t s = 0; s < nrhs; ++s) {
        std::vector<double> z(dim);
        for (std::size_t r = 0; r < dim; ++r) {
            double sum = rhs[r * nrhs + s];
            for (std::size_t k = 0; k < r; ++k) sum -= g[r * dim + k] * z[k];
            z[r] = sum / g[r * dim + r];
        }
        for (std::size_t r = dim; r-- > 0;) {
            double sum = z[r];
            for (std::size_t k = r + 1; k < dim; ++k) sum -= g[k * dim + r] * solution[k * nrhs + s];
            solution[r * nrhs + s] = sum / g[r * dim + r];
        }
    }
    return solution;
}

double soft_threshold(double value, double threshold) {
    if (value > threshold) return value - threshold;
    if (value < -threshold) return value + threshold;
    return 0.0;
}

// Lasso via cyclic coordinate descent on one output column. Objective:
// (1/(2k)) ||y - X w||^2 + alpha ||w||_1 with k = weight total. Stops when
// the duality gap drops below tol * max(||y||^2/k, 1).
std::vector<double> lasso_cd(const DesignMatrix& d, std::size_t out_col, double alpha, double tol,
                             std::size_t max_sweeps) {
    const std::size_t k = d.rows;
    const std::size_t in = d.in;
    const double kw = d.weight_total;

    std::vector<double> y(k);
    for (std::size_t r = 0; r < k; ++r) y[r] = d.y[r * d.out + out_col];

    std::vector<double> col_sq(in, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < in; ++c) col_sq[c] += d.x[r * in + c] * d.x[r * in + c];
    }

    std::vector<double> w(in, 0.0);
    std::vector<double> residual = y; // r = y - X w
    double y_sq = 0.0;
    for (double v : y) y_sq += v * v;
    const double gap_scale = std::max(y_sq / kw, 1.0);

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        for (std::size_t c = 0; c < in; ++c) {
            if (col_sq[c] == 0.0) continue;
            const double wc = w[c];
            double rho = 0.0;
            for (std::size_t r = 0; r < k; ++r) rho += d.x[r * in + c] * residual[r];
            rho = rho / kw + (col_sq[c] / kw) * wc;
            const double next = soft_threshold(rho, alpha) / (col_sq[c] / kw);
            if (next != wc) {
                const double delta = next - wc;
                for (std::size_t r = 0; r < k; ++r) residual[r] -= delta * d.x[r * in + c];
                w[c] = next;
            }
        }

        // Duality gap for the lasso: dual point is the scaled residual.
        double r_sq = 0.0;
        for (double v : residual) r_sq += v * v;
        double xtr_inf = 0.0;
        for (std::size_t c = 0; c < in; ++c) {
            double dot = 0.0;
            for (std::size_t r = 0; r < k; ++r) dot += d.x[r * in + c] * residual[r];
            xtr_inf = std::max(xtr_inf, std::fabs(dot) / kw);
        }
        double l1 = 0.0;
        for (double v : w) l1 += std::fabs(v);
        double r_dot_y = 0.0;
        for (std::size_t r = 0; r < k; ++r) r_dot_y += residual[r] * y[r];

        const double scale = xtr_inf > alpha ? alpha / xtr_inf : 1.0;
        const double primal = r_sq / (2.0 * kw) + alpha * l1;
        const double dual = (scale * r_dot_y - 0.5 * scale * scale * r_sq) / kw;
        const double gap = primal - dual;
        if (gap <= tol * gap_scale) return w;
    }
    throw FitError("lasso did not converge after " + std::to_string(max_sweeps) + " sweeps");
}

} // namespace

LinearModel fit_linear(const LayeredDataset& dataset, const ResolvedTask& task, double l1_penalty,
                       const LinearFitOptions& options) {
    if (l1_penalty < 0.0) throw ConfigError("l1_penalty must be non-negative");
    const DesignMatrix d = build_design(dataset, task, options.row_weights);

    LinearModel model;
    model.inputs = d.in;
    model.outputs = d.out;
    model.l1_penalty = l1_penalty;
    model.weights.assign(d.out * d.in, 0.0);
    model.bias.assign(d.out, 0.0);

    if (l1_penalty == 0.0) {
        // Normalized Gram (X^T X / k) keeps the ridge scale-free.
        std::vector<double> gram(d.in * d.in, 0.0);
        for (std::size_t r = 0; r < d.rows; ++r) {
            const double* row = d.x.data() + r * d.in;
            for (std::size_t a = 0; a < d.in; ++a) {
                for (std::size_t b = a; b < d.in; ++b) gram[a * d.in + b] += row[a] * row[b];
            }
        }
        for (std::size_t a = 0; a < d.in; ++a) {
            for (std::size_t b = 0; b < a; ++b) gram[a * d.in + b] = gram[b * d.in + a];
        }
        const double inv_k = 1.0 / d.weight_total;
        for (double& v : gram) v *= inv_k;
        for (std::size_t a = 0; a < d.in; ++a) gram[a * d.in + a] += options.ridge;

        std::vector<double> rhs(d.in * d.out, 0.0);
        for (std::size_t r = 0; r < d.rows; ++r) {
            for (std::size_t a = 0; a < d.in; ++a) {
                const double xv = d.x[r * d.in + a];
                for (std::size_t s = 0; s < d.out; ++s) rhs[a * d.out + s] += xv * d.y[r * d.out + s];
            }
        }
        for (double& v : rhs) v *= inv_k;

        const std::vector<double> sol = cholesky_solve(std::move(gram), d.in, rhs, d.out);
        for (std::size_t s = 0; s < d.out; ++s) {
            for (std::size_t a = 0; a < d.in; ++a) model.weights[s * d.in + a] = sol[a * d.out + s];
        }
    } else {
        for (std::size_t s = 0; s < d.out; ++s) {
            const std::vector<double> w = lasso_cd(d, s, l1_penalty, options.tol, options.max_sweeps);
            for (std::size_t a = 0; a < d.in; ++a) model.weights[s * d.in + a] = w[a];
        }
    }

    for (std::size_t s = 0; s < d.out; ++s) {
        double dot = 0.0;
        for (std::size_t a = 0; a < d.in; ++a) dot += model.weights[s * d.in + a] * d.x_mean[a];
        model.bias[s] = d.y_mean[s] - dot;
    }
    return model;
}

std::vector<double> predict_linear(const LinearModel& model, std::span<const double> inputs) {
    if (inputs.size() != model.inputs) throw DataError("predict_linear: input length mismatch");
    std::vector<double> out(model.outputs, 0.0);
    for (std::size_t s = 0; s < model.outputs; ++s) {
        double acc = model.bias[s];
        const double* row = model.weights.data() + s * model.inputs;
        for (std::size_t a = 0; a < model.inputs; ++a) acc += row[a] * inputs[a];
        out[s] = acc;
    }
    return out;
}

std::size_t task_mlp_param_count(std::size_t inputs, std::size_t outputs, std::size_t hidden) {
    return hidden * (inputs + 1) + hidden * (hidden + 1) + outputs * (hidden + 1);
}

std::size_t solve_hidden_width(std::size_t inputs, std::size_t outputs, std::size_t param_budget,
                               double tolerance_fraction) {
    if (param_budget == 0) throw ConfigError("parameter budget must be positive");
    // param count grows monotonically in h; binary search the crossing point.
    std::size_t lo = 1, hi = 1;
    while (task_mlp_param_count(inputs, outputs, hi) < param_budget && hi < (1u << 20)) hi *= 2;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (task_mlp_param_count(inputs, outputs, mid) < param_budget) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    std::size_t best = lo;
    double best_err = std::fabs(static_cast<double>(task_mlp_param_count(inputs, outputs, lo)) -
                                static_cast<double>(param_budget));
    if (lo > 1) {
        const double err = std::fabs(static_cast<double>(task_mlp_param_count(inputs, outputs, lo - 1)) -
                                     static_cast<double>(param_budget));
        if (err < best_err) {
            best = lo - 1;
            best_err = err;
        }
    }
    if (best_err > tolerance_fraction * static_cast<double>(param_budget)) {
        throw ConfigError("no hidden width lands within " +
                          std::to_string(tolerance_fraction * 100.0) + "% of parameter budget " +
                          std::to_string(param_budget));
    }
    return best;
}

TaskMlpResult fit_task_mlp(const LayeredDataset& dataset, const ResolvedTask& task,
                           std::size_t param_budget, const TaskMlpConfig& cfg) {
    const std::size_t in = task.input_features.size();
    const std::size_t out = task.output_features.size();
    const std::size_t hidden = solve_hidden_width(in, out, param_budget);

    const auto train = dataset.train_rows();
    if (train.empty()) throw ConfigError("fit_task_mlp: empty training split");
    const FeatureMeans means = compute_feature_means(dataset);

    TaskMlpResult result;
    result.hidden_width = hidden;
    result.model = init_mlp({in, hidden, hidden, out}, cfg.activation, derive_seed(cfg.seed, 0));

    OptimState optim = OptimState::create(cfg.optim, result.model);
    Rng shuffle_rng(derive_seed(cfg.seed, 1));

    std::vector<std::size_t> order;
    for (std::size_t i : train) {
        const auto row = dataset.row(i);
        bool ok = true;
        for (std::size_t j : task.output_features) {
            if (std::isnan(row[j])) {
                ok = false;
                break;
            }
        }
        if (ok) order.push_back(i);
    }
    if (order.empty()) throw DataError("fit_task_mlp: no rows with complete outputs");

    Gradients sample_grads, batch_grads;
    sample_grads.init_like(result.model);
    batch_grads.init_like(result.model);
    ForwardCache cache;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            batch_grads.set_zero();
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                const auto row = dataset.row(i);
                const std::vector<double> x = task_inputs_from_row(row, task.input_features, means);
                const auto& p = forward_cached(result.model, x, cache);

                double loss = 0.0;
                std::vector<double> grad_out(out);
                for (std::size_t s = 0; s < out; ++s) {
                    const double diff = p[s] - row[task.output_features[s]];
                    if (cfg.loss == LossBase::L1) {
                        loss += std::fabs(diff);
                        grad_out[s] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) /
                                      static_cast<double>(out);
                    } else {
                        loss += diff * diff;
                        grad_out[s] = 2.0 * diff / static_cast<double>(out);
                    }
                }
                loss /= static_cast<double>(out);
                if (!std::isfinite(loss)) {
                    throw TrainError("task mlp diverged at epoch " + std::to_string(epoch));
                }
                loss_sum += loss;

                const double weight = cfg.row_weights != nullptr && i < cfg.row_weights->size()
                                          ? (*cfg.row_weights)[i]
                                          : 1.0;
                if (weight != 1.0) {
                    for (double& g : grad_out) g *= weight;
                }
                sample_grads.set_zero();
                backward(result.model, cache, grad_out, sample_grads);
                batch_grads.accumulate(sample_grads);
            }
            batch_grads.scale(1.0 / static_cast<double>(stop - start));
            step(result.model, batch_grads, optim);
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
    }
    return result;
}

std::vector<double> task_inputs_from_row(std::span<const double> row,
                                         const std::vector<std::size_t>& input_features,
                                         const FeatureMeans& means,
                                         std::span<const std::uint32_t> masked_inputs) {
    std::vector<double> x(input_features.size());
    for (std::size_t c = 0; c < input_features.size(); ++c) {
        const std::size_t j = input_features[c];
        const bool masked = std::binary_search(masked_inputs.begin(), masked_inputs.end(),
                                               static_cast<std::uint32_t>(j));
        const double v = row[j];
        x[c] = masked || std::isnan(v) ? means.means[j] : v;
    }
    return x;
}

LassoSelection select_lasso_penalty(const LayeredDataset& dataset, const ResolvedTask& task,
                                    std::span<const double> penalty_grid,
                                    double validation_fraction) {
    if (penalty_grid.empty()) throw ConfigError("lasso grid search: empty penalty grid");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("lasso grid search: validation fraction must be in (0,1)");
    }
    const auto train = dataset.train_rows();
    const std::size_t val_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(validation_fraction *
                                               static_cast<double>(train.size()) + 0.5)));
    if (val_count >= train.size()) throw DataError("lasso grid search: training split too small");
    const std::vector<std::size_t> val_rows(train.end() - static_cast<std::ptrdiff_t>(val_count),
                                            train.end());

    std::vector<double> weights(dataset.num_observations, 1.0);
    for (std::size_t i : val_rows) weights[i] = 0.0;
    const FeatureMeans means = compute_feature_means(dataset);

    LassoSelection selection;
    selection.val_accuracy = -std::numeric_limits<double>::infinity();
    for (double penalty : penalty_grid) {
        LinearFitOptions options;
        options.row_weights = &weights;
        const LinearModel model = fit_linear(dataset, task, penalty, options);

        double acc_sum = 0.0;
        std::size_t scored = 0;
        for (std::size_t i : val_rows) {
            const auto row = dataset.row(i);
            const std::vector<double> x = task_inputs_from_row(row, task.input_features, means);
            const std::vector<double> p = predict_linear(model, x);
            double err = 0.0;
            std::size_t present = 0;
            for (std::size_t s = 0; s < task.output_features.size(); ++s) {
                const double truth = row[task.output_features[s]];
                if (std::isnan(truth)) continue;
                err += std::fabs(p[s] - truth);
                ++present;
            }
            if (present == 0) continue;
            acc_sum += 100.0 * (1.0 - err / static_cast<double>(present));
            ++scored;
        }
        if (scored == 0) throw DataError("lasso grid search: no scorable validation rows");
        const double acc = acc_sum / static_cast<double>(scored);
        selection.grid_scores.emplace_back(penalty, acc);
        if (acc > selection.val_accuracy) {
            selection.val_accuracy = acc;
            selection.penalty = penalty;
        }
    }
    log_info("lasso grid search selected penalty " + std::to_string(selection.penalty));
    return selection;
}

} // namespace mrmae
