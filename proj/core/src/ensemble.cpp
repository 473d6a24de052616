#include "mrmae/ensemble.hpp"

#include <thread>

#include "mrmae/errors.hpp"

namespace mrmae {

void EnsembleConfig::validate() const {
    if (iterations < 1) throw ConfigError("ensemble iterations must be >= 1");
    if (workers < 1) throw ConfigError("ensemble workers must be >= 1");
}

std::vector<double> mean_aggregate(const std::vector<std::vector<double>>& members) {
    if (members.empty()) throw Error("mean_aggregate: no members");
    std::vector<double> out(members.front().size(), 0.0);
    for (const auto& q : members) {
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += q[j];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& v : out) v *= inv;
    return out;
}

std::vector<double> ensemble_predict(const MlpModel& model, std::span<const double> x_masked,
                                     const Mask& base_mask, const FeatureMeans& means,
                                     std::span<const LayerRange> layer_partition,
                                     const EnsembleConfig& cfg, const MemberSink& sink) {
    cfg.validate();
    const std::size_t n = x_masked.size();

    std::vector<Mask> masks(cfg.iterations);
    std::vector<std::vector<double>> members(cfg.iterations);

    const auto run_iteration = [&](std::size_t i) {
        Rng rng(derive_seed(cfg.seed, i));
        const Mask mask_i = sample_superset_mask(base_mask, cfg.policy, n, layer_partition, rng);
        const Mask extra = mask_i.set_minus(base_mask);
        std::vector<double> f(x_masked.begin(), x_masked.end());
        apply_mask_inplace(f, extra, means);
        masks[i] = mask_i;
        members[i] = forward(model, f);
    };

    if (cfg.workers <= 1 || cfg.iterations <= 1) {
        for (std::size_t i = 0; i < cfg.iterations; ++i) run_iteration(i);
    } else {
        const std::size_t workers = std::min(cfg.workers, cfg.iterations);
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> failures(workers);
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < cfg.iterations; i += workers) run_iteration(i);
                } catch (...) {
                    failures[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& failure : failures) {
            if (failure) std::rethrow_exception(failure);
        }
    }

    if (sink) {
        for (std::size_t i = 0; i < cfg.iterations; ++i) sink(i, masks[i], members[i]);
    }
    return mean_aggregate(members);
}

} // namespace mrmae
