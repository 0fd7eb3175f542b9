#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pairvoice/nn/common.hpp"

namespace pairvoice::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(const ParamList& params, const std::vector<Matrix>& grads);
    long steps() const noexcept { return t_; }

private:
    AdamConfig cfg_;
    std::vector<Matrix> m_, v_;
    long t_ = 0;
};

struct TrainConfig {
    double lr = 1e-3;
    int epochs = 100;
    std::size_t batch = 16;
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<double> loss_curve;  // mean training loss per epoch
};

template <class M, class S>
concept Trainable = requires(M m, const M cm, std::span<const S* const> batch, std::vector<Matrix>& g) {
    { m.parameters() } -> std::same_as<ParamList>;
    { cm.loss_and_gradient(batch, g) } -> std::convertible_to<double>;
};

// Mini-batch Adam over a shuffled copy of the sample order; deterministic for
// a given seed. Optional model hooks: on_step_end() after every update,
// on_epoch_end(int) and on_train_end() (the AFF model projects and trims there).
template <class Model, class Sample>
    requires Trainable<Model, Sample>
TrainResult train(Model& model, std::span<const Sample> data, const TrainConfig& cfg) {
    if (data.empty()) throw InsufficientDataError("train: empty training set");
    if (cfg.epochs < 0 || cfg.batch == 0) throw ConfigError("train: epochs must be >= 0 and batch > 0");
    Adam opt(AdamConfig{cfg.lr});
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<const Sample*> batch;
    std::vector<Matrix> grads;

    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates on raw draws keeps the order identical across standard libraries.
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);
            const double loss = model.loss_and_gradient(std::span<const Sample* const>(batch), grads);
            if (!std::isfinite(loss))
                throw DivergenceError("training diverged: non-finite loss in epoch " + std::to_string(epoch + 1));
            total += loss * static_cast<double>(end - start);
            opt.step(model.parameters(), grads);
            if constexpr (requires { model.on_step_end(); }) model.on_step_end();
        }
        result.loss_curve.push_back(total / static_cast<double>(data.size()));
        if constexpr (requires { model.on_epoch_end(epoch); }) model.on_epoch_end(epoch);
    }
    if constexpr (requires { model.on_train_end(); }) model.on_train_end();
    return result;
}

}  // namespace pairvoice::nn
