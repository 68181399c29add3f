#pragma once

#include "isf/data.hpp"
#include "isf/model.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace isf {

struct TrainConfig {
    double learning_rate = 1e-4;
    double weight_decay = 1e-4;
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    double epsilon_train = 1.0;
    double t_max = 400.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::vector<Eigen::Index> encoder_widths{256, 512, 256};
    std::vector<Eigen::Index> head_widths{256, 256, 1};
    Activation activation = Activation::relu;

    void validate() const;
};

struct AdamState {
    NetworkWeights m;
    NetworkWeights v;
    std::uint64_t step = 0;

    static AdamState zeros_like(const NetworkWeights& w);
};

/// Bias-corrected Adam with decoupled weight decay on weight matrices.
void adam_step(NetworkWeights& params, const NetworkWeights& grads, AdamState& state, const TrainConfig& config);

/// Seeded permutation of 0..n-1 chunked into batches; depends on (seed, epoch) only.
std::vector<std::vector<std::size_t>> batch_iterator(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                     std::uint64_t epoch);

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_history;  // mean per-sample loss of each epoch
    std::size_t floored = 0;
};

/// Fits normalization on `data`, initializes from config.seed and runs
/// config.epochs epochs of minibatch Adam. Throws DataError naming the first
/// row whose time exceeds t_max.
TrainResult train(const Dataset& data, const TrainConfig& config);

}  // namespace isf
