#include "isf/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace isf {

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
    if (!(learning_rate > 0.0)) fail("learning rate must be positive");
    if (!(weight_decay >= 0.0)) fail("weight decay must be non-negative");
    if (batch_size < 1) fail("batch size must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) fail("adam epsilon must be positive");
    if (encoder_widths.empty() || head_widths.empty()) fail("layer widths must be non-empty");
    if (head_widths.back() != 1) fail("head must end in a single unit");
    TimeGrid(t_max, epsilon_train);
}

AdamState AdamState::zeros_like(const NetworkWeights& w) { return AdamState{w.zeros_like(), w.zeros_like(), 0}; }

void adam_step(NetworkWeights& params, const NetworkWeights& grads, AdamState& state, const TrainConfig& config) {
    if (params.encoder.size() != grads.encoder.size() || params.head.size() != grads.head.size() ||
        params.encoder.size() != state.m.encoder.size() || params.head.size() != state.m.head.size())
        throw ShapeError("adam_step: layer counts differ");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    const double lr = config.learning_rate;

    auto update = [&](auto& p, const auto& g, auto& m, auto& v, bool decay) {
        if (p.rows() != g.rows() || p.cols() != g.cols() || m.rows() != p.rows() || m.cols() != p.cols())
            throw ShapeError("adam_step: parameter and gradient shapes differ");
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
        if (decay && config.weight_decay > 0.0) p *= 1.0 - lr * config.weight_decay;
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.adam_epsilon);
    };
    auto run = [&](std::vector<DenseLayer>& ps, const std::vector<DenseLayer>& gs, std::vector<DenseLayer>& ms,
                   std::vector<DenseLayer>& vs) {
        for (std::size_t i = 0; i < ps.size(); ++i) {
            update(ps[i].weight, gs[i].weight, ms[i].weight, vs[i].weight, true);
            update(ps[i].bias, gs[i].bias, ms[i].bias, vs[i].bias, false);
        }
    };
    run(params.encoder, grads.encoder, state.m.encoder, state.v.encoder);
    run(params.head, grads.head, state.m.head, state.v.head);
}

std::vector<std::vector<std::size_t>> batch_iterator(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                     std::uint64_t epoch) {
    if (batch_size < 1) throw std::invalid_argument("batch_iterator: batch size must be at least 1");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
    std::mt19937_64 rng(seq);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size)
        batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                             idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
    return batches;
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
    config.validate();
    data.validate();
    if (data.size() == 0) throw DataError("train: dataset is empty");
    for (Eigen::Index i = 0; i < data.time.size(); ++i)
        if (data.time[i] > config.t_max) {
            std::ostringstream msg;
            msg << "train: row " << i + 1 << " has time " << data.time[i] << " > t_max " << config.t_max;
            throw DataError(msg.str());
        }

    ModelShape shape;
    shape.input_dim = data.feature_dim();
    shape.encoder_widths = config.encoder_widths;
    shape.head_widths = config.head_widths;
    shape.activation = config.activation;
    std::mt19937_64 rng(config.seed);
    TrainResult result{init_params(shape, config.epsilon_train, config.t_max, rng), {}, 0};
    result.params.normalization = normalize_fit(data);

    const Eigen::MatrixXd x = result.params.normalization.apply(data.covariates);
    const std::vector<bool> censored = data.censored_flags();
    const NodeEmbedding nodes(result.params.training_grid(), result.params.embedding_dim());
    AdamState adam = AdamState::zeros_like(result.params.weights);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double total = 0.0;
        for (const auto& batch : batch_iterator(data.size(), config.batch_size, config.seed, epoch)) {
            const auto b = static_cast<Eigen::Index>(batch.size());
            Eigen::MatrixXd xb(b, x.cols());
            Eigen::VectorXd tb(b);
            std::vector<bool> cb(batch.size());
            for (Eigen::Index r = 0; r < b; ++r) {
                const auto src = batch[static_cast<std::size_t>(r)];
                xb.row(r) = x.row(static_cast<Eigen::Index>(src));
                tb[r] = data.time[static_cast<Eigen::Index>(src)];
                cb[static_cast<std::size_t>(r)] = censored[src];
            }
            auto lg = batch_loss_and_gradient(xb, tb, cb, nodes, result.params);
            total += lg.value * static_cast<double>(b);
            result.floored += lg.floored;
            adam_step(result.params.weights, lg.gradient, adam, config);
        }
        result.loss_history.push_back(total / static_cast<double>(data.size()));
    }
    return result;
}

}  // namespace isf
