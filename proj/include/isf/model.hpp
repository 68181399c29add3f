#pragma once

// Implicit survival function: ĥ(t|x) = H(E(x) + PE(t)), survival obtained by
// Simpson quadrature of ln(1 − ĥ) over the Simpson nodes of a TimeGrid.
//
// Covariates passed to the functions here are expected to be normalized
// already; the Dataset-level helpers apply ModelParams::normalization.

#include "isf/autodiff.hpp"
#include "isf/time_grid.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace isf {

inline constexpr double kHazardFloor = 1e-7;
inline constexpr double kHazardCeil = 1.0 - 1e-7;
inline constexpr double kLikelihoodFloor = 1e-12;

enum class Activation { relu, sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

/// Encoder and head layers. Also used as the gradient container.
struct NetworkWeights {
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> head;

    Eigen::Index parameter_count() const;
    Eigen::VectorXd flatten() const;
    void assign(const Eigen::VectorXd& flat);
    NetworkWeights zeros_like() const;
};

/// Per-covariate z-score statistics.
struct Normalization {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    /// Rows of `x` are samples. Columns with zero spread map to 0.
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    static Normalization identity(Eigen::Index dim);
};

/// Layer widths. The encoder output width is the embedding dimension d and
/// must be even; the head ends in a single sigmoid unit.
struct ModelShape {
    Eigen::Index input_dim = 0;
    std::vector<Eigen::Index> encoder_widths{256, 512, 256};
    std::vector<Eigen::Index> head_widths{256, 256, 1};
    Activation activation = Activation::relu;
};

struct ModelParams {
    NetworkWeights weights;
    Activation activation = Activation::relu;
    double epsilon_train = 1.0;
    double t_max = 400.0;
    Normalization normalization;

    Eigen::Index input_dim() const;
    Eigen::Index embedding_dim() const;
    ModelShape shape() const;
    TimeGrid training_grid() const { return TimeGrid(t_max, epsilon_train); }

    /// Throws ShapeError if the layer chain is inconsistent.
    void validate() const;
};

/// Glorot-uniform weights, zero biases, final head bias -2.
ModelParams init_params(const ModelShape& shape, double epsilon_train, double t_max, std::mt19937_64& rng);

/// Simpson nodes of a grid together with their time embeddings (d x (2K+1)).
/// Independent of the samples, so built once per (grid, d).
struct NodeEmbedding {
    TimeGrid grid;
    Eigen::VectorXd nodes;
    Eigen::MatrixXd encoding;

    NodeEmbedding(const TimeGrid& grid, Eigen::Index dim);
};

/// Ŝ on the K+1 grid points, with Ŝ(t_0) = 1 and Ŝ(t_K) = 0.
struct SurvivalCurve {
    TimeGrid grid;
    Eigen::VectorXd s_values;
};

/// p̂ per interval: p_i = Ŝ(t_i) − Ŝ(t_{i+1}).
struct IntervalMasses {
    TimeGrid grid;
    Eigen::VectorXd p_values;
};

struct Prediction {
    SurvivalCurve curve;
    IntervalMasses masses;
};

Eigen::VectorXd encode_sample(const Eigen::VectorXd& x, const ModelParams& params);
double hazard(const Eigen::VectorXd& x, double t, const ModelParams& params);
SurvivalCurve survival_curve(const Eigen::VectorXd& x, const TimeGrid& grid, const ModelParams& params);
IntervalMasses interval_masses(const SurvivalCurve& curve);
Prediction predict(const Eigen::VectorXd& x, const TimeGrid& grid_infer, const ModelParams& params);

/// Survival curves for many samples (rows of `x`), one curve per column of
/// the returned (K+1) x n matrix. Evaluated in chunks to bound memory.
Eigen::MatrixXd survival_curves(const Eigen::MatrixXd& x, const TimeGrid& grid, const ModelParams& params);

struct LossValue {
    double value = 0.0;
    std::size_t floored = 0;  // samples whose likelihood hit kLikelihoodFloor
};

/// Masked negative log-likelihood of a single sample.
LossValue loss(const Eigen::VectorXd& x, double t_obs, bool censored, const TimeGrid& grid,
               const ModelParams& params);

struct LossAndGradient {
    double value = 0.0;  // mean over the batch
    std::size_t floored = 0;
    NetworkWeights gradient;
};

/// Mean masked NLL over a batch (rows of `x`) and its gradient with respect
/// to every weight and bias. `nodes` must be built for `grid` and the model's
/// embedding dimension.
LossAndGradient batch_loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& t_obs,
                                        const std::vector<bool>& censored, const NodeEmbedding& nodes,
                                        const ModelParams& params);

/// Same value as batch_loss_and_gradient without the reverse pass.
LossValue batch_loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& t_obs, const std::vector<bool>& censored,
                     const NodeEmbedding& nodes, const ModelParams& params);

/// Tape-level building blocks, exposed for tests.
namespace graph {

using VarD = Var<double>;

struct BoundLayer {
    VarD weight;
    VarD bias;
};

struct BoundWeights {
    std::vector<BoundLayer> encoder;
    std::vector<BoundLayer> head;
};

BoundWeights bind(Tape<double>& tape, const NetworkWeights& weights, bool trainable);
NetworkWeights collect_gradients(const BoundWeights& bound);

/// x is p x B (one sample per column); returns d x B.
VarD encode(const BoundWeights& w, VarD x, Activation act);

/// z is d x B, pe is d x M. Returns clamped ĥ as an M x B matrix.
VarD hazard_grid(const BoundWeights& w, VarD z, VarD pe, Activation act);

/// Composite Simpson prefix sums of g (M x B, M = 2K+1 nodes) -> (K+1) x B.
VarD simpson_log_survival(VarD g, double epsilon);

/// exp, then pins row 0 to 1 and row K to 0 with no gradient through them.
VarD survival_from_log(VarD log_s);

/// (K+1) x B -> K x B successive differences.
VarD interval_masses(VarD s);

/// mask is K x B. Returns per-sample −ln max(Σ mask·p, floor) as 1 x B.
VarD masked_nll(VarD p, VarD mask, std::size_t* floored);

}  // namespace graph

}  // namespace isf
