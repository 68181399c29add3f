#include "isf/model.hpp"

#include "isf/positional_encoding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace isf {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "sigmoid"; }

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

// ---------------------------------------------------------------------------
// NetworkWeights

namespace {

template <typename Fn>
void for_each_layer(const NetworkWeights& w, Fn&& fn) {
    for (const auto& l : w.encoder) fn(l);
    for (const auto& l : w.head) fn(l);
}

}  // namespace

Eigen::Index NetworkWeights::parameter_count() const {
    Eigen::Index n = 0;
    for_each_layer(*this, [&](const DenseLayer& l) { n += l.weight.size() + l.bias.size(); });
    return n;
}

Eigen::VectorXd NetworkWeights::flatten() const {
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index k = 0;
    for_each_layer(*this, [&](const DenseLayer& l) {
        flat.segment(k, l.weight.size()) = Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
        k += l.weight.size();
        flat.segment(k, l.bias.size()) = l.bias;
        k += l.bias.size();
    });
    return flat;
}

void NetworkWeights::assign(const Eigen::VectorXd& flat) {
    if (flat.size() != parameter_count()) throw ShapeError("NetworkWeights::assign: wrong parameter count");
    Eigen::Index k = 0;
    auto load = [&](DenseLayer& l) {
        Eigen::Map<Eigen::VectorXd>(l.weight.data(), l.weight.size()) = flat.segment(k, l.weight.size());
        k += l.weight.size();
        l.bias = flat.segment(k, l.bias.size());
        k += l.bias.size();
    };
    for (auto& l : encoder) load(l);
    for (auto& l : head) load(l);
}

NetworkWeights NetworkWeights::zeros_like() const {
    NetworkWeights z = *this;
    for (auto& l : z.encoder) {
        l.weight.setZero();
        l.bias.setZero();
    }
    for (auto& l : z.head) {
        l.weight.setZero();
        l.bias.setZero();
    }
    return z;
}

// ---------------------------------------------------------------------------
// Normalization

Eigen::MatrixXd Normalization::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size()) {
        std::ostringstream msg;
        msg << "normalization: data has " << x.cols() << " covariates, statistics have " << mean.size();
        throw ShapeError(msg.str());
    }
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (stddev[j] > 0.0)
            out.col(j) = (x.col(j).array() - mean[j]) / stddev[j];
        else
            out.col(j).setZero();
    }
    return out;
}

Normalization Normalization::identity(Eigen::Index dim) {
    return Normalization{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

// ---------------------------------------------------------------------------
// ModelParams

Eigen::Index ModelParams::input_dim() const {
    return weights.encoder.empty() ? 0 : weights.encoder.front().weight.cols();
}

Eigen::Index ModelParams::embedding_dim() const {
    return weights.encoder.empty() ? 0 : weights.encoder.back().weight.rows();
}

ModelShape ModelParams::shape() const {
    ModelShape s;
    s.input_dim = input_dim();
    s.encoder_widths.clear();
    s.head_widths.clear();
    for (const auto& l : weights.encoder) s.encoder_widths.push_back(l.weight.rows());
    for (const auto& l : weights.head) s.head_widths.push_back(l.weight.rows());
    s.activation = activation;
    return s;
}

void ModelParams::validate() const {
    auto fail = [](const std::string& what) { throw ShapeError("model: " + what); };
    if (weights.encoder.empty() || weights.head.empty()) fail("encoder and head need at least one layer");
    auto check_chain = [&](const std::vector<DenseLayer>& layers, const char* name) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].bias.size() != layers[i].weight.rows())
                fail(std::string(name) + " layer " + std::to_string(i) + " bias/weight mismatch");
            if (i > 0 && layers[i].weight.cols() != layers[i - 1].weight.rows())
                fail(std::string(name) + " layer " + std::to_string(i) + " input width mismatch");
        }
    };
    check_chain(weights.encoder, "encoder");
    check_chain(weights.head, "head");
    const Eigen::Index d = embedding_dim();
    if (d < 2 || d % 2 != 0) fail("embedding dimension must be even and >= 2");
    if (weights.head.front().weight.cols() != d) fail("head input width must equal encoder output width");
    if (weights.head.back().weight.rows() != 1) fail("head must end in a single unit");
    if (normalization.mean.size() != input_dim() || normalization.stddev.size() != input_dim())
        fail("normalization statistics do not match input dimension");
}

ModelParams init_params(const ModelShape& shape, double epsilon_train, double t_max, std::mt19937_64& rng) {
    if (shape.input_dim < 1) throw ShapeError("init_params: input dimension must be positive");
    if (shape.encoder_widths.empty() || shape.head_widths.empty())
        throw ShapeError("init_params: empty layer list");
    ModelParams p;
    p.activation = shape.activation;
    p.epsilon_train = epsilon_train;
    p.t_max = t_max;
    p.normalization = Normalization::identity(shape.input_dim);
    auto make = [&](Eigen::Index in, Eigen::Index out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer l{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
        for (Eigen::Index j = 0; j < in; ++j)
            for (Eigen::Index i = 0; i < out; ++i) l.weight(i, j) = dist(rng);
        return l;
    };
    Eigen::Index in = shape.input_dim;
    for (auto w : shape.encoder_widths) {
        p.weights.encoder.push_back(make(in, w));
        in = w;
    }
    for (auto w : shape.head_widths) {
        p.weights.head.push_back(make(in, w));
        in = w;
    }
    p.weights.head.back().bias.setConstant(-2.0);
    p.validate();
    // validate() does not cover time settings.
    TimeGrid(t_max, epsilon_train);
    return p;
}

NodeEmbedding::NodeEmbedding(const TimeGrid& g, Eigen::Index dim)
    : grid(g), nodes(g.simpson_nodes()), encoding(encode_times<double>(nodes, dim)) {}

// ---------------------------------------------------------------------------
// Graph pieces

namespace graph {

using Matrix = Tape<double>::Matrix;

BoundWeights bind(Tape<double>& tape, const NetworkWeights& weights, bool trainable) {
    BoundWeights b;
    auto leaf = [&](const Matrix& m) { return trainable ? tape.variable(m) : tape.constant(m); };
    for (const auto& l : weights.encoder) b.encoder.push_back({leaf(l.weight), leaf(Matrix(l.bias))});
    for (const auto& l : weights.head) b.head.push_back({leaf(l.weight), leaf(Matrix(l.bias))});
    return b;
}

NetworkWeights collect_gradients(const BoundWeights& bound) {
    NetworkWeights g;
    for (const auto& l : bound.encoder) g.encoder.push_back({l.weight.grad(), l.bias.grad().col(0)});
    for (const auto& l : bound.head) g.head.push_back({l.weight.grad(), l.bias.grad().col(0)});
    return g;
}

namespace {

VarD activate(VarD v, Activation act) { return act == Activation::relu ? relu(v) : sigmoid(v); }

}  // namespace

VarD encode(const BoundWeights& w, VarD x, Activation act) {
    VarD h = x;
    for (std::size_t i = 0; i < w.encoder.size(); ++i) {
        h = affine(w.encoder[i].weight, w.encoder[i].bias, h);
        if (i + 1 < w.encoder.size()) h = activate(h, act);
    }
    return h;
}

VarD hazard_grid(const BoundWeights& w, VarD z, VarD pe, Activation act) {
    const Eigen::Index batch = z.cols(), nodes = pe.cols();
    VarD h = outer_add_columns(z, pe);
    for (std::size_t i = 0; i < w.head.size(); ++i) {
        h = affine(w.head[i].weight, w.head[i].bias, h);
        h = (i + 1 < w.head.size()) ? activate(h, act) : sigmoid(h);
    }
    h = clamp(h, kHazardFloor, kHazardCeil);
    return reshape(h, nodes, batch);
}

VarD simpson_log_survival(VarD g, double epsilon) {
    const Eigen::Index m = g.rows(), batch = g.cols();
    if (m < 3 || m % 2 == 0) throw ShapeError("simpson_log_survival: need 2K+1 nodes");
    const Eigen::Index k = (m - 1) / 2;
    const double w = epsilon / 6.0;
    const Matrix& gv = g.value();
    Matrix out(k + 1, batch);
    out.row(0).setZero();
    for (Eigen::Index j = 0; j < k; ++j)
        out.row(j + 1) = out.row(j) + w * (gv.row(2 * j) + 4.0 * gv.row(2 * j + 1) + gv.row(2 * j + 2));
    return g.tape().push(std::move(out), g.requires_grad(), [g, k, m, batch, w](Tape<double>& t, const Matrix& up) {
        // Interval j feeds rows j+1..K, so its weight is the suffix sum of up.
        Matrix dg = Matrix::Zero(m, batch);
        Eigen::RowVectorXd suffix = Eigen::RowVectorXd::Zero(batch);
        for (Eigen::Index j = k - 1; j >= 0; --j) {
            suffix += up.row(j + 1);
            dg.row(2 * j) += w * suffix;
            dg.row(2 * j + 1) += 4.0 * w * suffix;
            dg.row(2 * j + 2) += w * suffix;
        }
        t.accumulate(g, dg);
    });
}

VarD survival_from_log(VarD log_s) {
    VarD s = isf::exp(log_s);
    Matrix out = s.value();
    const Eigen::Index last = out.rows() - 1;
    out.row(0).setOnes();
    out.row(last).setZero();
    return s.tape().push(std::move(out), s.requires_grad(), [s, last](Tape<double>& t, const Matrix& up) {
        Matrix g = up;
        g.row(0).setZero();
        g.row(last).setZero();
        t.accumulate(s, g);
    });
}

VarD interval_masses(VarD s) {
    const Eigen::Index k = s.rows() - 1;
    Matrix out = s.value().topRows(k) - s.value().bottomRows(k);
    return s.tape().push(std::move(out), s.requires_grad(), [s, k](Tape<double>& t, const Matrix& up) {
        Matrix g = Matrix::Zero(k + 1, up.cols());
        g.topRows(k) += up;
        g.bottomRows(k) -= up;
        t.accumulate(s, g);
    });
}

VarD masked_nll(VarD p, VarD mask, std::size_t* floored) {
    VarD likelihood = col_sum(mul(p, mask));
    if (floored != nullptr)
        *floored += static_cast<std::size_t>((likelihood.value().array() < kLikelihoodFloor).count());
    VarD safe = clamp(likelihood, kLikelihoodFloor, std::numeric_limits<double>::max());
    return neg(isf::log(safe));
}

}  // namespace graph

// ---------------------------------------------------------------------------
// Public evaluation API

namespace {

void require_input(const ModelParams& params, Eigen::Index cols) {
    if (cols != params.input_dim()) {
        std::ostringstream msg;
        msg << "model expects " << params.input_dim() << " covariates, got " << cols;
        throw ShapeError(msg.str());
    }
}

Eigen::MatrixXd curves_for_block(const Eigen::MatrixXd& x_block, const NodeEmbedding& nodes,
                                 const ModelParams& params) {
    Tape<double> tape;
    auto w = graph::bind(tape, params.weights, false);
    auto z = graph::encode(w, tape.constant(x_block.transpose()), params.activation);
    auto h = graph::hazard_grid(w, z, tape.constant(nodes.encoding), params.activation);
    auto g = isf::log(scale_shift(h, -1.0, 1.0));
    auto s = graph::survival_from_log(graph::simpson_log_survival(g, nodes.grid.epsilon()));
    return s.value();
}

Eigen::MatrixXd masks_for(const Eigen::VectorXd& t_obs, const std::vector<bool>& censored, const TimeGrid& grid) {
    if (static_cast<std::size_t>(t_obs.size()) != censored.size())
        throw ShapeError("loss: times and censoring flags differ in length");
    Eigen::MatrixXd mask(static_cast<Eigen::Index>(grid.intervals()), t_obs.size());
    for (Eigen::Index b = 0; b < t_obs.size(); ++b)
        mask.col(b) = indicator(t_obs[b], censored[static_cast<std::size_t>(b)], grid).as_vector();
    return mask;
}

struct BatchGraph {
    graph::VarD loss;
    std::size_t floored = 0;
};

BatchGraph build_batch(Tape<double>& tape, const graph::BoundWeights& w, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& t_obs, const std::vector<bool>& censored, const NodeEmbedding& nodes,
                       const ModelParams& params) {
    require_input(params, x.cols());
    if (x.rows() != t_obs.size()) throw ShapeError("loss: covariate rows and times differ in length");
    if (nodes.encoding.rows() != params.embedding_dim())
        throw ShapeError("loss: node embedding dimension does not match the model");
    BatchGraph out;
    auto z = graph::encode(w, tape.constant(x.transpose()), params.activation);
    auto h = graph::hazard_grid(w, z, tape.constant(nodes.encoding), params.activation);
    auto g = isf::log(scale_shift(h, -1.0, 1.0));
    auto s = graph::survival_from_log(graph::simpson_log_survival(g, nodes.grid.epsilon()));
    auto p = graph::interval_masses(s);
    auto nll = graph::masked_nll(p, tape.constant(masks_for(t_obs, censored, nodes.grid)), &out.floored);
    out.loss = mean(nll);
    return out;
}

}  // namespace

Eigen::MatrixXd survival_curves(const Eigen::MatrixXd& x, const TimeGrid& grid, const ModelParams& params) {
    require_input(params, x.cols());
    const NodeEmbedding nodes(grid, params.embedding_dim());
    const Eigen::Index m = nodes.nodes.size();
    // Keep the head activations around 2^16 columns per block.
    const Eigen::Index block = std::max<Eigen::Index>(1, (Eigen::Index{1} << 16) / m);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.points()), x.rows());
    for (Eigen::Index start = 0; start < x.rows(); start += block) {
        const Eigen::Index n = std::min(block, x.rows() - start);
        out.middleCols(start, n) = curves_for_block(x.middleRows(start, n), nodes, params);
    }
    return out;
}

Eigen::VectorXd encode_sample(const Eigen::VectorXd& x, const ModelParams& params) {
    require_input(params, x.size());
    Tape<double> tape;
    auto w = graph::bind(tape, params.weights, false);
    return graph::encode(w, tape.constant(x), params.activation).value().col(0);
}

double hazard(const Eigen::VectorXd& x, double t, const ModelParams& params) {
    require_input(params, x.size());
    Tape<double> tape;
    auto w = graph::bind(tape, params.weights, false);
    auto z = graph::encode(w, tape.constant(x), params.activation);
    auto pe = tape.constant(encode_time<double>(t, params.embedding_dim()));
    return graph::hazard_grid(w, z, pe, params.activation).value()(0, 0);
}

SurvivalCurve survival_curve(const Eigen::VectorXd& x, const TimeGrid& grid, const ModelParams& params) {
    require_input(params, x.size());
    const NodeEmbedding nodes(grid, params.embedding_dim());
    return SurvivalCurve{grid, curves_for_block(x.transpose(), nodes, params).col(0)};
}

IntervalMasses interval_masses(const SurvivalCurve& curve) {
    const auto k = static_cast<Eigen::Index>(curve.grid.intervals());
    if (curve.s_values.size() != k + 1) throw ShapeError("interval_masses: curve length does not match grid");
    return IntervalMasses{curve.grid, curve.s_values.head(k) - curve.s_values.tail(k)};
}

Prediction predict(const Eigen::VectorXd& x, const TimeGrid& grid_infer, const ModelParams& params) {
    SurvivalCurve curve = survival_curve(x, grid_infer, params);
    IntervalMasses masses = interval_masses(curve);
    return Prediction{std::move(curve), std::move(masses)};
}

LossValue loss(const Eigen::VectorXd& x, double t_obs, bool censored, const TimeGrid& grid,
               const ModelParams& params) {
    const NodeEmbedding nodes(grid, params.embedding_dim());
    return batch_loss(x.transpose(), Eigen::VectorXd::Constant(1, t_obs), {censored}, nodes, params);
}

LossValue batch_loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& t_obs, const std::vector<bool>& censored,
                     const NodeEmbedding& nodes, const ModelParams& params) {
    Tape<double> tape;
    auto w = graph::bind(tape, params.weights, false);
    auto built = build_batch(tape, w, x, t_obs, censored, nodes, params);
    return LossValue{built.loss.value()(0, 0), built.floored};
}

LossAndGradient batch_loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& t_obs,
                                        const std::vector<bool>& censored, const NodeEmbedding& nodes,
                                        const ModelParams& params) {
    Tape<double> tape;
    auto w = graph::bind(tape, params.weights, true);
    auto built = build_batch(tape, w, x, t_obs, censored, nodes, params);
    tape.backward(built.loss);
    return LossAndGradient{built.loss.value()(0, 0), built.floored, graph::collect_gradients(w)};
}

}  // namespace isf
