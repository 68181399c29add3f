#include "isf/finite_diff.hpp"
#include "isf/model.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using Eigen::MatrixXd;
using Eigen::VectorXd;
using isf::Activation;
using isf::ModelParams;
using isf::TimeGrid;

namespace {

ModelParams small_model(Activation act, double eps, double t_max, std::uint64_t seed) {
    return isf::oracle::random_model(3, {6, 4}, {5, 1}, act, eps, t_max, seed);
}

// Zero head weights and biases: ĥ = sigmoid(0) = 0.5 everywhere.
ModelParams constant_half(double eps, double t_max) {
    ModelParams p = small_model(Activation::relu, eps, t_max, 1);
    for (auto& l : p.weights.head) {
        l.weight.setZero();
        l.bias.setZero();
    }
    return p;
}

}  // namespace

TEST_CASE("encode_sample: zero and identity encoders") {
    ModelParams p = small_model(Activation::relu, 1.0, 5.0, 3);
    for (auto& l : p.weights.encoder) {
        l.weight.setZero();
        l.bias.setZero();
    }
    std::mt19937_64 rng(0);
    const VectorXd x = isf::oracle::random_vector(3, rng);
    CHECK(isf::encode_sample(x, p).isZero(0.0));

    ModelParams id = isf::oracle::random_model(4, {4}, {3, 1}, Activation::relu, 1.0, 5.0, 2);
    id.weights.encoder[0].weight = MatrixXd::Identity(4, 4);
    id.weights.encoder[0].bias.setZero();
    const VectorXd x4 = isf::oracle::random_vector(4, rng);
    CHECK(isf::encode_sample(x4, id) == x4);

    const ModelParams r = small_model(Activation::sigmoid, 1.0, 5.0, 4);
    CHECK(isf::encode_sample(x, r) == isf::encode_sample(x, r));
    CHECK_THROWS_AS(isf::encode_sample(VectorXd::Zero(2), r), isf::ShapeError);
}

TEST_CASE("mismatched encoder and head widths are rejected") {
    ModelParams p = small_model(Activation::relu, 1.0, 5.0, 3);
    p.weights.head[0].weight = MatrixXd::Zero(5, 6);
    CHECK_THROWS_AS(p.validate(), isf::ShapeError);
}

TEST_CASE("hazard: saturation, sigmoid(0) and range sweep") {
    ModelParams p = small_model(Activation::relu, 1.0, 5.0, 5);
    const VectorXd x = VectorXd::Ones(3);
    auto& last = p.weights.head.back();
    last.weight.setZero();
    last.bias.setConstant(-1e6);
    CHECK(isf::hazard(x, 2.0, p) == isf::kHazardFloor);

    const ModelParams half = constant_half(1.0, 5.0);
    CHECK(isf::hazard(x, 3.3, half) == 0.5);

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> t(0.0, 50.0);
    for (int m = 0; m < 10; ++m) {
        const ModelParams r = small_model(m % 2 ? Activation::sigmoid : Activation::relu, 1.0, 50.0, 100 + m);
        for (int k = 0; k < 1000; ++k) {
            const VectorXd xv = 3.0 * isf::oracle::random_vector(3, rng);
            const double tv = t(rng);
            const double h = isf::hazard(xv, tv, r);
            REQUIRE(h > 0.0);
            REQUIRE(h < 1.0);
            if (k % 100 == 0) CHECK(h == doctest::Approx(isf::oracle::hazard(r, xv, tv)).epsilon(1e-12));
        }
    }
}

TEST_CASE("constant hazard 0.5: exact curve and masses") {
    const TimeGrid grid(6.0, 1.0);
    const ModelParams p = constant_half(1.0, 6.0);
    const auto pred = isf::predict(VectorXd::Zero(3), grid, p);
    const VectorXd& s = pred.curve.s_values;
    REQUIRE(s.size() == 7);
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(std::abs(s[i] - std::pow(0.5, static_cast<double>(i))) < 1e-12);
    CHECK(std::abs(s[2] - 0.25) < 1e-12);
    CHECK(s[6] == 0.0);
    CHECK(std::abs(pred.masses.p_values[0] - 0.5) < 1e-12);
}

TEST_CASE("K = 1 grid puts all mass in the single interval") {
    const TimeGrid grid(1.0, 1.0);
    const auto pred = isf::predict(VectorXd::Ones(3), grid, small_model(Activation::relu, 1.0, 1.0, 9));
    REQUIRE(pred.masses.p_values.size() == 1);
    CHECK(pred.masses.p_values[0] == 1.0);
}

TEST_CASE("distribution invariants over random parameters") {
    std::mt19937_64 rng(23);
    for (int m = 0; m < 50; ++m) {
        const double eps = m % 3 == 0 ? 0.5 : 1.0;
        const TimeGrid grid(20.0, eps);
        const ModelParams p = small_model(m % 2 ? Activation::sigmoid : Activation::relu, eps, 20.0, 200 + m);
        const VectorXd x = 2.0 * isf::oracle::random_vector(3, rng);
        const auto pred = isf::predict(x, grid, p);
        const VectorXd& s = pred.curve.s_values;
        const VectorXd& q = pred.masses.p_values;
        CHECK(s[0] == 1.0);
        CHECK(s[s.size() - 1] == 0.0);
        for (Eigen::Index i = 0; i + 1 < s.size(); ++i) CHECK(s[i] >= s[i + 1]);
        CHECK(q.minCoeff() >= 0.0);
        CHECK(std::abs(q.sum() - 1.0) < 1e-12);
        for (Eigen::Index i = 0; i < q.size(); ++i) CHECK(q[i] == s[i] - s[i + 1]);
    }
}

TEST_CASE("batched curves match per-sample curves") {
    std::mt19937_64 rng(2);
    const TimeGrid grid(10.0, 0.5);
    const ModelParams p = small_model(Activation::relu, 0.5, 10.0, 8);
    MatrixXd X(7, 3);
    for (Eigen::Index i = 0; i < 7; ++i) X.row(i) = isf::oracle::random_vector(3, rng).transpose();
    const MatrixXd S = isf::survival_curves(X, grid, p);
    for (Eigen::Index i = 0; i < 7; ++i) {
        const VectorXd s = isf::survival_curve(X.row(i).transpose(), grid, p).s_values;
        CHECK((S.col(i) - s).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("loss: closed-form values for the constant model") {
    const TimeGrid grid(6.0, 1.0);
    const ModelParams p = constant_half(1.0, 6.0);
    const VectorXd x = VectorXd::Zero(3);
    CHECK(std::abs(isf::loss(x, 0.5, false, grid, p).value - std::log(2.0)) < 1e-12);
    CHECK(std::abs(isf::loss(x, 0.5, true, grid, p).value) < 1e-12);
}

TEST_CASE("masked loss equals the closed forms on random models") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 15.0);
    for (int m = 0; m < 100; ++m) {
        const double eps = m % 2 ? 0.5 : 1.0;
        const TimeGrid grid(15.0, eps);
        const ModelParams p = small_model(m % 3 ? Activation::relu : Activation::sigmoid, eps, 15.0, 400 + m);
        const VectorXd x = isf::oracle::random_vector(3, rng);
        const double t = u(rng);
        const VectorXd s = isf::survival_curve(x, grid, p).s_values;
        const std::size_t i = grid.interval_index(t);
        CHECK(std::abs(isf::loss(x, t, true, grid, p).value - isf::oracle::censored_loss(s, i)) < 1e-12);
        CHECK(std::abs(isf::loss(x, t, false, grid, p).value - isf::oracle::uncensored_loss(s, i)) < 1e-12);
    }
}

TEST_CASE("likelihood floor is counted, not thrown") {
    const TimeGrid grid(30.0, 1.0);
    ModelParams p = small_model(Activation::relu, 1.0, 30.0, 6);
    auto& last = p.weights.head.back();
    last.weight.setZero();
    last.bias.setConstant(40.0);  // ĥ pinned at the ceiling: Ŝ collapses after one step
    const auto l = isf::loss(VectorXd::Zero(3), 20.0, true, grid, p);
    CHECK(l.floored == 1);
    CHECK(l.value == doctest::Approx(-std::log(isf::kLikelihoodFloor)));
}

TEST_CASE("batch gradient matches finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const double eps = seed % 2 ? 0.5 : 1.0;
        const TimeGrid grid(6.0, eps);
        ModelParams p = small_model(seed % 2 ? Activation::sigmoid : Activation::relu, eps, 6.0, 900 + seed);
        const isf::NodeEmbedding nodes(grid, p.embedding_dim());
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 6.0);
        MatrixXd X(4, 3);
        VectorXd t(4);
        for (Eigen::Index i = 0; i < 4; ++i) {
            X.row(i) = isf::oracle::random_vector(3, rng).transpose();
            t[i] = u(rng);
        }
        const std::vector<bool> censored{true, false, true, false};

        const auto lg = isf::batch_loss_and_gradient(X, t, censored, nodes, p);
        CHECK(lg.value == doctest::Approx(isf::batch_loss(X, t, censored, nodes, p).value).epsilon(1e-14));

        const VectorXd flat = p.weights.flatten();
        std::function<double(const VectorXd&)> f = [&](const VectorXd& v) {
            ModelParams q = p;
            q.weights.assign(v);
            return isf::batch_loss(X, t, censored, nodes, q).value;
        };
        const VectorXd fd = isf::finite_diff_grad(f, flat, 1e-6, true);
        const VectorXd g = lg.gradient.flatten();
        REQUIRE(g.size() == fd.size());
        double worst = 0.0;
        for (Eigen::Index k = 0; k < g.size(); ++k) worst = std::max(worst, isf::oracle::relative_error(g[k], fd[k]));
        CHECK(worst < 1e-4);
    }
}

// At the default widths the kinks of individual ReLU units are small
// relative to the whole head; tiny random nets can exceed 1e-3.
TEST_CASE("Simpson curve vs dense trapezoid oracle, ReLU networks") {
    std::mt19937_64 rng(41);
    for (int m = 0; m < 3; ++m) {
        const TimeGrid grid(12.0, 1.0);
        isf::ModelShape shape;
        shape.input_dim = 3;
        std::mt19937_64 init(600 + m);
        const ModelParams p = isf::init_params(shape, 1.0, 12.0, init);
        const VectorXd x = isf::oracle::random_vector(3, rng);
        const VectorXd s = isf::survival_curve(x, grid, p).s_values;
        const VectorXd ref = isf::oracle::trapezoid_survival(p, x, grid, 100);
        const Eigen::Index K = static_cast<Eigen::Index>(grid.intervals());
        CHECK((s.head(K) - ref.head(K)).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("Simpson error shrinks at fourth order for smooth networks") {
    std::mt19937_64 rng(43);
    for (int m = 0; m < 3; ++m) {
        const ModelParams p = small_model(Activation::sigmoid, 1.0, 8.0, 700 + m);
        const VectorXd x = isf::oracle::random_vector(3, rng);
        // Reference on the coarsest grid's points with a very fine trapezoid.
        const TimeGrid coarse(8.0, 1.0);
        const VectorXd ref = isf::oracle::trapezoid_survival(p, x, coarse, 4000);
        std::vector<double> err;
        for (double eps : {1.0, 0.5, 0.25}) {
            const TimeGrid grid(8.0, eps);
            const VectorXd s = isf::survival_curve(x, grid, p).s_values;
            const int stride = static_cast<int>(std::lround(1.0 / eps));
            double e = 0.0;
            for (Eigen::Index k = 0; k < 8; ++k) e = std::max(e, std::abs(s[k * stride] - ref[k]));
            err.push_back(e);
        }
        CHECK(err.back() < 1e-6);
        CHECK(err[0] / err[1] >= 8.0);
        CHECK(err[1] / err[2] >= 8.0);
    }
}

TEST_CASE("predict on the training grid equals survival_curve") {
    const ModelParams p = small_model(Activation::relu, 1.0, 10.0, 12);
    const VectorXd x = VectorXd::Constant(3, 0.4);
    const auto pred = isf::predict(x, p.training_grid(), p);
    CHECK(pred.curve.s_values == isf::survival_curve(x, p.training_grid(), p).s_values);
}

TEST_CASE("constant-hazard curves coincide at shared points for any inference spacing") {
    const ModelParams p = constant_half(1.0, 8.0);
    const VectorXd x = VectorXd::Zero(3);
    const VectorXd base = isf::predict(x, TimeGrid(8.0, 1.0), p).curve.s_values;
    for (double eps : {0.5, 0.25, 0.1}) {
        const VectorXd s = isf::predict(x, TimeGrid(8.0, eps), p).curve.s_values;
        const int stride = static_cast<int>(std::lround(1.0 / eps));
        for (Eigen::Index k = 0; k < 8; ++k) CHECK(std::abs(s[k * stride] - base[k]) < 1e-12);
    }
}
