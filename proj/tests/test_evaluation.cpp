#include "isf/evaluation.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using Eigen::MatrixXd;
using Eigen::VectorXd;
using isf::Dataset;
using isf::TimeGrid;

namespace {

Dataset make(std::initializer_list<double> times, std::initializer_list<bool> events) {
    Dataset d;
    d.time = Eigen::Map<const VectorXd>(times.begin(), static_cast<Eigen::Index>(times.size()));
    d.event.resize(static_cast<Eigen::Index>(events.size()));
    Eigen::Index k = 0;
    for (bool e : events) d.event[k++] = e;
    d.covariates = MatrixXd::Zero(d.time.size(), 1);
    return d;
}

// S_i(t) = exp(−r_i·t) on the grid points, one column per sample.
MatrixXd exponential_curves(const VectorXd& rate, const TimeGrid& grid) {
    MatrixXd s(static_cast<Eigen::Index>(grid.points()), rate.size());
    for (Eigen::Index i = 0; i < rate.size(); ++i)
        for (std::size_t k = 0; k < grid.points(); ++k)
            s(static_cast<Eigen::Index>(k), i) = std::exp(-rate[i] * grid.point(k));
    return s;
}

Dataset synth(std::size_t n, double censor, std::uint64_t seed) {
    isf::SynthSpec spec;
    spec.n = n;
    spec.covariate_dim = 3;
    spec.weights = VectorXd::Constant(3, 0.6);
    spec.censor_horizon = censor;
    spec.seed = seed;
    return isf::synth_exponential(spec).data;
}

}  // namespace

TEST_CASE("comparable pairs") {
    const Dataset a = make({2.0, 5.0}, {true, false});
    CHECK(isf::judge_pair(a, 0, 1, 0.0, 0.0).comparable);
    CHECK(isf::comparable_pairs(a).size() == 1);

    const Dataset b = make({2.0, 5.0}, {false, true});
    CHECK(!isf::judge_pair(b, 0, 1, 0.0, 0.0).comparable);
    CHECK(isf::comparable_pairs(b).empty());

    const Dataset c = make({3.0, 3.0}, {true, true});
    CHECK(isf::comparable_pairs(c).empty());

    const auto v = isf::judge_pair(a, 0, 1, 0.7, 0.7);
    CHECK(v.tied_prediction);
    CHECK(!v.concordant);
}

TEST_CASE("pair count agrees with the brute-force oracle") {
    const Dataset d = synth(300, 2.0, 4);
    std::mt19937_64 rng(1);
    const VectorXd scores = isf::oracle::random_vector(300, rng);
    std::size_t pairs = 0;
    const double ref = isf::oracle::brute_force_ci(scores, d, &pairs);
    const auto r = isf::c_index_scores(scores, d);
    CHECK(r.pairs == pairs);
    CHECK(r.pairs == isf::comparable_pairs(d).size());
    CHECK(*r.value == doctest::Approx(ref).epsilon(1e-15));
}

TEST_CASE("perfect ordering and all ties") {
    const Dataset d = make({1.2, 2.5, 3.1, 4.0, 7.7}, {true, true, false, true, true});
    const TimeGrid grid(8.0, 1.0);
    const VectorXd inverse_time = d.time.cwiseInverse();
    CHECK(*isf::c_index_scores(inverse_time, d).value == 1.0);
    CHECK(*isf::c_index_antolini(exponential_curves(inverse_time, grid), grid, d).value == 1.0);

    const auto tied = isf::c_index_scores(VectorXd::Constant(5, 0.3), d);
    CHECK(*tied.value == 0.5);
    CHECK(tied.ties == tied.pairs);
    CHECK(*isf::c_index_antolini(exponential_curves(VectorXd::Ones(5), grid), grid, d).value == 0.5);
}

TEST_CASE("no comparable pair gives an undefined result") {
    const Dataset d = make({1.0, 2.0, 3.0}, {false, false, false});
    const TimeGrid grid(4.0, 1.0);
    const auto r = isf::c_index_literal(exponential_curves(VectorXd::Ones(3), grid), grid, d);
    CHECK(!r.defined());
    CHECK(r.pairs == 0);
    CHECK(!isf::c_index_antolini(exponential_curves(VectorXd::Ones(3), grid), grid, d).defined());
}

TEST_CASE("rank-statistic properties") {
    const Dataset d = synth(400, 3.0, 5);
    std::mt19937_64 rng(6);
    const VectorXd w = isf::oracle::random_vector(400, rng).array().tanh() * 0.5 + 0.5;
    const double base = *isf::c_index_scores(w, d).value;
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    const VectorXd flipped = (1.0 - w.array()).matrix();
    CHECK(*isf::c_index_scores(flipped, d).value == doctest::Approx(1.0 - base).epsilon(1e-14));
    const VectorXd warped = (3.0 * w.array()).exp().matrix();
    CHECK(*isf::c_index_scores(warped, d).value == base);
}

TEST_CASE("true curves on censorless data give the rank-by-rate CI") {
    isf::SynthSpec spec;
    spec.n = 2000;
    spec.covariate_dim = 4;
    spec.weights = VectorXd::Constant(4, 0.55);
    spec.base_rate = 0.1;
    spec.seed = 13;
    const auto r = isf::synth_exponential(spec);
    const TimeGrid grid(std::ceil(r.data.max_time()), 1.0);
    const MatrixXd curves = isf::oracle::true_curves(r.oracle, grid);
    const auto oracle = isf::c_index_scores(r.oracle.rate, r.data);
    const auto antolini = isf::c_index_antolini(curves, grid, r.data);
    CHECK(antolini.pairs == oracle.pairs);
    CHECK(*antolini.value == *oracle.value);
}

TEST_CASE("pair subsampling above the exact budget") {
    const Dataset d = synth(600, 3.0, 7);
    std::mt19937_64 rng(8);
    const VectorXd scores = isf::oracle::random_vector(600, rng) - 0.3 * d.time;
    const auto exact = isf::c_index_scores(scores, d);
    isf::ConcordanceOptions opt;
    opt.max_exact_samples = 100;
    opt.sampled_pairs = 400000;
    const auto sampled = isf::c_index_scores(scores, d, opt);
    CHECK(!exact.subsampled);
    CHECK(sampled.subsampled);
    CHECK(std::abs(*sampled.value - *exact.value) < 0.01);
}

TEST_CASE("curves are read at the right end of the containing interval") {
    const TimeGrid grid(4.0, 1.0);
    CHECK(isf::curve_index(0.0, grid) == 1);
    CHECK(isf::curve_index(1.0, grid) == 1);
    CHECK(isf::curve_index(1.5, grid) == 2);
    CHECK(isf::curve_index(4.0, grid) == 4);

    const Dataset d = make({1.5}, {true});
    MatrixXd s(5, 1);
    s << 1.0, 0.8, 0.6, 0.3, 0.0;
    CHECK(isf::own_time_cdf(s, grid, d)[0] == doctest::Approx(0.4));
    CHECK_THROWS_AS(isf::own_time_cdf(MatrixXd::Ones(4, 1), grid, d), isf::ShapeError);
}

TEST_CASE("model overloads stay in range") {
    const Dataset d = synth(200, 3.0, 9);
    isf::ModelParams p = isf::oracle::random_model(3, {8}, {8, 1}, isf::Activation::relu, 1.0,
                                                   std::ceil(d.max_time()), 3);
    p.normalization = isf::Normalization::identity(3);
    const TimeGrid grid = p.training_grid();
    for (const auto& r : {isf::c_index_literal(p, d, grid), isf::c_index_antolini(p, d, grid)}) {
        REQUIRE(r.defined());
        CHECK(*r.value >= 0.0);
        CHECK(*r.value <= 1.0);
    }
}
