#include "isf/positional_encoding.hpp"
#include "isf/time_grid.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

TEST_CASE("encode at zero") {
    auto pe = isf::encode_time(0.0, 8);
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(pe[2 * i] == 0.0);
        CHECK(pe[2 * i + 1] == 1.0);
    }
}

TEST_CASE("encode matches direct evaluation") {
    CHECK(isf::encode_time(1.0, 16)[0] == doctest::Approx(0.841471).epsilon(1e-6));
    CHECK(isf::encode_time(1.0, 16)[0] == std::sin(1.0));
    CHECK(isf::encode_time(10000.0, 4)[2] == doctest::Approx(std::sin(100.0)).epsilon(1e-12));
    CHECK(isf::encode_time(10000.0, 4)[3] == doctest::Approx(std::cos(100.0)).epsilon(1e-12));
}

TEST_CASE("encode rejects bad dimensions and times") {
    CHECK_THROWS_AS(isf::encode_time(1.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(isf::encode_time(1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(isf::encode_time(-1.0, 4), std::invalid_argument);
}

TEST_CASE("components bounded and deterministic") {
    for (double t = 0.0; t < 500.0; t += 3.7) {
        auto a = isf::encode_time(t, 64);
        auto b = isf::encode_time(t, 64);
        CHECK(a.cwiseAbs().maxCoeff() <= 1.0);
        CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 64) == 0);
    }
}

TEST_CASE("grid points have distinct embeddings") {
    for (double eps : {0.1, 1.0}) {
        isf::TimeGrid g(400, eps);
        const auto pe = isf::encode_times<double>(g.time_points(), 64);
        double min_dist = 1e300;
        const Eigen::Index n = pe.cols();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) min_dist = std::min(min_dist, (pe.col(i) - pe.col(j)).squaredNorm());
        CHECK(min_dist > 0.0);
    }
}
