#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace isf {

/// Sinusoidal time embedding: component 2i is sin(t / 10000^(2i/d)) and
/// component 2i+1 is cos of the same argument.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> encode_time(Scalar t, Eigen::Index dim) {
    if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("encode_time: dimension must be even and >= 2");
    if (!(t >= Scalar(0))) throw std::invalid_argument("encode_time: time must be non-negative");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pe(dim);
    for (Eigen::Index i = 0; i < dim / 2; ++i) {
        const Scalar freq = std::pow(Scalar(10000), Scalar(2 * i) / static_cast<Scalar>(dim));
        pe[2 * i] = std::sin(t / freq);
        pe[2 * i + 1] = std::cos(t / freq);
    }
    return pe;
}

/// One embedding per column, for each entry of `times`.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> encode_times(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& times, Eigen::Index dim) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(dim, times.size());
    for (Eigen::Index k = 0; k < times.size(); ++k) out.col(k) = encode_time<Scalar>(times[k], dim);
    return out;
}

}  // namespace isf
