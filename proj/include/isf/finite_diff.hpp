#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <type_traits>

namespace isf {

/// Central-difference gradient, (f(p + s·e_k) − f(p − s·e_k)) / (2s) per
/// coordinate k. When `scale_step` is set the step for coordinate k is
/// step·(1 + |p_k|).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> finite_diff_grad(
    const std::function<Scalar(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>& f,
    const std::type_identity_t<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& params, std::type_identity_t<Scalar> step,
    bool scale_step = false) {
    if (!(step > Scalar(0))) throw std::invalid_argument("finite_diff_grad: step must be positive");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad(params.size());
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> probe = params;
    for (Eigen::Index k = 0; k < params.size(); ++k) {
        const Scalar s = scale_step ? step * (Scalar(1) + std::abs(params[k])) : step;
        probe[k] = params[k] + s;
        const Scalar up = f(probe);
        probe[k] = params[k] - s;
        const Scalar down = f(probe);
        probe[k] = params[k];
        grad[k] = (up - down) / (Scalar(2) * s);
    }
    return grad;
}

}  // namespace isf
