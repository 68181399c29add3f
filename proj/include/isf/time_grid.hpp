#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace isf {

/// Uniform discrete time space 0 = t_0 < t_1 < ... < t_K with t_i = i·ε and
/// t_K >= t_max. Interval i is (t_i, t_{i+1}].
class TimeGrid {
public:
    /// K = ceil(t_max / ε). Throws std::invalid_argument on non-positive
    /// inputs or ε > t_max.
    TimeGrid(double t_max, double epsilon);

    double epsilon() const { return epsilon_; }
    double t_max() const { return t_max_; }
    std::size_t intervals() const { return intervals_; }
    std::size_t points() const { return intervals_ + 1; }
    double point(std::size_t i) const { return static_cast<double>(i) * epsilon_; }
    double horizon() const { return point(intervals_); }

    Eigen::VectorXd time_points() const;

    /// The 2K+1 Simpson nodes t_0, t_0 + ε/2, t_1, ..., t_K.
    Eigen::VectorXd simpson_nodes() const;

    /// Index i with t_obs in (t_i, t_{i+1}]; t_obs = 0 maps to 0.
    std::size_t interval_index(double t_obs) const;

private:
    double t_max_;
    double epsilon_;
    std::size_t intervals_;
};

TimeGrid build_grid(double t_max, double epsilon);

/// Likelihood selector over the K intervals: one-hot at the observed
/// interval for events, ones from that interval onward for censored samples.
struct IndicatorMask {
    std::vector<bool> bits;
    std::size_t observed_index = 0;

    Eigen::VectorXd as_vector() const;
};

IndicatorMask indicator(double t_obs, bool censored, const TimeGrid& grid);

}  // namespace isf
