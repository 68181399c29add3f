#include "isf/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace isf {

TimeGrid::TimeGrid(double t_max, double epsilon) : t_max_(t_max), epsilon_(epsilon) {
    if (!(t_max > 0.0) || !std::isfinite(t_max))
        throw std::invalid_argument("time grid: t_max must be positive and finite");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("time grid: epsilon must be positive and finite");
    if (epsilon > t_max) throw std::invalid_argument("time grid: epsilon exceeds t_max");
    // ceil(t_max/ε) is taken on the rounded quotient so that 0.3/0.1 and
    // similar decimal ratios do not gain a spurious extra interval.
    const double ratio = t_max / epsilon;
    const double nearest = std::round(ratio);
    const double k = std::abs(ratio - nearest) <= 1e-9 * nearest ? nearest : std::ceil(ratio);
    intervals_ = static_cast<std::size_t>(k);
}

Eigen::VectorXd TimeGrid::time_points() const {
    Eigen::VectorXd t(points());
    for (std::size_t i = 0; i < points(); ++i) t[static_cast<Eigen::Index>(i)] = point(i);
    return t;
}

Eigen::VectorXd TimeGrid::simpson_nodes() const {
    const std::size_t m = 2 * intervals_ + 1;
    Eigen::VectorXd t(m);
    for (std::size_t i = 0; i < m; ++i)
        t[static_cast<Eigen::Index>(i)] = static_cast<double>(i) * (0.5 * epsilon_);
    return t;
}

std::size_t TimeGrid::interval_index(double t_obs) const {
    if (!(t_obs >= 0.0) || t_obs > horizon()) {
        std::ostringstream msg;
        msg << "interval_index: time " << t_obs << " outside [0, " << horizon() << "]";
        throw std::out_of_range(msg.str());
    }
    if (t_obs == 0.0) return 0;
    // t in (iε, (i+1)ε]  <=>  i = ceil(t/ε) - 1
    auto i = static_cast<std::size_t>(std::ceil(t_obs / epsilon_)) - 1;
    // Guard the floating-point division at interval boundaries.
    if (i + 1 < intervals_ && t_obs > point(i + 1)) ++i;
    if (i > 0 && t_obs <= point(i)) --i;
    return std::min(i, intervals_ - 1);
}

TimeGrid build_grid(double t_max, double epsilon) { return TimeGrid(t_max, epsilon); }

Eigen::VectorXd IndicatorMask::as_vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(bits.size()));
    for (std::size_t i = 0; i < bits.size(); ++i) v[static_cast<Eigen::Index>(i)] = bits[i] ? 1.0 : 0.0;
    return v;
}

IndicatorMask indicator(double t_obs, bool censored, const TimeGrid& grid) {
    IndicatorMask mask;
    mask.observed_index = grid.interval_index(t_obs);
    mask.bits.assign(grid.intervals(), false);
    if (censored) {
        for (std::size_t j = mask.observed_index; j < grid.intervals(); ++j) mask.bits[j] = true;
    } else {
        mask.bits[mask.observed_index] = true;
    }
    return mask;
}

}  // namespace isf
