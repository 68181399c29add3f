#include "isf/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace isf {

std::vector<std::pair<std::size_t, std::size_t>> comparable_pairs(const Dataset& data) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const std::size_t n = data.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!data.event[static_cast<Eigen::Index>(i)]) continue;
        const double ti = data.time[static_cast<Eigen::Index>(i)];
        for (std::size_t j = 0; j < n; ++j)
            if (ti < data.time[static_cast<Eigen::Index>(j)]) out.emplace_back(i, j);
    }
    return out;
}

PairVerdict judge_pair(const Dataset& data, std::size_t i, std::size_t j, double score_i, double score_j) {
    PairVerdict v{i, j, false, false, false};
    v.comparable = data.event[static_cast<Eigen::Index>(i)] &&
                   data.time[static_cast<Eigen::Index>(i)] < data.time[static_cast<Eigen::Index>(j)];
    if (!v.comparable) return v;
    v.tied_prediction = score_i == score_j;
    v.concordant = score_i > score_j;
    return v;
}

namespace {

// Walks comparable pairs (exactly or by sampling) and scores each with
// `concordance(i, j)` returning +1, 0 (tie) or -1.
template <typename Judge>
ConcordanceResult count_pairs(const Dataset& data, const ConcordanceOptions& options, Judge&& judge) {
    ConcordanceResult r;
    const std::size_t n = data.size();
    auto visit = [&](std::size_t i, std::size_t j) {
        ++r.pairs;
        const int verdict = judge(i, j);
        if (verdict > 0) {
            r.concordant += 1.0;
        } else if (verdict == 0) {
            r.concordant += 0.5;
            ++r.ties;
        }
    };
    if (n <= options.max_exact_samples) {
        // Sorting by time lets the inner loop start at the first later time.
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return data.time[static_cast<Eigen::Index>(a)] < data.time[static_cast<Eigen::Index>(b)];
        });
        std::size_t later = 0;
        for (std::size_t a = 0; a < n; ++a) {
            const std::size_t i = order[a];
            const double ti = data.time[static_cast<Eigen::Index>(i)];
            while (later < n && data.time[static_cast<Eigen::Index>(order[later])] <= ti) ++later;
            if (!data.event[static_cast<Eigen::Index>(i)]) continue;
            for (std::size_t b = later; b < n; ++b) visit(i, order[b]);
        }
    } else {
        r.subsampled = true;
        std::mt19937_64 rng(options.seed);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t draw = 0; draw < options.sampled_pairs; ++draw) {
            const std::size_t i = pick(rng), j = pick(rng);
            if (data.event[static_cast<Eigen::Index>(i)] &&
                data.time[static_cast<Eigen::Index>(i)] < data.time[static_cast<Eigen::Index>(j)])
                visit(i, j);
        }
    }
    if (r.pairs > 0) r.value = r.concordant / static_cast<double>(r.pairs);
    return r;
}

int compare(double a, double b) { return a > b ? 1 : (a == b ? 0 : -1); }

void require_curves(const Eigen::MatrixXd& survival, const TimeGrid& grid, const Dataset& data) {
    if (survival.rows() != static_cast<Eigen::Index>(grid.points()) ||
        survival.cols() != static_cast<Eigen::Index>(data.size())) {
        std::ostringstream msg;
        msg << "concordance: curves are " << survival.rows() << "x" << survival.cols() << ", expected "
            << grid.points() << "x" << data.size();
        throw ShapeError(msg.str());
    }
}

}  // namespace

ConcordanceResult c_index_scores(const Eigen::VectorXd& scores, const Dataset& data,
                                 const ConcordanceOptions& options) {
    if (static_cast<std::size_t>(scores.size()) != data.size())
        throw ShapeError("concordance: one score per sample required");
    return count_pairs(data, options, [&](std::size_t i, std::size_t j) {
        return compare(scores[static_cast<Eigen::Index>(i)], scores[static_cast<Eigen::Index>(j)]);
    });
}

std::size_t curve_index(double t, const TimeGrid& grid) { return grid.interval_index(t) + 1; }

Eigen::VectorXd own_time_cdf(const Eigen::MatrixXd& survival, const TimeGrid& grid, const Dataset& data) {
    require_curves(survival, grid, data);
    Eigen::VectorXd w(static_cast<Eigen::Index>(data.size()));
    for (Eigen::Index i = 0; i < w.size(); ++i)
        w[i] = 1.0 - survival(static_cast<Eigen::Index>(curve_index(data.time[i], grid)), i);
    return w;
}

ConcordanceResult c_index_literal(const Eigen::MatrixXd& survival, const TimeGrid& grid, const Dataset& data,
                                  const ConcordanceOptions& options) {
    return c_index_scores(own_time_cdf(survival, grid, data), data, options);
}

ConcordanceResult c_index_antolini(const Eigen::MatrixXd& survival, const TimeGrid& grid, const Dataset& data,
                                   const ConcordanceOptions& options) {
    require_curves(survival, grid, data);
    std::vector<Eigen::Index> row(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        row[i] = static_cast<Eigen::Index>(curve_index(data.time[static_cast<Eigen::Index>(i)], grid));
    // Ŵ_i > Ŵ_j at the same time  <=>  Ŝ_i < Ŝ_j.
    return count_pairs(data, options, [&](std::size_t i, std::size_t j) {
        const Eigen::Index k = row[i];
        return compare(survival(k, static_cast<Eigen::Index>(j)), survival(k, static_cast<Eigen::Index>(i)));
    });
}

Eigen::MatrixXd predict_curves(const ModelParams& model, const Dataset& data, const TimeGrid& grid) {
    return survival_curves(model.normalization.apply(data.covariates), grid, model);
}

ConcordanceResult c_index_literal(const ModelParams& model, const Dataset& data, const TimeGrid& grid,
                                  const ConcordanceOptions& options) {
    return c_index_literal(predict_curves(model, data, grid), grid, data, options);
}

ConcordanceResult c_index_antolini(const ModelParams& model, const Dataset& data, const TimeGrid& grid,
                                   const ConcordanceOptions& options) {
    return c_index_antolini(predict_curves(model, data, grid), grid, data, options);
}

}  // namespace isf
