#pragma once

// Time-dependent concordance under right censoring.
//
// A pair (i, j) is comparable when t_i < t_j and sample i had an observed
// event. Curves are survival values on grid points (one column per sample);
// a time t is read at the right endpoint of the grid interval containing it.

#include "isf/data.hpp"
#include "isf/model.hpp"
#include "isf/time_grid.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace isf {

struct PairVerdict {
    std::size_t index_i = 0;
    std::size_t index_j = 0;
    bool comparable = false;
    bool concordant = false;
    bool tied_prediction = false;
};

struct ConcordanceResult {
    std::optional<double> value;  // empty when no pair is comparable
    std::size_t pairs = 0;
    double concordant = 0.0;      // ties contribute 0.5
    std::size_t ties = 0;
    bool subsampled = false;

    bool defined() const { return value.has_value(); }
};

struct ConcordanceOptions {
    /// Above this many samples pairs are drawn at random instead of enumerated.
    std::size_t max_exact_samples = 100000;
    std::size_t sampled_pairs = 10000000;
    std::uint64_t seed = 0;
};

/// All comparable (i, j), ordered by i then j.
std::vector<std::pair<std::size_t, std::size_t>> comparable_pairs(const Dataset& data);

PairVerdict judge_pair(const Dataset& data, std::size_t i, std::size_t j, double score_i, double score_j);

/// Concordance of per-sample risk scores (larger = earlier event expected).
ConcordanceResult c_index_scores(const Eigen::VectorXd& scores, const Dataset& data,
                                 const ConcordanceOptions& options = {});

/// Grid index used to read a curve at time t.
std::size_t curve_index(double t, const TimeGrid& grid);

/// Ŵ(t_i | x_i), each sample at its own observed time.
Eigen::VectorXd own_time_cdf(const Eigen::MatrixXd& survival, const TimeGrid& grid, const Dataset& data);

/// Ŵ(t_i|x_i) > Ŵ(t_j|x_j).
ConcordanceResult c_index_literal(const Eigen::MatrixXd& survival, const TimeGrid& grid, const Dataset& data,
                                  const ConcordanceOptions& options = {});

/// Ŵ(t_i|x_i) > Ŵ(t_i|x_j), both read at the earlier time.
ConcordanceResult c_index_antolini(const Eigen::MatrixXd& survival, const TimeGrid& grid, const Dataset& data,
                                   const ConcordanceOptions& options = {});

/// Model overloads; `data` holds raw covariates and is normalized with the
/// model's statistics.
ConcordanceResult c_index_literal(const ModelParams& model, const Dataset& data, const TimeGrid& grid,
                                  const ConcordanceOptions& options = {});
ConcordanceResult c_index_antolini(const ModelParams& model, const Dataset& data, const TimeGrid& grid,
                                   const ConcordanceOptions& options = {});

/// Survival curves for every row of a raw dataset.
Eigen::MatrixXd predict_curves(const ModelParams& model, const Dataset& data, const TimeGrid& grid);

}  // namespace isf
