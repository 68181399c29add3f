#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isf {

using ArrayXb = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Right-censored survival data. Row i of `covariates` is sample i;
/// `event[i]` is true when the event was observed (uncensored).
struct Dataset {
    Eigen::MatrixXd covariates;
    Eigen::VectorXd time;
    ArrayXb event;

    std::size_t size() const { return static_cast<std::size_t>(time.size()); }
    Eigen::Index feature_dim() const { return covariates.cols(); }
    double censoring_rate() const;
    double max_time() const;

    std::vector<bool> censored_flags() const;
    Dataset subset(const std::vector<std::size_t>& rows) const;

    /// Throws DataError naming the first row with a negative or non-finite
    /// time, or a size mismatch.
    void validate() const;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Header `f0,...,f{p-1},time,event`; event 1 = observed, 0 = censored.
/// Row numbers in diagnostics count data rows from 1.
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text, const std::string& source = "<memory>");
void save_csv(const Dataset& data, const std::filesystem::path& path);
std::string format_csv(const Dataset& data);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Normalization statistics are defined with the model (isf/model.hpp).
struct Normalization;
Normalization normalize_fit(const Dataset& train);
Dataset normalize_apply(const Dataset& data, const Normalization& stats);

enum class SynthFamily { exponential, weibull };

struct SynthSpec {
    std::size_t n = 1000;
    Eigen::Index covariate_dim = 4;
    Eigen::VectorXd weights;          // empty means all zeros
    double censor_horizon = 1e9;      // c ~ Uniform(0, censor_horizon)
    double base_rate = 1.0;           // λ(x) = base_rate·exp(w·x)
    SynthFamily family = SynthFamily::exponential;
    double weibull_shape = 1.5;       // S(t|x) = exp(−λ(x)·t^k) for the Weibull family
    std::uint64_t seed = 0;
};

/// Ground truth behind a synthetic dataset.
struct SynthOracle {
    Eigen::VectorXd rate;       // λ(x_i)
    Eigen::VectorXd true_time;  // t_i before censoring
    SynthFamily family = SynthFamily::exponential;
    double weibull_shape = 1.0;

    double survival(std::size_t i, double t) const;
};

struct SynthResult {
    Dataset data;
    SynthOracle oracle;
};

SynthResult synth_exponential(const SynthSpec& spec);

/// Seeded disjoint partition; the test side gets round(n·test_fraction) rows.
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed);

/// Seeded k-fold partition: index lists of k disjoint folds covering all rows.
std::vector<std::vector<std::size_t>> k_fold(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace isf
