#include "isf/data.hpp"

#include "isf/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace isf {

double Dataset::censoring_rate() const {
    if (size() == 0) return 0.0;
    return 1.0 - static_cast<double>(event.count()) / static_cast<double>(size());
}

double Dataset::max_time() const { return size() == 0 ? 0.0 : time.maxCoeff(); }

std::vector<bool> Dataset::censored_flags() const {
    std::vector<bool> c(size());
    for (std::size_t i = 0; i < size(); ++i) c[i] = !event[static_cast<Eigen::Index>(i)];
    return c;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.covariates.resize(n, covariates.cols());
    out.time.resize(n);
    out.event.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto src = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
        out.covariates.row(r) = covariates.row(src);
        out.time[r] = time[src];
        out.event[r] = event[src];
    }
    return out;
}

void Dataset::validate() const {
    if (covariates.rows() != time.size() || event.size() != time.size())
        throw DataError("dataset: covariates, times and events differ in length");
    for (Eigen::Index i = 0; i < time.size(); ++i) {
        if (!std::isfinite(time[i]) || time[i] < 0.0)
            throw DataError("dataset: row " + std::to_string(i + 1) + " has invalid time " + format_double(time[i]));
        if (!covariates.row(i).allFinite())
            throw DataError("dataset: row " + std::to_string(i + 1) + " has a non-finite covariate");
    }
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t\r");
        const auto e = f.find_last_not_of(" \t\r");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

double parse_cell(const std::string& cell, const std::string& source, std::size_t row, const std::string& column) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (cell.empty() || res.ec != std::errc() || res.ptr != last) {
        std::ostringstream msg;
        msg << source << ": row " << row << ", column '" << column << "': non-numeric value '" << cell << "'";
        throw DataError(msg.str());
    }
    return v;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty file");
    const auto header = split_fields(line);
    const auto time_col = std::find(header.begin(), header.end(), "time");
    const auto event_col = std::find(header.begin(), header.end(), "event");
    if (time_col == header.end()) throw DataError(source + ": missing column 'time'");
    if (event_col == header.end()) throw DataError(source + ": missing column 'event'");
    const auto ti = static_cast<std::size_t>(time_col - header.begin());
    const auto ei = static_cast<std::size_t>(event_col - header.begin());
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != ti && c != ei) feature_cols.push_back(c);

    std::vector<double> x, t;
    std::vector<bool> e;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++row;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            std::ostringstream msg;
            msg << source << ": row " << row << " has " << fields.size() << " fields, header has " << header.size();
            throw DataError(msg.str());
        }
        for (auto c : feature_cols) x.push_back(parse_cell(fields[c], source, row, header[c]));
        const double tv = parse_cell(fields[ti], source, row, "time");
        if (!std::isfinite(tv) || tv < 0.0) {
            std::ostringstream msg;
            msg << source << ": row " << row << ", column 'time': negative or non-finite time " << fields[ti];
            throw DataError(msg.str());
        }
        t.push_back(tv);
        const double ev = parse_cell(fields[ei], source, row, "event");
        if (ev != 0.0 && ev != 1.0) {
            std::ostringstream msg;
            msg << source << ": row " << row << ", column 'event': expected 0 or 1, got " << fields[ei];
            throw DataError(msg.str());
        }
        e.push_back(ev == 1.0);
    }

    Dataset d;
    const auto n = static_cast<Eigen::Index>(t.size());
    const auto p = static_cast<Eigen::Index>(feature_cols.size());
    d.covariates = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        x.data(), n, p);
    d.time = Eigen::Map<const Eigen::VectorXd>(t.data(), n);
    d.event.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) d.event[i] = e[static_cast<std::size_t>(i)];
    d.validate();
    return d;
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path.string());
}

std::string format_csv(const Dataset& data) {
    std::string out;
    for (Eigen::Index j = 0; j < data.feature_dim(); ++j) out += "f" + std::to_string(j) + ",";
    out += "time,event\n";
    for (Eigen::Index i = 0; i < data.time.size(); ++i) {
        for (Eigen::Index j = 0; j < data.feature_dim(); ++j) {
            out += format_double(data.covariates(i, j));
            out += ',';
        }
        out += format_double(data.time[i]);
        out += data.event[i] ? ",1\n" : ",0\n";
    }
    return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << format_csv(data);
    if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Normalization

Normalization normalize_fit(const Dataset& train) {
    const Eigen::Index p = train.feature_dim();
    Normalization s{Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(p)};
    if (train.size() == 0) return s;
    s.mean = train.covariates.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = (train.covariates.col(j).array() - s.mean[j]).square().mean();
        // Spread below this is treated as a constant column.
        s.stddev[j] = var > 1e-24 ? std::sqrt(var) : 0.0;
    }
    return s;
}

Dataset normalize_apply(const Dataset& data, const Normalization& stats) {
    Dataset out = data;
    out.covariates = stats.apply(data.covariates);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

double SynthOracle::survival(std::size_t i, double t) const {
    const double lam = rate[static_cast<Eigen::Index>(i)];
    if (family == SynthFamily::weibull) return std::exp(-lam * std::pow(t, weibull_shape));
    return std::exp(-lam * t);
}

SynthResult synth_exponential(const SynthSpec& spec) {
    if (spec.n < 1) throw std::invalid_argument("synth: n must be at least 1");
    if (spec.covariate_dim < 1) throw std::invalid_argument("synth: covariate_dim must be at least 1");
    if (!(spec.censor_horizon > 0.0)) throw std::invalid_argument("synth: censor horizon must be positive");
    if (!(spec.base_rate > 0.0)) throw std::invalid_argument("synth: base rate must be positive");
    Eigen::VectorXd w = spec.weights.size() == 0 ? Eigen::VectorXd::Zero(spec.covariate_dim) : spec.weights;
    if (w.size() != spec.covariate_dim) throw std::invalid_argument("synth: weight vector length != covariate_dim");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const auto n = static_cast<Eigen::Index>(spec.n);
    SynthResult r;
    r.data.covariates.resize(n, spec.covariate_dim);
    r.data.time.resize(n);
    r.data.event.resize(n);
    r.oracle.rate.resize(n);
    r.oracle.true_time.resize(n);
    r.oracle.family = spec.family;
    r.oracle.weibull_shape = spec.family == SynthFamily::weibull ? spec.weibull_shape : 1.0;

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < spec.covariate_dim; ++j) r.data.covariates(i, j) = normal(rng);
        const double lam = spec.base_rate * std::exp(r.data.covariates.row(i).dot(w));
        // Inverse-CDF draw; 1 - U lies in (0, 1].
        const double e = -std::log(1.0 - unit(rng));
        const double t = spec.family == SynthFamily::weibull ? std::pow(e / lam, 1.0 / spec.weibull_shape) : e / lam;
        const double c = spec.censor_horizon * unit(rng);
        r.oracle.rate[i] = lam;
        r.oracle.true_time[i] = t;
        r.data.event[i] = t <= c;
        r.data.time[i] = std::min(t, c);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Splitting

namespace {

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split: test fraction must be in (0, 1)");
    const std::size_t n = data.size();
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    if (n_test == 0 || n_test >= n) throw std::invalid_argument("split: fraction leaves an empty side");
    auto idx = permutation(n, seed);
    std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {data.subset(train), data.subset(test)};
}

std::vector<std::vector<std::size_t>> k_fold(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2 || k > n) throw std::invalid_argument("k_fold: need 2 <= k <= n");
    auto idx = permutation(n, seed);
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(idx[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

}  // namespace isf
