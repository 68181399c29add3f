#include "isf/cli.hpp"

#include "isf/data.hpp"
#include "isf/evaluation.hpp"
#include "isf/model_io.hpp"
#include "isf/training.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace isf {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Writes next to the target and renames, so a failed command leaves no
// partial file behind.
void write_file(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << content;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("write failed for " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot write " + path.string());
    }
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << std::fixed << v;
    return s.str();
}

std::string ci_text(const ConcordanceResult& r) { return r.defined() ? fmt(*r.value) : std::string("undefined"); }

struct TrainFlags {
    double epsilon = 1.0;
    double tmax = 400.0;
    double lr = 1e-4;
    double wd = 1e-4;
    std::size_t batch = 64;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    std::vector<Eigen::Index> encoder{256, 512, 256};
    std::vector<Eigen::Index> head{256, 256, 1};
    std::string activation = "relu";

    void attach(CLI::App* cmd, bool with_epsilon) {
        if (with_epsilon) cmd->add_option("--epsilon", epsilon, "training grid spacing")->capture_default_str();
        cmd->add_option("--tmax", tmax, "time horizon t_max")->capture_default_str();
        cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
        cmd->add_option("--wd", wd, "decoupled weight decay")->capture_default_str();
        cmd->add_option("--batch", batch, "minibatch size")->capture_default_str();
        cmd->add_option("--epochs", epochs, "training epochs")->capture_default_str();
        cmd->add_option("--seed", seed, "random seed")->capture_default_str();
        cmd->add_option("--encoder-widths", encoder, "encoder layer widths")->delimiter(',')->capture_default_str();
        cmd->add_option("--head-widths", head, "head layer widths (last must be 1)")
            ->delimiter(',')
            ->capture_default_str();
        cmd->add_option("--activation", activation, "hidden activation")
            ->check(CLI::IsMember({"relu", "sigmoid"}))
            ->capture_default_str();
    }

    TrainConfig config() const {
        TrainConfig c;
        c.epsilon_train = epsilon;
        c.t_max = tmax;
        c.learning_rate = lr;
        c.weight_decay = wd;
        c.batch_size = batch;
        c.epochs = epochs;
        c.seed = seed;
        c.encoder_widths = encoder;
        c.head_widths = head;
        c.activation = activation_from_string(activation);
        try {
            c.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        return c;
    }
};

ModelFile to_model_file(const TrainResult& r, const TrainConfig& c) {
    ModelFile f;
    f.params = r.params;
    f.seed = c.seed;
    f.config_echo = {{"learning_rate", format_double(c.learning_rate)},
                     {"weight_decay", format_double(c.weight_decay)},
                     {"batch_size", std::to_string(c.batch_size)},
                     {"epochs", std::to_string(c.epochs)},
                     {"adam_betas", format_double(c.beta1) + "," + format_double(c.beta2)},
                     {"adam_epsilon", format_double(c.adam_epsilon)}};
    return f;
}

void require_dims(const ModelParams& model, const Dataset& data) {
    if (model.input_dim() != data.feature_dim()) {
        std::ostringstream msg;
        msg << "feature dimension mismatch: model expects " << model.input_dim() << ", data has "
            << data.feature_dim();
        throw std::runtime_error(msg.str());
    }
}

TimeGrid inference_grid(const ModelParams& model, double epsilon_infer) {
    return TimeGrid(model.t_max, epsilon_infer > 0.0 ? epsilon_infer : model.epsilon_train);
}

enum class Metric { literal, antolini, both };

Metric metric_from(const std::string& s) {
    if (s == "literal") return Metric::literal;
    if (s == "antolini") return Metric::antolini;
    return Metric::both;
}

// ---------------------------------------------------------------------------

int cmd_synth(const SynthSpec& spec, const std::string& out_path, std::ostream& out) {
    SynthResult r = synth_exponential(spec);
    write_file(out_path, format_csv(r.data));
    out << "wrote " << r.data.size() << " samples to " << out_path << "\n";
    out << "censoring_rate=" << fmt(r.data.censoring_rate()) << "\n";
    return 0;
}

int cmd_train(const std::string& data_path, const TrainFlags& flags, const std::string& out_path, std::ostream& out) {
    const TrainConfig config = flags.config();
    const Dataset data = load_csv(data_path);
    const auto start = std::chrono::steady_clock::now();
    TrainResult r = train(data, config);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(out_path, format_model(to_model_file(r, config)));
    out << "samples=" << data.size() << " epochs=" << config.epochs << " grid_intervals="
        << r.params.training_grid().intervals() << "\n";
    out << "final_loss=" << (r.loss_history.empty() ? std::string("none") : fmt(r.loss_history.back()))
        << " wall_seconds=" << fmt(seconds) << "\n";
    if (r.floored > 0) out << "warning: likelihood floor hit " << r.floored << " times\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path, double epsilon_infer,
                const std::string& out_path, std::ostream& out) {
    const ModelFile model = load_model(model_path);
    const Dataset data = load_csv(data_path);
    require_dims(model.params, data);
    const TimeGrid grid = inference_grid(model.params, epsilon_infer);
    const Eigen::MatrixXd curves = predict_curves(model.params, data, grid);
    std::string csv = "id";
    for (std::size_t k = 0; k < grid.points(); ++k) csv += ",S@" + format_double(grid.point(k));
    csv += '\n';
    for (Eigen::Index i = 0; i < curves.cols(); ++i) {
        csv += std::to_string(i);
        for (Eigen::Index k = 0; k < curves.rows(); ++k) csv += "," + format_double(curves(k, i));
        csv += '\n';
    }
    write_file(out_path, csv);
    out << "wrote " << curves.cols() << " curves with " << grid.points() << " grid points to " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, double epsilon_infer,
             const std::string& metric_name, std::ostream& out, std::ostream& err) {
    const ModelFile model = load_model(model_path);
    const Dataset data = load_csv(data_path);
    require_dims(model.params, data);
    const TimeGrid grid = inference_grid(model.params, epsilon_infer);
    if (data.max_time() > grid.horizon())
        throw std::runtime_error("data contains times beyond the model horizon " + format_double(grid.horizon()));
    const Eigen::MatrixXd curves = predict_curves(model.params, data, grid);
    const Metric metric = metric_from(metric_name);
    std::string line;
    std::size_t pairs = 0;
    bool defined = true;
    if (metric != Metric::antolini) {
        auto lit = c_index_literal(curves, grid, data);
        out << "literal: ci=" << ci_text(lit) << " pairs=" << lit.pairs << " ties=" << lit.ties << "\n";
        line += "ci_literal=" + ci_text(lit) + " ";
        pairs = lit.pairs;
        defined = lit.defined();
    }
    if (metric != Metric::literal) {
        auto ant = c_index_antolini(curves, grid, data);
        out << "antolini: ci=" << ci_text(ant) << " pairs=" << ant.pairs << " ties=" << ant.ties << "\n";
        line += "ci_antolini=" + ci_text(ant) + " ";
        pairs = ant.pairs;
        defined = ant.defined();
    }
    if (!defined) {
        err << "warning: no comparable pairs in " << data_path << "\n";
        out << "ci=undefined pairs=0\n";
        return 0;
    }
    out << line << "pairs=" << pairs << "\n";
    return 0;
}

ConcordanceResult score(const ModelParams& model, const Dataset& test, const TimeGrid& grid, Metric metric) {
    const Eigen::MatrixXd curves = predict_curves(model, test, grid);
    return metric == Metric::literal ? c_index_literal(curves, grid, test) : c_index_antolini(curves, grid, test);
}

int cmd_ablate(const std::string& data_path, const std::vector<double>& train_eps,
               const std::vector<double>& infer_eps, double test_fraction, const TrainFlags& flags,
               const std::string& metric_name, const std::string& out_path, std::ostream& out) {
    const Dataset data = load_csv(data_path);
    auto [train_set, test_set] = split(data, test_fraction, flags.seed);
    const Metric metric = metric_from(metric_name);
    std::string csv = "train_eps";
    for (double e : infer_eps) csv += ",infer_" + format_double(e);
    csv += '\n';
    for (double te : train_eps) {
        TrainFlags f = flags;
        f.epsilon = te;
        // Each row is an independent model trained from scratch.
        TrainResult r = train(train_set, f.config());
        csv += format_double(te);
        for (double ie : infer_eps) {
            const TimeGrid grid(r.params.t_max, ie);
            csv += "," + ci_text(score(r.params, test_set, grid, metric));
        }
        csv += '\n';
        out << "trained eps=" << format_double(te) << " final_loss=" << fmt(r.loss_history.empty() ? 0.0 : r.loss_history.back())
            << "\n";
    }
    if (out_path.empty()) {
        out << csv;
    } else {
        write_file(out_path, csv);
        out << csv;
    }
    return 0;
}

int cmd_cv(const std::string& data_path, std::size_t folds, const TrainFlags& flags, const std::string& metric_name,
           std::ostream& out) {
    const Dataset data = load_csv(data_path);
    const Metric metric = metric_name == "literal" ? Metric::literal : Metric::antolini;
    const auto parts = k_fold(data.size(), folds, flags.seed);
    double sum = 0.0, concordant = 0.0;
    std::size_t pairs = 0, counted = 0;
    for (std::size_t f = 0; f < parts.size(); ++f) {
        std::vector<std::size_t> train_rows;
        for (std::size_t g = 0; g < parts.size(); ++g)
            if (g != f) train_rows.insert(train_rows.end(), parts[g].begin(), parts[g].end());
        std::sort(train_rows.begin(), train_rows.end());
        const Dataset train_set = data.subset(train_rows), test_set = data.subset(parts[f]);
        TrainResult r = train(train_set, flags.config());
        auto ci = score(r.params, test_set, r.params.training_grid(), metric);
        out << "fold=" << f << " n_test=" << test_set.size() << " ci=" << ci_text(ci) << " pairs=" << ci.pairs << "\n";
        if (ci.defined()) {
            sum += *ci.value;
            ++counted;
            concordant += ci.concordant;
            pairs += ci.pairs;
        }
    }
    out << "mean_ci=" << (counted ? fmt(sum / static_cast<double>(counted)) : std::string("undefined"))
        << " pooled_ci=" << (pairs ? fmt(concordant / static_cast<double>(pairs)) : std::string("undefined"))
        << " folds=" << folds << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Implicit survival function toolkit"};
    app.require_subcommand(1);

    // synth
    SynthSpec spec;
    std::vector<double> weights;
    std::string family = "exponential";
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic survival dataset");
    synth->add_option("--n", spec.n, "sample count")->capture_default_str();
    synth->add_option("--dim", spec.covariate_dim, "covariate dimension")->capture_default_str();
    synth->add_option("--weights", weights, "rate weights w (comma separated, default zeros)")->delimiter(',');
    synth->add_option("--censor-horizon", spec.censor_horizon, "censoring times ~ Uniform(0, c_max)")
        ->capture_default_str();
    synth->add_option("--base-rate", spec.base_rate, "rate scale: lambda = base * exp(w.x)")->capture_default_str();
    synth->add_option("--family", family, "time distribution")
        ->check(CLI::IsMember({"exponential", "weibull"}))
        ->capture_default_str();
    synth->add_option("--weibull-shape", spec.weibull_shape, "Weibull shape k")->capture_default_str();
    synth->add_option("--seed", spec.seed, "random seed")->capture_default_str();
    synth->add_option("--out", synth_out, "output CSV")->required();

    // train
    std::string data_path, model_out;
    TrainFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "train a model on a CSV dataset");
    train_cmd->add_option("--data", data_path, "training CSV")->required();
    train_flags.attach(train_cmd, true);
    train_cmd->add_option("--out", model_out, "output model file")->required();

    // predict
    std::string model_path, curves_out;
    double epsilon_infer = 0.0;
    auto* predict_cmd = app.add_subcommand("predict", "write survival curves for a dataset");
    predict_cmd->add_option("--model", model_path, "model file")->required();
    predict_cmd->add_option("--data", data_path, "CSV dataset")->required();
    predict_cmd->add_option("--epsilon-infer", epsilon_infer, "inference grid spacing (default: training spacing)");
    predict_cmd->add_option("--out", curves_out, "output curves CSV")->required();

    // eval
    std::string metric = "both";
    auto* eval_cmd = app.add_subcommand("eval", "concordance index of a model on a dataset");
    eval_cmd->add_option("--model", model_path, "model file")->required();
    eval_cmd->add_option("--data", data_path, "CSV dataset")->required();
    eval_cmd->add_option("--epsilon-infer", epsilon_infer, "inference grid spacing (default: training spacing)");
    eval_cmd->add_option("--metric", metric, "which concordance")
        ->check(CLI::IsMember({"literal", "antolini", "both"}))
        ->capture_default_str();

    // ablate-epsilon
    std::vector<double> train_eps{0.5, 1.0, 2.0}, infer_eps{1.0};
    double test_fraction = 0.3;
    std::string ablate_metric = "antolini", table_out;
    TrainFlags ablate_flags;
    auto* ablate = app.add_subcommand("ablate-epsilon", "CI table over training and inference grid spacings");
    ablate->add_option("--data", data_path, "CSV dataset")->required();
    ablate->add_option("--train-eps", train_eps, "training spacings")->delimiter(',')->capture_default_str();
    ablate->add_option("--infer-eps", infer_eps, "inference spacings")->delimiter(',')->capture_default_str();
    ablate->add_option("--test-fraction", test_fraction, "held-out fraction")->capture_default_str();
    ablate->add_option("--metric", ablate_metric, "which concordance")
        ->check(CLI::IsMember({"literal", "antolini"}))
        ->capture_default_str();
    ablate->add_option("--out", table_out, "output CSV (also printed)");
    ablate_flags.attach(ablate, false);

    // cv
    std::size_t folds = 5;
    std::string cv_metric = "antolini";
    TrainFlags cv_flags;
    auto* cv = app.add_subcommand("cv", "k-fold cross-validated concordance");
    cv->add_option("--data", data_path, "CSV dataset")->required();
    cv->add_option("--folds", folds, "number of folds")->capture_default_str();
    cv->add_option("--metric", cv_metric, "which concordance")
        ->check(CLI::IsMember({"literal", "antolini"}))
        ->capture_default_str();
    cv_flags.attach(cv, true);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        if (app.get_subcommands().empty()) err << app.help();
        return 2;
    }

    try {
        if (synth->parsed()) {
            spec.family = family == "weibull" ? SynthFamily::weibull : SynthFamily::exponential;
            if (!weights.empty()) spec.weights = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
            return cmd_synth(spec, synth_out, out);
        }
        if (train_cmd->parsed()) return cmd_train(data_path, train_flags, model_out, out);
        if (predict_cmd->parsed()) return cmd_predict(model_path, data_path, epsilon_infer, curves_out, out);
        if (eval_cmd->parsed()) return cmd_eval(model_path, data_path, epsilon_infer, metric, out, err);
        if (ablate->parsed())
            return cmd_ablate(data_path, train_eps, infer_eps, test_fraction, ablate_flags, ablate_metric, table_out,
                              out);
        if (cv->parsed()) return cmd_cv(data_path, folds, cv_flags, cv_metric, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace isf
