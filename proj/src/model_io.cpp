#include "isf/model_io.hpp"

#include "isf/data.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace isf {

namespace {

constexpr const char* kMagic = "isf-model";

void put_values(std::string& out, const double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
        out += ' ';
        out += format_double(data[i]);
    }
}

void put_layers(std::string& out, const std::vector<DenseLayer>& layers, const std::string& name) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string prefix = name + "." + std::to_string(i);
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = l.weight;
        out += prefix + ".weight " + std::to_string(w.rows()) + " " + std::to_string(w.cols());
        put_values(out, w.data(), w.size());
        out += '\n';
        out += prefix + ".bias " + std::to_string(l.bias.size());
        put_values(out, l.bias.data(), l.bias.size());
        out += '\n';
    }
}

std::string join_widths(const std::vector<DenseLayer>& layers) {
    std::string s;
    for (std::size_t i = 0; i < layers.size(); ++i) s += (i ? " " : "") + std::to_string(layers[i].weight.rows());
    return s;
}

class Record {
public:
    Record(std::string key, std::vector<std::string> tokens, std::size_t line)
        : key_(std::move(key)), tokens_(std::move(tokens)), line_(line) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw ModelFormatError("model file line " + std::to_string(line_) + " (" + key_ + "): " + what);
    }

    const std::string& key() const { return key_; }
    std::size_t size() const { return tokens_.size(); }
    const std::string& text(std::size_t i) const {
        if (i >= tokens_.size()) fail("missing value");
        return tokens_[i];
    }
    double number(std::size_t i) const {
        const auto& t = text(i);
        double v = 0.0;
        auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size()) fail("bad number '" + t + "'");
        return v;
    }
    long long integer(std::size_t i) const {
        const auto& t = text(i);
        long long v = 0;
        auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size()) fail("bad integer '" + t + "'");
        return v;
    }
    Eigen::VectorXd vector(std::size_t first, Eigen::Index n) const {
        if (tokens_.size() != first + static_cast<std::size_t>(n)) fail("wrong number of values");
        Eigen::VectorXd v(n);
        for (Eigen::Index k = 0; k < n; ++k) v[k] = number(first + static_cast<std::size_t>(k));
        return v;
    }

private:
    std::string key_;
    std::vector<std::string> tokens_;
    std::size_t line_;
};

}  // namespace

std::string format_model(const ModelFile& model) {
    const ModelParams& p = model.params;
    p.validate();
    std::string out;
    out += std::string(kMagic) + "\n";
    out += "format_version " + std::to_string(kModelFormatVersion) + "\n";
    out += "feature_dim " + std::to_string(p.input_dim()) + "\n";
    out += "embedding_dim " + std::to_string(p.embedding_dim()) + "\n";
    out += "activation " + to_string(p.activation) + "\n";
    out += "encoder_widths " + join_widths(p.weights.encoder) + "\n";
    out += "head_widths " + join_widths(p.weights.head) + "\n";
    out += "epsilon_train " + format_double(p.epsilon_train) + "\n";
    out += "t_max " + format_double(p.t_max) + "\n";
    out += "seed " + std::to_string(model.seed) + "\n";
    for (const auto& [k, v] : model.config_echo) out += "config." + k + " " + v + "\n";
    out += "norm.mean";
    put_values(out, p.normalization.mean.data(), p.normalization.mean.size());
    out += "\nnorm.stddev";
    put_values(out, p.normalization.stddev.data(), p.normalization.stddev.size());
    out += '\n';
    put_layers(out, p.weights.encoder, "encoder");
    put_layers(out, p.weights.head, "head");
    out += "end\n";
    return out;
}

ModelFile parse_model(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kMagic) throw ModelFormatError("not an isf model file");

    std::vector<Record> records;
    std::size_t line_no = 1;
    bool ended = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "end") {
            ended = true;
            break;
        }
        std::vector<std::string> tokens;
        // config values keep their full remaining text as one token.
        if (key.rfind("config.", 0) == 0) {
            const auto pos = line.find(' ');
            tokens.push_back(pos == std::string::npos ? std::string() : line.substr(pos + 1));
        } else {
            for (std::string t; ls >> t;) tokens.push_back(t);
        }
        records.emplace_back(key, std::move(tokens), line_no);
    }
    if (!ended) throw ModelFormatError("model file truncated (no 'end' record)");

    std::map<std::string, const Record*> by_key;
    ModelFile model;
    for (const auto& r : records) {
        if (!by_key.emplace(r.key(), &r).second) throw ModelFormatError("duplicate record '" + r.key() + "'");
        if (r.key().rfind("config.", 0) == 0) model.config_echo.emplace_back(r.key().substr(7), r.text(0));
    }
    auto get = [&](const std::string& key) -> const Record& {
        auto it = by_key.find(key);
        if (it == by_key.end()) throw ModelFormatError("missing record '" + key + "'");
        return *it->second;
    };

    const long long version = get("format_version").integer(0);
    if (version != kModelFormatVersion)
        throw ModelFormatError("unsupported model format version " + std::to_string(version));

    ModelParams& p = model.params;
    const auto feature_dim = static_cast<Eigen::Index>(get("feature_dim").integer(0));
    p.activation = activation_from_string(get("activation").text(0));
    p.epsilon_train = get("epsilon_train").number(0);
    p.t_max = get("t_max").number(0);
    model.seed = static_cast<std::uint64_t>(std::stoull(get("seed").text(0)));
    p.normalization.mean = get("norm.mean").vector(0, feature_dim);
    p.normalization.stddev = get("norm.stddev").vector(0, feature_dim);

    auto load_layers = [&](const std::string& name, std::vector<DenseLayer>& layers) {
        const Record& widths = get(name + "_widths");
        for (std::size_t i = 0; i < widths.size(); ++i) {
            const std::string prefix = name + "." + std::to_string(i);
            const Record& w = get(prefix + ".weight");
            const auto rows = static_cast<Eigen::Index>(w.integer(0));
            const auto cols = static_cast<Eigen::Index>(w.integer(1));
            if (rows != widths.integer(i)) w.fail("row count disagrees with " + name + "_widths");
            Eigen::VectorXd flat = w.vector(2, rows * cols);
            DenseLayer layer;
            layer.weight = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                flat.data(), rows, cols);
            const Record& b = get(prefix + ".bias");
            if (b.integer(0) != rows) b.fail("bias length disagrees with weight rows");
            layer.bias = b.vector(1, rows);
            layers.push_back(std::move(layer));
        }
    };
    load_layers("encoder", p.weights.encoder);
    load_layers("head", p.weights.head);
    try {
        p.validate();
        TimeGrid(p.t_max, p.epsilon_train);
    } catch (const std::exception& e) {
        throw ModelFormatError(std::string("inconsistent model: ") + e.what());
    }
    if (p.input_dim() != feature_dim) throw ModelFormatError("feature_dim disagrees with encoder input width");
    if (p.embedding_dim() != get("embedding_dim").integer(0))
        throw ModelFormatError("embedding_dim disagrees with encoder output width");
    return model;
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
    const std::string text = format_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelFormatError("cannot write " + path.string());
    out << text;
    if (!out) throw ModelFormatError("write failed for " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

}  // namespace isf
