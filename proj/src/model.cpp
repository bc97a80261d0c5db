#include "cobias/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cobias/textio.hpp"

namespace cobias {

DenseLayer make_dense(std::size_t in, std::size_t out, RngState& rng, const std::string& name) {
    // U(-1/sqrt(in), 1/sqrt(in)) for weights and biases
    double k = 1.0 / std::sqrt(static_cast<double>(in));
    Matrix W(in, out);
    for (std::size_t i = 0; i < W.size(); ++i) W.at(i) = (2.0 * rng.next_unit() - 1.0) * k;
    Matrix b(1, out);
    for (std::size_t i = 0; i < b.size(); ++i) b.at(i) = (2.0 * rng.next_unit() - 1.0) * k;
    return {parameter(std::move(W), name + ".W"), parameter(std::move(b), name + ".b")};
}

BiasModel BiasModel::init(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                          std::size_t feature_dim, std::size_t n_classes, RngState rng) {
    if (input_dim == 0 || feature_dim == 0 || n_classes < 2)
        throw std::invalid_argument("BiasModel: need input_dim > 0, feature_dim > 0, classes >= 2");
    BiasModel m;
    m.input_dim_ = input_dim;
    m.feature_dim_ = feature_dim;
    m.n_classes_ = n_classes;
    m.hidden_ = hidden;
    std::size_t prev = input_dim;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        m.extractor_.push_back(make_dense(prev, hidden[i], rng, "ext" + std::to_string(i)));
        prev = hidden[i];
    }
    m.extractor_.push_back(make_dense(prev, feature_dim, rng, "ext" + std::to_string(hidden.size())));
    m.head_ = make_dense(feature_dim, n_classes, rng, "head");
    return m;
}

NodePtr BiasModel::features(const NodePtr& x) const {
    NodePtr h = x;
    for (const auto& layer : extractor_) h = tanh_(add(matmul(h, layer.W), layer.b));
    return h;
}

NodePtr BiasModel::head_apply(const NodePtr& f) const {
    return add(matmul(f, head_.W), head_.b);
}

Matrix BiasModel::features(const Matrix& x) const {
    if (x.cols() != input_dim_)
        throw std::invalid_argument("features: input has " + std::to_string(x.cols()) +
                                    " columns, model expects " + std::to_string(input_dim_));
    Matrix h = x;
    for (const auto& layer : extractor_) {
        h = add_row_vector(matmul(h, layer.W->value), layer.b->value);
        for (std::size_t i = 0; i < h.size(); ++i) h.at(i) = std::tanh(h.at(i));
    }
    return h;
}

Matrix BiasModel::logits(const Matrix& x) const {
    return head_logits(features(x));
}

Matrix BiasModel::head_logits(const Matrix& f) const {
    if (f.cols() != feature_dim_)
        throw std::invalid_argument("head_logits: features have " + std::to_string(f.cols()) +
                                    " columns, model expects " + std::to_string(feature_dim_));
    return add_row_vector(matmul(f, head_.W->value), head_.b->value);
}

std::vector<int> BiasModel::predict(const Matrix& x) const {
    Matrix lg = logits(x);
    std::vector<int> out(lg.rows());
    for (std::size_t i = 0; i < lg.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < lg.cols(); ++j)
            if (lg(i, j) > lg(i, best)) best = j;
        out[i] = static_cast<int>(best);
    }
    return out;
}

void BiasModel::freeze_extractor() {
    frozen_ = true;
    for (auto& layer : extractor_) {
        layer.W->requires_grad = false;
        layer.b->requires_grad = false;
    }
}

void BiasModel::unfreeze() {
    frozen_ = false;
    for (auto& layer : extractor_) {
        layer.W->requires_grad = true;
        layer.b->requires_grad = true;
    }
}

void BiasModel::reinit_head(RngState rng) {
    head_ = make_dense(feature_dim_, n_classes_, rng, "head");
}

std::vector<NodePtr> BiasModel::parameters() const {
    std::vector<NodePtr> out = extractor_parameters();
    out.push_back(head_.W);
    out.push_back(head_.b);
    return out;
}

std::vector<NodePtr> BiasModel::trainable_parameters() const {
    return frozen_ ? head_parameters() : parameters();
}

std::vector<NodePtr> BiasModel::extractor_parameters() const {
    std::vector<NodePtr> out;
    for (const auto& layer : extractor_) {
        out.push_back(layer.W);
        out.push_back(layer.b);
    }
    return out;
}

std::vector<NodePtr> BiasModel::head_parameters() const {
    return {head_.W, head_.b};
}

namespace {

void write_matrix(std::ofstream& out, const Matrix& m) {
    out << m.rows() << "," << m.cols();
    for (std::size_t i = 0; i < m.size(); ++i) out << "," << fmt_g17(m.at(i));
    out << "\n";
}

Matrix read_matrix(std::ifstream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint " + path + ": truncated");
    auto parts = split(line, ',');
    if (parts.size() < 2) throw std::runtime_error("checkpoint " + path + ": bad matrix header");
    auto rows = static_cast<std::size_t>(parse_int(parts[0], "checkpoint rows"));
    auto cols = static_cast<std::size_t>(parse_int(parts[1], "checkpoint cols"));
    if (parts.size() != 2 + rows * cols)
        throw std::runtime_error("checkpoint " + path + ": expected " +
                                 std::to_string(rows * cols) + " values, got " +
                                 std::to_string(parts.size() - 2));
    std::vector<double> data(rows * cols);
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = parse_double(parts[2 + i], "checkpoint value");
    return Matrix(rows, cols, std::move(data));
}

}  // namespace

void BiasModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save: cannot open " + path);
    out << "biasmodel\n";
    out << input_dim_ << "," << feature_dim_ << "," << n_classes_ << "," << (frozen_ ? 1 : 0);
    out << "," << hidden_.size();
    for (std::size_t h : hidden_) out << "," << h;
    out << "\n";
    for (const auto& layer : extractor_) {
        write_matrix(out, layer.W->value);
        write_matrix(out, layer.b->value);
    }
    write_matrix(out, head_.W->value);
    write_matrix(out, head_.b->value);
    if (!out) throw std::runtime_error("save: write failure on " + path);
}

BiasModel BiasModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "biasmodel")
        throw std::runtime_error("load: " + path + " is not a model checkpoint");
    if (!std::getline(in, line)) throw std::runtime_error("load: " + path + " truncated header");
    auto parts = split(line, ',');
    if (parts.size() < 5) throw std::runtime_error("load: " + path + " malformed header");
    BiasModel m;
    m.input_dim_ = static_cast<std::size_t>(parse_int(parts[0], "input_dim"));
    m.feature_dim_ = static_cast<std::size_t>(parse_int(parts[1], "feature_dim"));
    m.n_classes_ = static_cast<std::size_t>(parse_int(parts[2], "n_classes"));
    bool frozen = parse_int(parts[3], "frozen") != 0;
    auto n_hidden = static_cast<std::size_t>(parse_int(parts[4], "hidden count"));
    if (parts.size() != 5 + n_hidden)
        throw std::runtime_error("load: " + path + " malformed hidden sizes");
    for (std::size_t i = 0; i < n_hidden; ++i)
        m.hidden_.push_back(static_cast<std::size_t>(parse_int(parts[5 + i], "hidden size")));
    for (std::size_t i = 0; i <= n_hidden; ++i) {
        DenseLayer layer;
        layer.W = parameter(read_matrix(in, path), "ext" + std::to_string(i) + ".W");
        layer.b = parameter(read_matrix(in, path), "ext" + std::to_string(i) + ".b");
        m.extractor_.push_back(std::move(layer));
    }
    m.head_.W = parameter(read_matrix(in, path), "head.W");
    m.head_.b = parameter(read_matrix(in, path), "head.b");
    if (frozen) m.freeze_extractor();
    return m;
}

}  // namespace cobias
