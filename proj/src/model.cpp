#include "rsfda/model.hpp"

#include <cmath>

#include "rsfda/errors.hpp"

namespace rsfda {

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + s + "' (expected tanh or relu)");
}

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

Linear init_linear(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Linear l{Tensor({in, out}), Tensor({out})};
    for (double& w : l.weight.data()) w = rng.uniform(-bound, bound);
    for (double& b : l.bias.data()) b = rng.uniform(-bound, bound);
    return l;
}

Encoder::Encoder(std::vector<std::size_t> widths, Activation act, Rng& rng)
    : widths_(std::move(widths)), act_(act) {
    if (widths_.size() < 2) throw ConfigError("encoder needs at least input and feature widths");
    for (auto w : widths_)
        if (w == 0) throw ConfigError("encoder widths must be positive");
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i)
        layers_.push_back(init_linear(widths_[i], widths_[i + 1], rng));
}

std::size_t Encoder::parameter_count(const std::vector<std::size_t>& widths) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) n += widths[i] * widths[i + 1] + widths[i + 1];
    return n;
}

Classifier::Classifier(std::size_t feature_dim, std::size_t classes, Rng& rng)
    : layer_(init_linear(feature_dim, classes, rng)) {}

Model Model::create(std::size_t input_dim, std::size_t classes, const ModelSpec& spec, Rng& rng) {
    if (classes == 0) throw ConfigError("model needs at least one class");
    std::vector<std::size_t> widths{input_dim};
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(spec.feature_dim);
    Model m;
    m.encoder = Encoder(widths, spec.activation, rng);
    m.classifier = Classifier(spec.feature_dim, classes, rng);
    return m;
}

std::vector<Tensor*> Model::parameters() {
    std::vector<Tensor*> out;
    for (auto& l : encoder.layers()) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    out.push_back(&classifier.layer().weight);
    out.push_back(&classifier.layer().bias);
    return out;
}

std::vector<const Tensor*> Model::parameters() const {
    std::vector<const Tensor*> out;
    for (const auto& l : encoder.layers()) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    out.push_back(&classifier.layer().weight);
    out.push_back(&classifier.layer().bias);
    return out;
}

std::uint64_t Model::parameter_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const Tensor* p : parameters()) h = hash_bytes(p->data(), h);
    return h;
}

std::uint64_t Model::classifier_hash() const {
    std::uint64_t h = hash_bytes(classifier.layer().weight.data());
    return hash_bytes(classifier.layer().bias.data(), h);
}

std::vector<ParamGroup> parameter_groups(const Model& m) {
    const std::size_t n_enc = m.encoder.layers().size();
    std::vector<ParamGroup> groups;
    for (std::size_t i = 0; i < n_enc; ++i) {
        const auto g = (i + 1 == n_enc) ? ParamGroup::head : ParamGroup::backbone;
        groups.push_back(g);
        groups.push_back(g);
    }
    groups.push_back(ParamGroup::head);
    groups.push_back(ParamGroup::head);
    return groups;
}

std::vector<bool> parameter_frozen(const Model& m) {
    std::vector<bool> frozen(2 * m.encoder.layers().size(), false);
    frozen.push_back(m.classifier.frozen());
    frozen.push_back(m.classifier.frozen());
    return frozen;
}

BoundModel bind(Tape& tape, const Model& m, bool params_require_grad) {
    BoundModel bm;
    bm.model = &m;
    const auto frozen = parameter_frozen(m);
    const auto params = m.parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
        bm.params.push_back(tape.leaf(*params[i], params_require_grad && !frozen[i]));
    return bm;
}

ForwardVars forward(Tape& tape, const BoundModel& bm, Var x) {
    const Model& m = *bm.model;
    require_matrix(tape.value(x), m.input_dim(), "model input");
    const std::size_t n_enc = m.encoder.layers().size();
    Var h = x;
    for (std::size_t i = 0; i < n_enc; ++i) {
        h = ops::add_bias(tape, ops::matmul(tape, h, bm.params[2 * i]), bm.params[2 * i + 1]);
        if (i + 1 < n_enc)
            h = m.encoder.activation() == Activation::tanh ? ops::tanh(tape, h) : ops::relu(tape, h);
    }
    Var logits = ops::add_bias(tape, ops::matmul(tape, h, bm.params[2 * n_enc]),
                               bm.params[2 * n_enc + 1]);
    return {h, logits};
}

namespace {
Tensor affine(const Tensor& x, const Linear& l) {
    const std::size_t n = x.rows(), k = l.in_dim(), m = l.out_dim();
    // Same accumulation order as ops::matmul followed by ops::add_bias, so
    // taped and tape-free passes agree bit for bit.
    Tensor out({n, m}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* o = &out(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
            const double xp = x(i, p);
            const double* w = l.weight.row(p).data();
            for (std::size_t j = 0; j < m; ++j) o[j] += xp * w[j];
        }
        for (std::size_t j = 0; j < m; ++j) o[j] += l.bias[j];
    }
    return out;
}
}  // namespace

ForwardResult forward(const Model& m, const Tensor& x) {
    require_matrix(x, m.input_dim(), "model input");
    require_finite(x, "model input");
    const auto& layers = m.encoder.layers();
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = affine(h, layers[i]);
        if (i + 1 < layers.size()) {
            if (m.encoder.activation() == Activation::tanh)
                for (double& v : h.data()) v = std::tanh(v);
            else
                for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
        }
    }
    Tensor logits = affine(h, m.classifier.layer());
    require_finite(logits, "model logits");
    return {std::move(h), std::move(logits)};
}

Tensor predict_logits(const Model& m, const Tensor& x) { return forward(m, x).logits; }

ParamGrads collect_grads(const Tape& tape, const BoundModel& bm) {
    ParamGrads g;
    for (Var p : bm.params)
        g.grads.push_back(tape.requires_grad(p) ? tape.grad(p) : Tensor(tape.value(p).shape(), 0.0));
    return g;
}

}  // namespace rsfda
