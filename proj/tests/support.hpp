#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "rsfda/model.hpp"
#include "rsfda/rng.hpp"
#include "rsfda/tensor.hpp"

namespace testing {

using rsfda::Tensor;

inline Tensor random_tensor(rsfda::Shape shape, rsfda::Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline std::vector<int> random_labels(std::size_t n, int classes, rsfda::Rng& rng) {
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(rng.below(static_cast<std::size_t>(classes)));
    return y;
}

inline rsfda::Model small_model(std::size_t in, std::size_t classes, rsfda::Activation act,
                                std::uint64_t seed, std::vector<std::size_t> hidden = {5},
                                std::size_t feature_dim = 4) {
    rsfda::Rng rng(seed, rsfda::streams::init);
    rsfda::ModelSpec spec;
    spec.hidden = std::move(hidden);
    spec.feature_dim = feature_dim;
    spec.activation = act;
    return rsfda::Model::create(in, classes, spec, rng);
}

// Loop-naive recomputation of the encoder/classifier chain.
inline void naive_forward(const rsfda::Model& m, const Tensor& x, Tensor& features, Tensor& logits) {
    const std::size_t n = x.rows();
    std::vector<std::vector<double>> cur(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) cur[i].push_back(x(i, j));
    auto affine = [&](const rsfda::Linear& l) {
        for (auto& row : cur) {
            std::vector<double> out(l.out_dim(), 0.0);
            for (std::size_t o = 0; o < l.out_dim(); ++o) {
                double s = 0.0;
                for (std::size_t k = 0; k < l.in_dim(); ++k) s += row[k] * l.weight(k, o);
                out[o] = s + l.bias[o];
            }
            row = out;
        }
    };
    const auto& layers = m.encoder.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        affine(layers[li]);
        if (li + 1 < layers.size())
            for (auto& row : cur)
                for (double& v : row)
                    v = m.encoder.activation() == rsfda::Activation::tanh ? std::tanh(v) : std::max(0.0, v);
    }
    features = Tensor({n, m.feature_dim()});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m.feature_dim(); ++j) features(i, j) = cur[i][j];
    affine(m.classifier.layer());
    logits = Tensor({n, m.classes()});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m.classes(); ++j) logits(i, j) = cur[i][j];
}

// Central differences of f with respect to every entry of *target.
inline Tensor numeric_gradient(const std::function<double()>& f, Tensor* target, double h = 1e-5) {
    Tensor g(target->shape());
    for (std::size_t i = 0; i < target->size(); ++i) {
        const double keep = (*target)[i];
        (*target)[i] = keep + h;
        const double up = f();
        (*target)[i] = keep - h;
        const double down = f();
        (*target)[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// Elementwise relative error with an absolute floor for near-zero entries.
inline double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i], n = numeric[i];
        const double denom = std::max({std::abs(a), std::abs(n), floor});
        worst = std::max(worst, std::abs(a - n) / denom);
    }
    return worst;
}

}  // namespace testing
