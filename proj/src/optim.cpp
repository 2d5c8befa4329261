#include "rsfda/optim.hpp"

#include <cmath>
#include <memory>

#include "rsfda/errors.hpp"

namespace rsfda {

OptimizerState OptimizerState::for_model(const Model& m, LearningRates rates, AdamHyper hyper) {
    OptimizerState s;
    s.rates = rates;
    s.hyper = hyper;
    for (const Tensor* p : m.parameters()) {
        s.first_moment.emplace_back(p->shape(), 0.0);
        s.second_moment.emplace_back(p->shape(), 0.0);
    }
    return s;
}

void adam_update(OptimizerState& state, std::span<Tensor* const> params,
                 std::span<const Tensor> grads, std::span<const double> lr,
                 std::span<const bool> frozen) {
    const std::size_t n = params.size();
    if (grads.size() != n || lr.size() != n || frozen.size() != n)
        throw DimensionError("adam: parameter/gradient count mismatch");
    if (state.first_moment.size() != n) {
        state.first_moment.clear();
        state.second_moment.clear();
        for (const Tensor* p : params) {
            state.first_moment.emplace_back(p->shape(), 0.0);
            state.second_moment.emplace_back(p->shape(), 0.0);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (grads[i].shape() != params[i]->shape())
            throw DimensionError("adam: gradient " + shape_str(grads[i].shape()) +
                                 " for parameter " + shape_str(params[i]->shape()));
        if (state.first_moment[i].shape() != params[i]->shape())
            throw DimensionError("adam: optimizer state does not match parameter shapes");
    }

    state.step += 1;
    const auto& h = state.hyper;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(h.beta1, t);
    const double bc2 = 1.0 - std::pow(h.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
        if (frozen[i]) continue;
        Tensor& p = *params[i];
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        const Tensor& g = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
            v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr[i] * mhat / (std::sqrt(vhat) + h.eps);
        }
    }
}

void adam_step(OptimizerState& state, Model& model, const ParamGrads& grads) {
    auto params = model.parameters();
    const auto groups = parameter_groups(model);
    const auto frozen_vec = parameter_frozen(model);
    std::vector<double> lr;
    for (auto g : groups) lr.push_back(g == ParamGroup::head ? state.rates.head : state.rates.backbone);
    std::unique_ptr<bool[]> frozen(new bool[frozen_vec.size()]);
    for (std::size_t i = 0; i < frozen_vec.size(); ++i) frozen[i] = frozen_vec[i];
    adam_update(state, params, grads.grads, lr, {frozen.get(), frozen_vec.size()});
}

}  // namespace rsfda
