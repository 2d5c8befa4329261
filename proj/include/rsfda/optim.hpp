#pragma once

#include <cstdint>
#include <vector>

#include "rsfda/model.hpp"
#include "rsfda/tensor.hpp"

namespace rsfda {

struct LearningRates {
    double backbone = 1e-3;
    double head = 1e-3;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    LearningRates rates;
    AdamHyper hyper;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;

    static OptimizerState for_model(const Model& m, LearningRates rates, AdamHyper hyper = {});
};

// Generic Adam update over aligned parameter/gradient lists. `lr` and
// `frozen` are per parameter; frozen entries are skipped entirely (their
// moments stay untouched as well).
void adam_update(OptimizerState& state, std::span<Tensor* const> params,
                 std::span<const Tensor> grads, std::span<const double> lr,
                 std::span<const bool> frozen);

// Model-level step honoring parameter groups and the classifier freeze flag.
void adam_step(OptimizerState& state, Model& model, const ParamGrads& grads);

}  // namespace rsfda
