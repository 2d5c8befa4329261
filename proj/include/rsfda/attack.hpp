#pragma once

#include <span>

#include "rsfda/model.hpp"
#include "rsfda/rng.hpp"
#include "rsfda/tensor.hpp"

namespace rsfda {

// l-infinity threat model. step_size is absolute; use `relative` to express
// it as a fraction of epsilon.
struct AttackConfig {
    double epsilon = 0.0;
    int steps = 20;
    double step_size = 0.0;
    bool random_start = false;
    double clamp_lo = 0.0;
    double clamp_hi = 1.0;

    static AttackConfig relative(double epsilon, int steps, double rel_step, double lo, double hi,
                                 bool random_start = false);
    void validate() const;
};

// PGD on the cross-entropy of `labels`: sign-gradient ascent, then
// projection onto the epsilon ball around x and the clamp box. `rng` is only
// consumed when random_start is set (and epsilon > 0).
Tensor pgd_attack(const Model& model, const Tensor& x, std::span<const int> labels,
                  const AttackConfig& cfg, Rng* rng = nullptr);

// Gradient of mean cross-entropy with respect to the input rows.
Tensor input_gradient(const Model& model, const Tensor& x, std::span<const int> labels);

double clean_accuracy(const Model& model, const Tensor& x, std::span<const int> labels);

// Accuracy on PGD-perturbed inputs; ground-truth labels drive the attack.
double adv_accuracy(const Model& model, const Tensor& x, std::span<const int> labels,
                    const AttackConfig& cfg, Rng* rng = nullptr);

// Per-sample predictions on attacked inputs.
std::vector<int> adv_predictions(const Model& model, const Tensor& x, std::span<const int> labels,
                                 const AttackConfig& cfg, Rng* rng = nullptr);

}  // namespace rsfda
