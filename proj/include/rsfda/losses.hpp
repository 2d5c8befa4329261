#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rsfda/autodiff.hpp"
#include "rsfda/pseudo.hpp"
#include "rsfda/rng.hpp"
#include "rsfda/tensor.hpp"

namespace rsfda {

// Weights of the combined target objective
//   ent + alpha * div + beta * pseudo + gamma * con
// plus the contrastive margin.
struct LossWeights {
    double alpha = 1.0;
    double beta = 0.3;
    double gamma = 0.2;
    double margin = 1.0;

    void validate() const;
};

// Ablation switches; a disabled term is still evaluated for logging but
// contributes nothing to the total or its gradient.
struct LossToggles {
    bool entropy = true;
    bool diversity = true;
    bool pseudo = true;
    bool contrastive = true;
};

struct TargetObjective {
    LossWeights weights;
    LossToggles toggles;
    std::size_t max_pairs = 0;  // contrastive pair subsampling, 0 = all pairs
};

inline constexpr double kProbFloor = 1e-12;

Var cross_entropy(Tape& t, Var logits, std::span<const int> labels);
Var entropy_loss(Tape& t, Var logits);
Var diversity_loss(Tape& t, Var logits);
Var pseudo_ce(Tape& t, Var logits, const PseudoLabelSet& pseudo,
              std::span<const std::size_t> batch_idx);

// Mean over the given (i, j) pairs of
//   0.5 * [ same * D^2 + (1 - same) * max(0, m - D)^2 ],  D = |f_i - f_j|.
// With no explicit pair list every unordered pair is used. Fewer than two
// rows yields 0.
using PairList = std::vector<std::pair<std::size_t, std::size_t>>;
Var contrastive_loss(Tape& t, Var features, std::span<const int> labels, double margin,
                     const PairList* pairs = nullptr);

PairList sample_pairs(std::size_t batch, std::size_t max_pairs, Rng& rng);

struct LossBreakdown {
    double ent = 0.0;
    double div = 0.0;
    double pseudo = 0.0;
    double con = 0.0;
    double total = 0.0;
};

struct TargetLoss {
    Var total;
    LossBreakdown parts;
};

TargetLoss target_loss(Tape& t, Var logits, Var features, const PseudoLabelSet& pseudo,
                       std::span<const std::size_t> batch_idx, const TargetObjective& obj,
                       Rng* pair_rng = nullptr);

// Same objective evaluated on forward results of adversarial inputs.
TargetLoss robust_target_loss(Tape& t, Var adv_logits, Var adv_features,
                              const PseudoLabelSet& pseudo,
                              std::span<const std::size_t> batch_idx, const TargetObjective& obj,
                              Rng* pair_rng = nullptr);

// Tape-free evaluations.
double cross_entropy(const Tensor& logits, std::span<const int> labels);
double entropy_loss(const Tensor& logits);
double diversity_loss(const Tensor& logits);
double contrastive_loss(const Tensor& features, std::span<const int> labels, double margin);

// Per-sample cross-entropy without reduction.
std::vector<double> cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels);

}  // namespace rsfda
