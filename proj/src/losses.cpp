#include "rsfda/losses.hpp"

#include <cmath>
#include <string>

#include "rsfda/errors.hpp"
#include "rsfda/softmax.hpp"

namespace rsfda {

void LossWeights::validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0))
        throw ConfigError("loss weights alpha, beta, gamma must be nonnegative");
    if (!(margin > 0.0)) throw ConfigError("contrastive margin must be positive");
}

namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
    if (labels.size() != rows)
        throw DimensionError("got " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(rows) + " rows");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw LabelError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                             " outside [0, " + std::to_string(classes) + ")");
}

// log(p) with the floor applied; d/dp [p log p] under the same convention.
inline double floored_log(double p) { return std::log(p > kProbFloor ? p : kProbFloor); }
inline double plogp_slope(double p) { return p > kProbFloor ? std::log(p) + 1.0 : std::log(kProbFloor); }

double row_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * floored_log(v);
    return h;
}

}  // namespace

Var cross_entropy(Tape& t, Var logits, std::span<const int> labels) {
    const Tensor& z = t.value(logits);
    require_matrix(z, 0, "cross_entropy logits");
    check_labels(labels, z.rows(), z.cols());
    const Tensor logp = log_softmax(z);
    const double B = static_cast<double>(z.rows());
    double loss = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) loss -= logp(i, labels[i]);
    loss /= B;
    std::vector<int> y(labels.begin(), labels.end());
    return t.record(Tensor::scalar(loss), {logits},
                    [y = std::move(y), logp, B](const BackwardContext& c) {
                        Tensor* g = c.input_grads[0];
                        if (!g) return;
                        const double go = c.grad_output[0] / B;
                        for (std::size_t i = 0; i < logp.rows(); ++i)
                            for (std::size_t j = 0; j < logp.cols(); ++j) {
                                const double p = std::exp(logp(i, j));
                                (*g)(i, j) += go * (p - (static_cast<int>(j) == y[i] ? 1.0 : 0.0));
                            }
                    });
}

Var entropy_loss(Tape& t, Var logits) {
    const Tensor& z = t.value(logits);
    Tensor p = softmax(z);
    const double B = static_cast<double>(z.rows());
    double loss = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) loss += row_entropy(p.row(i));
    loss /= B;
    return t.record(Tensor::scalar(loss), {logits}, [p = std::move(p), B](const BackwardContext& c) {
        Tensor* g = c.input_grads[0];
        if (!g) return;
        const double go = c.grad_output[0] / B;
        std::vector<double> a(p.cols());
        for (std::size_t i = 0; i < p.rows(); ++i) {
            auto pr = p.row(i);
            double mean_a = 0.0;
            for (std::size_t j = 0; j < pr.size(); ++j) {
                a[j] = plogp_slope(pr[j]);
                mean_a += pr[j] * a[j];
            }
            // H = -sum p log p, dH/dz_j = -p_j (a_j - sum_i p_i a_i)
            for (std::size_t j = 0; j < pr.size(); ++j) (*g)(i, j) -= go * pr[j] * (a[j] - mean_a);
        }
    });
}

Var diversity_loss(Tape& t, Var logits) {
    const Tensor& z = t.value(logits);
    if (z.rank() != 2 || z.rows() == 0) throw DimensionError("diversity_loss needs a non-empty batch");
    Tensor p = softmax(z);
    const std::size_t C = p.cols();
    const double B = static_cast<double>(p.rows());
    std::vector<double> q(C, 0.0);
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < C; ++j) q[j] += p(i, j);
    double loss = 0.0;
    for (double& v : q) {
        v /= B;
        if (v > 0.0) loss += v * floored_log(v);
    }
    std::vector<double> a(C);
    for (std::size_t j = 0; j < C; ++j) a[j] = plogp_slope(q[j]);
    return t.record(Tensor::scalar(loss), {logits},
                    [p = std::move(p), a = std::move(a), B](const BackwardContext& c) {
                        Tensor* g = c.input_grads[0];
                        if (!g) return;
                        const double go = c.grad_output[0] / B;
                        for (std::size_t i = 0; i < p.rows(); ++i) {
                            auto pr = p.row(i);
                            double mean_a = 0.0;
                            for (std::size_t j = 0; j < pr.size(); ++j) mean_a += pr[j] * a[j];
                            for (std::size_t j = 0; j < pr.size(); ++j)
                                (*g)(i, j) += go * pr[j] * (a[j] - mean_a);
                        }
                    });
}

Var pseudo_ce(Tape& t, Var logits, const PseudoLabelSet& pseudo,
              std::span<const std::size_t> batch_idx) {
    const auto labels = pseudo.gather(batch_idx);
    return cross_entropy(t, logits, labels);
}

PairList sample_pairs(std::size_t batch, std::size_t max_pairs, Rng& rng) {
    PairList all;
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t j = i + 1; j < batch; ++j) all.emplace_back(i, j);
    if (max_pairs == 0 || max_pairs >= all.size()) return all;
    auto perm = rng.permutation(all.size());
    PairList out;
    for (std::size_t k = 0; k < max_pairs; ++k) out.push_back(all[perm[k]]);
    return out;
}

Var contrastive_loss(Tape& t, Var features, std::span<const int> labels, double margin,
                     const PairList* pairs) {
    const Tensor& f = t.value(features);
    require_matrix(f, 0, "contrastive features");
    if (labels.size() != f.rows())
        throw DimensionError("contrastive: label count does not match feature rows");
    if (!(margin > 0.0)) throw ConfigError("contrastive margin must be positive");
    PairList local;
    if (!pairs) {
        for (std::size_t i = 0; i < f.rows(); ++i)
            for (std::size_t j = i + 1; j < f.rows(); ++j) local.emplace_back(i, j);
        pairs = &local;
    }
    for (const auto& [i, j] : *pairs)
        if (i >= f.rows() || j >= f.rows()) throw DimensionError("contrastive pair index out of range");
    const std::size_t d = f.cols();
    double loss = 0.0;
    for (const auto& [i, j] : *pairs) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = f(i, k) - f(j, k);
            d2 += diff * diff;
        }
        if (labels[i] == labels[j]) {
            loss += 0.5 * d2;
        } else {
            const double gap = margin - std::sqrt(d2);
            if (gap > 0.0) loss += 0.5 * gap * gap;
        }
    }
    const double n_pairs = static_cast<double>(pairs->size());
    if (n_pairs > 0) loss /= n_pairs;
    std::vector<int> y(labels.begin(), labels.end());
    return t.record(Tensor::scalar(loss), {features},
                    [y = std::move(y), P = *pairs, margin, n_pairs](const BackwardContext& c) {
                        Tensor* g = c.input_grads[0];
                        if (!g || n_pairs == 0) return;
                        const Tensor& f = *c.inputs[0];
                        const std::size_t d = f.cols();
                        const double go = c.grad_output[0] / n_pairs;
                        for (const auto& [i, j] : P) {
                            double coef;
                            if (y[i] == y[j]) {
                                coef = 1.0;
                            } else {
                                double d2 = 0.0;
                                for (std::size_t k = 0; k < d; ++k) {
                                    const double diff = f(i, k) - f(j, k);
                                    d2 += diff * diff;
                                }
                                const double D = std::sqrt(d2);
                                // Subgradient 0 at D = 0 where the direction is undefined.
                                if (D >= margin || D == 0.0) continue;
                                coef = -(margin - D) / D;
                            }
                            for (std::size_t k = 0; k < d; ++k) {
                                const double v = go * coef * (f(i, k) - f(j, k));
                                (*g)(i, k) += v;
                                (*g)(j, k) -= v;
                            }
                        }
                    });
}

TargetLoss target_loss(Tape& t, Var logits, Var features, const PseudoLabelSet& pseudo,
                       std::span<const std::size_t> batch_idx, const TargetObjective& obj,
                       Rng* pair_rng) {
    obj.weights.validate();
    const auto labels = pseudo.gather(batch_idx);
    Var ent = entropy_loss(t, logits);
    Var div = diversity_loss(t, logits);
    Var pse = cross_entropy(t, logits, labels);
    Var con;
    if (obj.max_pairs > 0 && pair_rng) {
        const PairList pairs = sample_pairs(batch_idx.size(), obj.max_pairs, *pair_rng);
        con = contrastive_loss(t, features, labels, obj.weights.margin, &pairs);
    } else {
        con = contrastive_loss(t, features, labels, obj.weights.margin);
    }
    const auto& w = obj.weights;
    const auto& on = obj.toggles;
    const Var terms[] = {ent, div, pse, con};
    const double coefs[] = {on.entropy ? 1.0 : 0.0, on.diversity ? w.alpha : 0.0,
                            on.pseudo ? w.beta : 0.0, on.contrastive ? w.gamma : 0.0};
    TargetLoss out;
    out.total = ops::weighted_sum(t, terms, coefs);
    out.parts.ent = t.value(ent).item();
    out.parts.div = t.value(div).item();
    out.parts.pseudo = t.value(pse).item();
    out.parts.con = t.value(con).item();
    out.parts.total = t.value(out.total).item();
    return out;
}

TargetLoss robust_target_loss(Tape& t, Var adv_logits, Var adv_features,
                              const PseudoLabelSet& pseudo,
                              std::span<const std::size_t> batch_idx, const TargetObjective& obj,
                              Rng* pair_rng) {
    return target_loss(t, adv_logits, adv_features, pseudo, batch_idx, obj, pair_rng);
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
    Tape t;
    return t.value(cross_entropy(t, t.leaf(logits), labels)).item();
}

double entropy_loss(const Tensor& logits) {
    Tape t;
    return t.value(entropy_loss(t, t.leaf(logits))).item();
}

double diversity_loss(const Tensor& logits) {
    Tape t;
    return t.value(diversity_loss(t, t.leaf(logits))).item();
}

double contrastive_loss(const Tensor& features, std::span<const int> labels, double margin) {
    Tape t;
    return t.value(contrastive_loss(t, t.leaf(features), labels, margin)).item();
}

std::vector<double> cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels) {
    require_matrix(logits, 0, "cross_entropy logits");
    check_labels(labels, logits.rows(), logits.cols());
    const Tensor logp = log_softmax(logits);
    std::vector<double> out(logits.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -logp(i, labels[i]);
    return out;
}

}  // namespace rsfda
