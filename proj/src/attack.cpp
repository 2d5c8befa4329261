#include "rsfda/attack.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsfda/errors.hpp"
#include "rsfda/losses.hpp"
#include "rsfda/softmax.hpp"

namespace rsfda {

AttackConfig AttackConfig::relative(double epsilon, int steps, double rel_step, double lo, double hi,
                                    bool random_start) {
    AttackConfig c;
    c.epsilon = epsilon;
    c.steps = steps;
    c.step_size = epsilon > 0.0 ? rel_step * epsilon : rel_step;
    c.random_start = random_start;
    c.clamp_lo = lo;
    c.clamp_hi = hi;
    return c;
}

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("attack epsilon must be >= 0");
    if (steps < 1) throw ConfigError("attack steps must be >= 1");
    if (!(step_size > 0.0)) throw ConfigError("attack step_size must be > 0");
    if (!(clamp_lo < clamp_hi)) throw ConfigError("attack clamp_lo must be < clamp_hi");
}

Tensor input_gradient(const Model& model, const Tensor& x, std::span<const int> labels) {
    Tape tape;
    BoundModel bm = bind(tape, model, false);
    Var xv = tape.leaf(x, true);
    ForwardVars fw = forward(tape, bm, xv);
    Var loss = cross_entropy(tape, fw.logits, labels);
    tape.backward(loss);
    return tape.grad(xv);
}

namespace {
inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}  // namespace

Tensor pgd_attack(const Model& model, const Tensor& x, std::span<const int> labels,
                  const AttackConfig& cfg, Rng* rng) {
    cfg.validate();
    require_matrix(x, model.input_dim(), "attack input");
    if (labels.size() != x.rows()) throw DimensionError("attack: label count does not match batch");
    if (cfg.epsilon == 0.0) return x;

    const double eps = cfg.epsilon;
    Tensor adv = x;
    if (cfg.random_start) {
        if (!rng) throw StateError("random_start attack needs a random stream");
        for (std::size_t i = 0; i < adv.size(); ++i)
            adv[i] = std::clamp(x[i] + rng->uniform(-eps, eps), cfg.clamp_lo, cfg.clamp_hi);
    }
    for (int step = 0; step < cfg.steps; ++step) {
        Tensor g;
        try {
            g = input_gradient(model, adv, labels);
        } catch (const NumericError& e) {
            throw NumericError(std::string("attack step ") + std::to_string(step) + ": " + e.what());
        }
        for (std::size_t r = 0; r < adv.rows(); ++r) {
            for (double v : g.row(r))
                if (!std::isfinite(v))
                    throw NumericError("attack: non-finite input gradient at batch index " +
                                       std::to_string(r));
        }
        for (std::size_t i = 0; i < adv.size(); ++i) {
            double v = adv[i] + cfg.step_size * sign(g[i]);
            v = std::min(std::max(v, x[i] - eps), x[i] + eps);
            adv[i] = std::clamp(v, cfg.clamp_lo, cfg.clamp_hi);
        }
    }
    return adv;
}

double clean_accuracy(const Model& model, const Tensor& x, std::span<const int> labels) {
    if (x.empty() || labels.empty()) throw DomainError("accuracy of an empty dataset");
    const auto pred = argmax_rows(predict_logits(model, x));
    if (pred.size() != labels.size()) throw DimensionError("accuracy: label count mismatch");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

std::vector<int> adv_predictions(const Model& model, const Tensor& x, std::span<const int> labels,
                                 const AttackConfig& cfg, Rng* rng) {
    if (x.empty() || labels.empty()) throw DomainError("adversarial accuracy of an empty dataset");
    constexpr std::size_t chunk = 256;
    std::vector<int> pred;
    pred.reserve(x.rows());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < x.rows(); start += chunk) {
        const std::size_t stop = std::min(x.rows(), start + chunk);
        idx.clear();
        for (std::size_t i = start; i < stop; ++i) idx.push_back(i);
        const Tensor xb = x.gather_rows(idx);
        const Tensor adv = pgd_attack(model, xb, labels.subspan(start, stop - start), cfg, rng);
        const auto p = argmax_rows(predict_logits(model, adv));
        pred.insert(pred.end(), p.begin(), p.end());
    }
    return pred;
}

double adv_accuracy(const Model& model, const Tensor& x, std::span<const int> labels,
                    const AttackConfig& cfg, Rng* rng) {
    const auto pred = adv_predictions(model, x, labels, cfg, rng);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace rsfda
