#include <cmath>
#include <limits>

#include "doctest.h"
#include "rsfda/errors.hpp"
#include "rsfda/model.hpp"
#include "rsfda/softmax.hpp"
#include "support.hpp"

using namespace rsfda;

namespace {
void zero_all(Model& m) {
    for (Tensor* p : m.parameters()) std::fill(p->data().begin(), p->data().end(), 0.0);
}
}  // namespace

TEST_CASE("zero parameters give zero logits and uniform probabilities") {
    Model m = testing::small_model(3, 4, Activation::tanh, 1);
    zero_all(m);
    Rng rng(1, 0);
    const Tensor logits = predict_logits(m, testing::random_tensor({5, 3}, rng));
    for (double v : logits.data()) CHECK(v == 0.0);
    const Tensor probs = softmax(logits);
    for (double p : probs.data()) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("identity single layer maps basis vectors to themselves") {
    Rng rng(0, 0);
    ModelSpec spec;
    spec.hidden = {};
    spec.feature_dim = 3;
    Model m = Model::create(3, 3, spec, rng);
    Linear& enc = m.encoder.layers().at(0);
    Linear& cls = m.classifier.layer();
    std::fill(enc.bias.data().begin(), enc.bias.data().end(), 0.0);
    std::fill(cls.bias.data().begin(), cls.bias.data().end(), 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            enc.weight(i, j) = i == j ? 1.0 : 0.0;
            cls.weight(i, j) = i == j ? 1.0 : 0.0;
        }
    for (std::size_t k = 0; k < 3; ++k) {
        Tensor x({1, 3}, 0.0);
        x(0, k) = 1.0;
        CHECK(predict_logits(m, x) == x);
    }
}

TEST_CASE("forward matches a loop-naive recomputation") {
    for (auto act : {Activation::tanh, Activation::relu}) {
        const Model m = testing::small_model(6, 3, act, 9, {7, 5}, 4);
        Rng rng(4, 0);
        const Tensor x = testing::random_tensor({8, 6}, rng, -2, 2);
        Tensor nf, nl;
        testing::naive_forward(m, x, nf, nl);
        const ForwardResult fr = forward(m, x);
        CHECK(fr.features.shape() == Shape{8, 4});
        CHECK(fr.logits.shape() == Shape{8, 3});
        for (std::size_t i = 0; i < nl.size(); ++i) CHECK(std::abs(fr.logits[i] - nl[i]) < 1e-12);
        for (std::size_t i = 0; i < nf.size(); ++i) CHECK(std::abs(fr.features[i] - nf[i]) < 1e-12);
    }
}

TEST_CASE("taped and tape-free forward agree bit for bit") {
    const Model m = testing::small_model(5, 3, Activation::relu, 2, {6, 6}, 4);
    Rng rng(8, 0);
    const Tensor x = testing::random_tensor({4, 5}, rng);
    Tape t;
    const BoundModel bm = bind(t, m, true);
    const ForwardVars fv = forward(t, bm, t.leaf(x));
    const ForwardResult fr = forward(m, x);
    CHECK(t.value(fv.logits) == fr.logits);
    CHECK(t.value(fv.features) == fr.features);
}

TEST_CASE("forward rejects wrong widths and non-finite input") {
    const Model m = testing::small_model(3, 2, Activation::tanh, 1);
    CHECK_THROWS_AS(predict_logits(m, Tensor({2, 4}, 0.0)), DimensionError);
    Tensor x({2, 3}, 0.0);
    x(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(predict_logits(m, x), NumericError);
}

TEST_CASE("parameter count is a function of the widths") {
    const std::vector<std::size_t> w{4, 8, 3};
    CHECK(Encoder::parameter_count(w) == 4 * 8 + 8 + 8 * 3 + 3);
    Rng r1(1, 0), r2(2, 0);
    const Encoder a(w, Activation::tanh, r1), b(w, Activation::relu, r2);
    std::size_t na = 0, nb = 0;
    for (const auto& l : a.layers()) na += l.weight.size() + l.bias.size();
    for (const auto& l : b.layers()) nb += l.weight.size() + l.bias.size();
    CHECK(na == Encoder::parameter_count(w));
    CHECK(nb == na);
}

TEST_CASE("initialization is uniform within the fan-in bound") {
    const Model m = testing::small_model(16, 3, Activation::relu, 5, {32}, 8);
    for (const auto& l : m.encoder.layers()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim()));
        for (double v : l.weight.data()) CHECK(std::abs(v) <= bound);
        for (double v : l.bias.data()) CHECK(std::abs(v) <= bound);
    }
}

TEST_CASE("parameter groups put the bottleneck and classifier in the head") {
    const Model m = testing::small_model(3, 2, Activation::tanh, 1, {4, 4}, 3);
    const auto g = parameter_groups(m);
    REQUIRE(g.size() == 8);
    for (int i = 0; i < 4; ++i) CHECK(g[i] == ParamGroup::backbone);
    for (int i = 4; i < 8; ++i) CHECK(g[i] == ParamGroup::head);
}

TEST_CASE("parameter gradients of a small net match central differences") {
    for (auto act : {Activation::tanh, Activation::relu}) {
        Model m = testing::small_model(4, 3, act, 11, {5}, 3);
        Rng rng(12, 0);
        const Tensor x = testing::random_tensor({6, 4}, rng);
        const Tensor target = testing::random_tensor({6, 3}, rng);
        auto loss = [&](Tape& t, const BoundModel& bm) {
            const ForwardVars fv = forward(t, bm, t.leaf(x));
            const Var diff = ops::add(t, fv.logits, t.leaf(target));
            return ops::half_sq_norm(t, diff);
        };
        Tape t;
        const BoundModel bm = bind(t, m, true);
        t.backward(loss(t, bm));
        const ParamGrads g = collect_grads(t, bm);
        auto params = m.parameters();
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto value = [&] {
                Tape t2;
                return t2.value(loss(t2, bind(t2, m, false))).item();
            };
            CHECK(testing::max_relative_error(g.grads[k], testing::numeric_gradient(value, params[k])) <
                  1e-4);
        }
    }
}

TEST_CASE("input gradient is available on request") {
    const Model m = testing::small_model(3, 2, Activation::tanh, 4);
    Rng rng(1, 0);
    Tensor x = testing::random_tensor({2, 3}, rng);
    Tape t;
    const BoundModel bm = bind(t, m, false);
    const Var vx = t.leaf(x, true);
    t.backward(ops::sum(t, forward(t, bm, vx).logits));
    auto value = [&] {
        Tape t2;
        return t2.value(ops::sum(t2, forward(t2, bind(t2, m, false), t2.leaf(x)).logits)).item();
    };
    CHECK(testing::max_relative_error(t.grad(vx), testing::numeric_gradient(value, &x)) < 1e-4);
}

TEST_CASE("frozen classifier is bound without gradients") {
    Model m = testing::small_model(3, 2, Activation::tanh, 4);
    m.classifier.set_frozen(true);
    Tape t;
    const BoundModel bm = bind(t, m, true);
    Rng rng(1, 0);
    t.backward(ops::sum(t, forward(t, bm, t.leaf(testing::random_tensor({2, 3}, rng))).logits));
    const ParamGrads g = collect_grads(t, bm);
    const auto frozen = parameter_frozen(m);
    for (std::size_t k = 0; k < g.grads.size(); ++k)
        if (frozen[k])
            for (double v : g.grads[k].data()) CHECK(v == 0.0);
    CHECK(frozen.back());
    CHECK_FALSE(frozen.front());
}
