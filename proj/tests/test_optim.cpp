#include "doctest.h"
#include "rsfda/errors.hpp"
#include "rsfda/optim.hpp"
#include "support.hpp"

using namespace rsfda;

namespace {
ParamGrads constant_grads(const Model& m, double v) {
    ParamGrads g;
    for (const Tensor* p : m.parameters()) g.grads.emplace_back(p->shape(), v);
    return g;
}
}  // namespace

TEST_CASE("zero gradient leaves parameters unchanged") {
    Model m = testing::small_model(3, 2, Activation::tanh, 1);
    const auto before = m.parameter_hash();
    OptimizerState s = OptimizerState::for_model(m, {1e-3, 1e-3});
    for (int i = 0; i < 3; ++i) adam_step(s, m, constant_grads(m, 0.0));
    CHECK(m.parameter_hash() == before);
    CHECK(s.step == 3);
}

TEST_CASE("one step from zero with unit gradient moves by the learning rate") {
    Tensor p({1}, 0.0);
    OptimizerState s;
    s.first_moment.emplace_back(Shape{1}, 0.0);
    s.second_moment.emplace_back(Shape{1}, 0.0);
    Tensor* params[] = {&p};
    const Tensor grads[] = {Tensor({1}, 1.0)};
    const double lr[] = {1e-3};
    const bool frozen[] = {false};
    adam_update(s, params, grads, lr, frozen);
    // m = 0.1, v = 0.001; bias corrections restore m_hat = 1, v_hat = 1.
    const double expected = -1e-3 * 1.0 / (1.0 + 1e-8);
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(p[0] < 0.0);
    CHECK(std::abs(p[0]) <= 1e-3);
    CHECK(s.step == 1);
}

TEST_CASE("adam matches a hand-rolled recurrence over several steps") {
    Tensor p({1}, 0.5);
    OptimizerState s;
    s.first_moment.emplace_back(Shape{1}, 0.0);
    s.second_moment.emplace_back(Shape{1}, 0.0);
    double ref = 0.5, m = 0.0, v = 0.0;
    const double gs[] = {0.3, -1.2, 2.0, 0.0, 0.7};
    for (int t = 1; t <= 5; ++t) {
        const double g = gs[t - 1];
        Tensor* params[] = {&p};
        const Tensor grads[] = {Tensor({1}, g)};
        const double lr[] = {0.01};
        const bool frozen[] = {false};
        adam_update(s, params, grads, lr, frozen);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        ref -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(p[0] == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("frozen classifier stays bit-identical") {
    Model m = testing::small_model(3, 2, Activation::relu, 2);
    m.classifier.set_frozen(true);
    const auto cls = m.classifier_hash();
    const auto all = m.parameter_hash();
    OptimizerState s = OptimizerState::for_model(m, {1e-3, 1e-3});
    adam_step(s, m, constant_grads(m, 0.5));
    CHECK(m.classifier_hash() == cls);
    CHECK(m.parameter_hash() != all);
}

TEST_CASE("group learning rates are applied per parameter group") {
    Model m = testing::small_model(3, 2, Activation::relu, 3, {4}, 3);
    const Model before = m;
    OptimizerState s = OptimizerState::for_model(m, {1e-5, 1e-3});
    adam_step(s, m, constant_grads(m, 1.0));
    const auto groups = parameter_groups(m);
    auto now = m.parameters();
    auto old = before.parameters();
    for (std::size_t k = 0; k < now.size(); ++k) {
        const double lr = groups[k] == ParamGroup::head ? 1e-3 : 1e-5;
        for (std::size_t i = 0; i < now[k]->size(); ++i)
            CHECK((*old[k])[i] - (*now[k])[i] == doctest::Approx(lr).epsilon(1e-6));
    }
}

TEST_CASE("gradient shape mismatch is a dimension error") {
    Model m = testing::small_model(3, 2, Activation::relu, 3);
    OptimizerState s = OptimizerState::for_model(m, {1e-3, 1e-3});
    ParamGrads g = constant_grads(m, 1.0);
    g.grads[0] = Tensor({1}, 1.0);
    CHECK_THROWS_AS(adam_step(s, m, g), DimensionError);
    g.grads.pop_back();
    CHECK_THROWS_AS(adam_step(s, m, g), DimensionError);
}
