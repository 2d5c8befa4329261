#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "rsfda/errors.hpp"
#include "rsfda/pseudo.hpp"
#include "rsfda/softmax.hpp"
#include "support.hpp"

using namespace rsfda;

namespace {

Tensor random_probs(std::size_t n, std::size_t C, Rng& rng) {
    return softmax(testing::random_tensor({n, C}, rng, -2, 2));
}

double mean_distance(const Tensor& pts, const std::vector<int>& assign, const CentroidSet& cs,
                     bool squared) {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        const double d = centroid_distance(pts.row(i), cs.centers.row(assign[i]), cs.metric);
        s += squared ? d * d : d;
    }
    return s / static_cast<double>(pts.rows());
}

}  // namespace

TEST_CASE("a single class labels everything zero") {
    Rng rng(1, 0);
    const Tensor f = testing::random_tensor({7, 3}, rng);
    const auto p = kmeans_pseudo_labels(f, Tensor({7, 1}, 1.0));
    CHECK(p.labels == std::vector<int>(7, 0));
    CHECK(p.source == LabelSource::kmeans);
}

TEST_CASE("two separated clusters with mildly informative probabilities") {
    // Ten points around (3, 3) and ten around (-3, 1); probabilities 0.6/0.4
    // toward the true class.
    Rng rng(4, 0);
    Tensor f({20, 2});
    Tensor probs({20, 2});
    std::vector<int> truth(20);
    for (std::size_t i = 0; i < 20; ++i) {
        const int c = i < 10 ? 0 : 1;
        truth[i] = c;
        f(i, 0) = (c == 0 ? 3.0 : -3.0) + rng.uniform(-0.5, 0.5);
        f(i, 1) = (c == 0 ? 3.0 : 1.0) + rng.uniform(-0.5, 0.5);
        probs(i, c) = 0.6;
        probs(i, 1 - c) = 0.4;
    }
    for (auto metric : {DistanceMetric::cosine, DistanceMetric::euclidean}) {
        const auto p = kmeans_pseudo_labels(f, probs, metric);
        CHECK(p.labels == truth);
        CHECK(p.labels == testing::brute_force_kmeans(f, probs, metric == DistanceMetric::cosine));
    }
}

TEST_CASE("identical features collapse to the lowest class") {
    const Tensor f({6, 3}, 0.25);
    Rng rng(2, 0);
    const auto p = kmeans_pseudo_labels(f, random_probs(6, 4, rng));
    for (int v : p.labels) CHECK(v == p.labels[0]);
    // All centroids coincide with the points, so the tie goes to class 0.
    CHECK(p.labels[0] == 0);
}

TEST_CASE("kmeans matches the brute-force oracle on random instances") {
    Rng rng(50, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(29), C = 1 + rng.below(4), d = 1 + rng.below(4);
        const Tensor f = testing::random_tensor({n, d}, rng, -2, 2);
        const Tensor probs = random_probs(n, C, rng);
        for (bool cosine : {true, false}) {
            const auto p = kmeans_pseudo_labels(
                f, probs, cosine ? DistanceMetric::cosine : DistanceMetric::euclidean);
            CHECK(p.labels == testing::brute_force_kmeans(f, probs, cosine));
        }
    }
}

TEST_CASE("kmeans is invariant to sample order") {
    Rng rng(6, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng.below(20);
        const Tensor f = testing::random_tensor({n, 3}, rng, -2, 2);
        const Tensor probs = random_probs(n, 3, rng);
        const auto base = kmeans_pseudo_labels(f, probs).labels;
        const auto perm = rng.permutation(n);
        const auto shuffled = kmeans_pseudo_labels(f.gather_rows(perm), probs.gather_rows(perm)).labels;
        for (std::size_t i = 0; i < n; ++i) CHECK(shuffled[i] == base[perm[i]]);
    }
}

TEST_CASE("the second step weakly improves the fit") {
    Rng rng(7, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + rng.below(27), C = 2 + rng.below(3);
        const Tensor f = testing::random_tensor({n, 2}, rng, -2, 2);
        const Tensor probs = random_probs(n, C, rng);
        for (auto metric : {DistanceMetric::cosine, DistanceMetric::euclidean}) {
            KMeansTrace tr;
            kmeans_pseudo_labels(f, probs, metric, &tr);
            // Reassignment against the refined centroids never increases distance.
            CHECK(mean_distance(tr.points, tr.step2, tr.refined, false) <=
                  mean_distance(tr.points, tr.step1, tr.refined, false) + 1e-12);
            if (metric == DistanceMetric::euclidean) {
                // Cluster means minimize squared distance for a fixed assignment.
                CHECK(mean_distance(tr.points, tr.step1, tr.refined, true) <=
                      mean_distance(tr.points, tr.step1, tr.weighted, true) + 1e-12);
            }
        }
    }
}

TEST_CASE("classes without probability mass are excluded") {
    Rng rng(8, 0);
    const Tensor f = testing::random_tensor({10, 2}, rng);
    Tensor probs({10, 3}, 0.0);
    for (std::size_t i = 0; i < 10; ++i) {
        probs(i, 0) = 0.3;
        probs(i, 2) = 0.7;
    }
    KMeansTrace tr;
    const auto p = kmeans_pseudo_labels(f, probs, DistanceMetric::cosine, &tr);
    CHECK(tr.weighted.empty[1]);
    for (int v : p.labels) CHECK(v != 1);
    CHECK_THROWS_AS(kmeans_pseudo_labels(f, Tensor({10, 3}, 0.0)), DegenerateError);
}

TEST_CASE("kmeans input validation") {
    CHECK_THROWS_AS(kmeans_pseudo_labels(Tensor({3, 2}, 0.0), Tensor({4, 2}, 0.5)), DimensionError);
    Tensor f({2, 2}, 0.0);
    f(0, 0) = std::nan("");
    CHECK_THROWS_AS(kmeans_pseudo_labels(f, Tensor({2, 2}, 0.5)), NumericError);
}

TEST_CASE("nearest centroid breaks ties toward the lowest index") {
    CentroidSet cs{Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 0}), {false, false, false},
                   DistanceMetric::euclidean};
    const double pt[] = {1, 0};
    CHECK(nearest_centroid(pt, cs) == 0);
    cs.empty[0] = true;
    CHECK(nearest_centroid(pt, cs) == 2);
    const double mid[] = {0.5, 0.5};
    cs.empty[0] = false;
    CHECK(nearest_centroid(mid, cs) == 0);
}

TEST_CASE("model pseudo-labels are the argmax of the logits") {
    Rng rng(0, 0);
    ModelSpec spec;
    spec.hidden = {};
    spec.feature_dim = 3;
    Model m = Model::create(3, 3, spec, rng);
    for (Tensor* p : m.parameters()) p->fill(0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        m.encoder.layers()[0].weight(i, i) = 1.0;
        m.classifier.layer().weight(i, i) = 1.0;
    }
    const Tensor x = Tensor::matrix(4, 3, {0, 1, 0, 0, 0, 1, 1, 0, 0, 0.5, 0.5, 0});
    const auto p = model_pseudo_labels(m, x);
    CHECK(p.labels == std::vector<int>{1, 2, 0, 0});
    CHECK(p.source == LabelSource::standard_model);
    CHECK(model_pseudo_labels(m, x, LabelSource::robust_model).source == LabelSource::robust_model);
}

TEST_CASE("pseudo-label accuracy") {
    const std::vector<int> truth{0, 1, 2, 0, 1, 2};
    CHECK(pseudo_label_accuracy(PseudoLabelSet{truth}, truth) == 1.0);
    CHECK(pseudo_label_accuracy(PseudoLabelSet{{1, 2, 0, 1, 2, 0}}, truth) == 0.0);
    Rng rng(3, 0);
    const std::size_t n = 20000;
    const auto a = testing::random_labels(n, 4, rng), b = testing::random_labels(n, 4, rng);
    const double acc = pseudo_label_accuracy(PseudoLabelSet{a}, b);
    CHECK(std::abs(acc - 0.25) < 4 * std::sqrt(0.25 * 0.75 / n));
    CHECK_THROWS_AS(pseudo_label_accuracy(PseudoLabelSet{{0}}, truth), DimensionError);
}
