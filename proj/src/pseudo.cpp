#include "rsfda/pseudo.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rsfda/errors.hpp"
#include "rsfda/softmax.hpp"

namespace rsfda {

std::string to_string(LabelSource s) {
    switch (s) {
        case LabelSource::kmeans: return "kmeans";
        case LabelSource::standard_model: return "standard_model";
        case LabelSource::robust_model: return "robust_model";
    }
    return "unknown";
}

std::vector<int> PseudoLabelSet::gather(std::span<const std::size_t> idx) const {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) {
        if (i >= labels.size())
            throw CoverageError("no pseudo-label for sample " + std::to_string(i) + " (set covers " +
                                std::to_string(labels.size()) + ")");
        out.push_back(labels[i]);
    }
    return out;
}

DistanceMetric metric_from_string(const std::string& s) {
    if (s == "cosine") return DistanceMetric::cosine;
    if (s == "euclidean") return DistanceMetric::euclidean;
    throw ConfigError("unknown distance metric '" + s + "' (expected cosine or euclidean)");
}

std::string to_string(DistanceMetric m) { return m == DistanceMetric::cosine ? "cosine" : "euclidean"; }

double centroid_distance(std::span<const double> point, std::span<const double> center,
                         DistanceMetric metric) {
    if (metric == DistanceMetric::euclidean) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < point.size(); ++k) {
            const double diff = point[k] - center[k];
            d2 += diff * diff;
        }
        return std::sqrt(d2);
    }
    double dot = 0.0, np = 0.0, nc = 0.0;
    for (std::size_t k = 0; k < point.size(); ++k) {
        dot += point[k] * center[k];
        np += point[k] * point[k];
        nc += center[k] * center[k];
    }
    if (np == 0.0 || nc == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(np) * std::sqrt(nc));
}

int nearest_centroid(std::span<const double> point, const CentroidSet& c) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.centers.rows(); ++k) {
        if (c.empty[k]) continue;
        const double d = centroid_distance(point, c.centers.row(k), c.metric);
        if (best < 0 || d < best_d) {
            best = static_cast<int>(k);
            best_d = d;
        }
    }
    return best;
}

namespace {

Tensor to_metric_space(const Tensor& features, DistanceMetric metric) {
    if (metric == DistanceMetric::euclidean) return features;
    const std::size_t n = features.rows(), d = features.cols();
    Tensor out({n, d + 1});
    for (std::size_t i = 0; i < n; ++i) {
        double norm = 1.0;
        for (std::size_t k = 0; k < d; ++k) norm += features(i, k) * features(i, k);
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < d; ++k) out(i, k) = features(i, k) / norm;
        out(i, d) = 1.0 / norm;
    }
    return out;
}

// Centroid c = sum_i w[i][c] * x_i / sum_i w[i][c]; classes with zero total
// weight are flagged empty.
CentroidSet weighted_centroids(const Tensor& points, const Tensor& weights, DistanceMetric metric) {
    const std::size_t n = points.rows(), d = points.cols(), C = weights.cols();
    CentroidSet cs{Tensor({C, d}, 0.0), std::vector<bool>(C, false), metric};
    std::vector<double> mass(C, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < C; ++c) {
            const double w = weights(i, c);
            if (w == 0.0) continue;
            mass[c] += w;
            for (std::size_t k = 0; k < d; ++k) cs.centers(c, k) += w * points(i, k);
        }
    for (std::size_t c = 0; c < C; ++c) {
        if (mass[c] <= 0.0) {
            cs.empty[c] = true;
            continue;
        }
        for (std::size_t k = 0; k < d; ++k) cs.centers(c, k) /= mass[c];
    }
    return cs;
}

std::vector<int> assign(const Tensor& points, const CentroidSet& cs) {
    std::vector<int> out(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) out[i] = nearest_centroid(points.row(i), cs);
    return out;
}

}  // namespace

PseudoLabelSet kmeans_pseudo_labels(const Tensor& features, const Tensor& probs,
                                    DistanceMetric metric, KMeansTrace* trace) {
    require_matrix(features, 0, "kmeans features");
    require_matrix(probs, 0, "kmeans probabilities");
    if (features.rows() != probs.rows())
        throw DimensionError("kmeans: features and probabilities disagree on sample count");
    require_finite(features, "kmeans features");
    const std::size_t C = probs.cols();

    Tensor points = to_metric_space(features, metric);
    CentroidSet step1_centers = weighted_centroids(points, probs, metric);
    bool any = false;
    for (bool e : step1_centers.empty) any = any || !e;
    if (!any) throw DegenerateError("kmeans: every class has zero probability mass");
    std::vector<int> step1 = assign(points, step1_centers);

    Tensor onehot({points.rows(), C}, 0.0);
    for (std::size_t i = 0; i < step1.size(); ++i) onehot(i, step1[i]) = 1.0;
    CentroidSet step2_centers = weighted_centroids(points, onehot, metric);
    std::vector<int> step2 = assign(points, step2_centers);

    PseudoLabelSet out{step2, LabelSource::kmeans, 0};
    if (trace) {
        trace->weighted = std::move(step1_centers);
        trace->step1 = std::move(step1);
        trace->refined = std::move(step2_centers);
        trace->step2 = std::move(step2);
        trace->points = std::move(points);
    }
    return out;
}

PseudoLabelSet model_pseudo_labels(const Model& model, const Tensor& x, LabelSource source) {
    return PseudoLabelSet{argmax_rows(predict_logits(model, x)), source, 0};
}

double pseudo_label_accuracy(const PseudoLabelSet& pseudo, std::span<const int> truth) {
    if (pseudo.labels.size() != truth.size())
        throw DimensionError("pseudo-label accuracy: " + std::to_string(pseudo.labels.size()) +
                             " labels vs " + std::to_string(truth.size()) + " truths");
    if (truth.empty()) throw DomainError("pseudo-label accuracy of an empty set");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += pseudo.labels[i] == truth[i];
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace rsfda
