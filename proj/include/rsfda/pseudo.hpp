#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rsfda/model.hpp"
#include "rsfda/tensor.hpp"

namespace rsfda {

enum class LabelSource { kmeans, standard_model, robust_model };

std::string to_string(LabelSource s);

struct PseudoLabelSet {
    std::vector<int> labels;
    LabelSource source = LabelSource::kmeans;
    int epoch_stamp = 0;

    std::size_t size() const noexcept { return labels.size(); }

    // Labels for the given sample indices; CoverageError if any index is
    // not covered by this set.
    std::vector<int> gather(std::span<const std::size_t> idx) const;
};

enum class DistanceMetric { cosine, euclidean };

DistanceMetric metric_from_string(const std::string& s);
std::string to_string(DistanceMetric m);

struct CentroidSet {
    Tensor centers;                 // [C x d'] in the metric's working space
    std::vector<bool> empty;        // excluded from assignment when true
    DistanceMetric metric = DistanceMetric::cosine;
};

// Everything the two-step clustering computed, for diagnostics and tests.
struct KMeansTrace {
    CentroidSet weighted;           // step 1: probability-weighted centroids
    std::vector<int> step1;
    CentroidSet refined;            // step 2: mean of step-1 assignees
    std::vector<int> step2;
    Tensor points;                  // features mapped into the metric space
};

// Two-step weighted k-means over encoder features. Cosine mode appends a
// constant 1 to every feature and L2-normalizes before clustering.
PseudoLabelSet kmeans_pseudo_labels(const Tensor& features, const Tensor& probs,
                                    DistanceMetric metric = DistanceMetric::cosine,
                                    KMeansTrace* trace = nullptr);

// Distance from one point to one center under `metric`, in working space.
double centroid_distance(std::span<const double> point, std::span<const double> center,
                         DistanceMetric metric);

// Nearest non-empty center; ties resolve to the lowest class index.
int nearest_centroid(std::span<const double> point, const CentroidSet& c);

// Argmax labels from a model's logits (lowest index on exact ties).
PseudoLabelSet model_pseudo_labels(const Model& model, const Tensor& x,
                                   LabelSource source = LabelSource::standard_model);

double pseudo_label_accuracy(const PseudoLabelSet& pseudo, std::span<const int> truth);

}  // namespace rsfda
