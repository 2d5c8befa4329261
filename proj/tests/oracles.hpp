#pragma once

#include <cmath>
#include <vector>

#include "rsfda/tensor.hpp"

namespace testing {

using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const rsfda::Tensor& t) {
    Rows r(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) r[i][j] = t(i, j);
    return r;
}

// Two-step weighted k-means written out directly: map to the metric space,
// probability-weighted centroids, nearest assignment, unweighted re-estimate,
// nearest assignment again.
inline std::vector<int> brute_force_kmeans(const rsfda::Tensor& features, const rsfda::Tensor& probs,
                                           bool cosine) {
    Rows pts = to_rows(features);
    if (cosine)
        for (auto& p : pts) {
            double n2 = 1.0;
            for (double v : p) n2 += v * v;
            const double n = std::sqrt(n2);
            for (double& v : p) v /= n;
            p.push_back(1.0 / n);
        }
    const Rows w = to_rows(probs);
    const std::size_t C = probs.cols(), d = pts.empty() ? 0 : pts[0].size();

    auto dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
        if (!cosine) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
            return std::sqrt(s);
        }
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            dot += a[k] * b[k];
            na += a[k] * a[k];
            nb += b[k] * b[k];
        }
        if (na == 0.0 || nb == 0.0) return 1.0;
        return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    };
    auto centers_of = [&](const Rows& weights, std::vector<bool>& empty) {
        Rows c(C, std::vector<double>(d, 0.0));
        std::vector<double> mass(C, 0.0);
        empty.assign(C, false);
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t k = 0; k < C; ++k) {
                if (weights[i][k] == 0.0) continue;
                mass[k] += weights[i][k];
                for (std::size_t j = 0; j < d; ++j) c[k][j] += weights[i][k] * pts[i][j];
            }
        for (std::size_t k = 0; k < C; ++k) {
            if (mass[k] <= 0.0) {
                empty[k] = true;
                continue;
            }
            for (double& v : c[k]) v /= mass[k];
        }
        return c;
    };
    auto nearest = [&](const Rows& centers, const std::vector<bool>& empty) {
        std::vector<int> out(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            int best = -1;
            double bd = 0.0;
            for (std::size_t k = 0; k < C; ++k) {
                if (empty[k]) continue;
                const double dd = dist(pts[i], centers[k]);
                if (best < 0 || dd < bd) {
                    best = static_cast<int>(k);
                    bd = dd;
                }
            }
            out[i] = best;
        }
        return out;
    };
    std::vector<bool> empty;
    const Rows c1 = centers_of(w, empty);
    const std::vector<int> a1 = nearest(c1, empty);
    Rows onehot(pts.size(), std::vector<double>(C, 0.0));
    for (std::size_t i = 0; i < pts.size(); ++i) onehot[i][a1[i]] = 1.0;
    const Rows c2 = centers_of(onehot, empty);
    return nearest(c2, empty);
}

}  // namespace testing
