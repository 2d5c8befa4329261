#include "rsfda/softmax.hpp"

#include <cmath>

#include "rsfda/errors.hpp"

namespace rsfda {

Tensor log_softmax(const Tensor& logits) {
    require_matrix(logits, 0, "log_softmax");
    require_finite(logits, "log_softmax");
    Tensor out = logits;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        double mx = r[0];
        for (double v : r) mx = std::max(mx, v);
        double s = 0.0;
        for (double v : r) s += std::exp(v - mx);
        const double lse = mx + std::log(s);
        for (double& v : r) v -= lse;
    }
    return out;
}

Tensor softmax(const Tensor& logits) {
    require_matrix(logits, 0, "softmax");
    require_finite(logits, "softmax");
    Tensor out = logits;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        double mx = r[0];
        for (double v : r) mx = std::max(mx, v);
        double s = 0.0;
        for (double& v : r) {
            v = std::exp(v - mx);
            s += v;
        }
        for (double& v : r) v /= s;
    }
    return out;
}

std::vector<int> argmax_rows(const Tensor& t) {
    require_matrix(t, 0, "argmax");
    std::vector<int> out(t.rows(), 0);
    for (std::size_t i = 0; i < t.rows(); ++i) {
        auto r = t.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < r.size(); ++j)
            if (r[j] > r[best]) best = j;
        out[i] = static_cast<int>(best);
    }
    return out;
}

}  // namespace rsfda
