#include "rsfda/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "rsfda/errors.hpp"

namespace rsfda {

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {
std::size_t volume(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
    std::size_t n = 1;
    for (auto d : shape) {
        if (d == 0) throw DimensionError("tensor axes must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    data_.assign(volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (volume(shape_) != data_.size())
        throw DimensionError("shape " + shape_str(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const noexcept {
    return shape_.size() >= 2 ? shape_[0] : (shape_.empty() ? 0 : 1);
}

std::size_t Tensor::cols() const noexcept {
    if (shape_.empty()) return 0;
    return shape_.size() >= 2 ? data_.size() / shape_[0] : shape_[0];
}

double Tensor::item() const {
    if (data_.size() != 1)
        throw DimensionError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::gather_rows(std::span<const std::size_t> idx) const {
    const std::size_t c = cols();
    std::vector<double> out;
    out.reserve(idx.size() * c);
    for (auto r : idx) {
        if (r >= rows())
            throw DimensionError("row index " + std::to_string(r) + " out of range for " +
                                 shape_str(shape_));
        auto src = row(r);
        out.insert(out.end(), src.begin(), src.end());
    }
    if (idx.empty()) return {};
    return Tensor({idx.size(), c}, std::move(out));
}

void require_matrix(const Tensor& t, std::size_t cols, const char* what) {
    if (t.rank() != 2)
        throw DimensionError(std::string(what) + ": expected a matrix, got " + shape_str(t.shape()));
    if (cols != 0 && t.cols() != cols)
        throw DimensionError(std::string(what) + ": expected " + std::to_string(cols) +
                             " columns, got " + shape_str(t.shape()));
}

void require_finite(const Tensor& t, const char* what) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i]))
            throw NumericError(std::string(what) + ": non-finite value at flat index " +
                               std::to_string(i));
    }
}

std::uint64_t hash_bytes(std::span<const double> values, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (double v : values) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace rsfda
