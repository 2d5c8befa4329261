#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rsfda/tensor.hpp"

namespace rsfda {

class Tape;

// Handle to a node recorded on a Tape. A default-constructed Var refers to
// nothing and is rejected by every tape operation.
struct Var {
    const Tape* tape = nullptr;
    int id = -1;
    bool valid() const noexcept { return tape != nullptr && id >= 0; }
};

// What a node's backward rule sees: its inputs' values, its own value and
// incoming gradient, and accumulators for the inputs that need gradients
// (null where an input does not).
struct BackwardContext {
    std::span<const Tensor* const> inputs;
    const Tensor& output;
    const Tensor& grad_output;
    std::span<Tensor* const> input_grads;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

// Reverse-mode tape. Nodes are appended in evaluation order, so a single
// reverse sweep from the root visits every node after all its consumers.
class Tape {
public:
    Var leaf(Tensor value, bool requires_grad = false);
    Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

    const Tensor& value(Var v) const;
    bool requires_grad(Var v) const;

    // Seeds d(root)/d(root) = 1 and propagates. Root must be a scalar.
    void backward(Var root);

    // Gradient of the last backward() root with respect to `v`. Leaves that
    // did not influence the root get a zero tensor.
    const Tensor& grad(Var v) const;

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::vector<int> inputs;
        BackwardFn backward;
    };

    const Node& node(Var v) const;

    std::vector<Node> nodes_;
    bool has_gradients_ = false;
};

namespace ops {

Var matmul(Tape& t, Var a, Var b);           // [n x k] * [k x m]
Var add_bias(Tape& t, Var a, Var bias);      // [n x m] + [m] broadcast over rows
Var add(Tape& t, Var a, Var b);              // same shapes
Var scale(Tape& t, Var a, double s);
Var tanh(Tape& t, Var a);
Var relu(Tape& t, Var a);
Var sum(Tape& t, Var a);                     // -> scalar
Var half_sq_norm(Tape& t, Var a);            // 0.5 * sum(a^2) -> scalar

// Scalar linear combination: sum_i w_i * s_i.
Var weighted_sum(Tape& t, std::span<const Var> scalars, std::span<const double> weights);

}  // namespace ops

}  // namespace rsfda
