#include "rsfda/autodiff.hpp"

#include <cmath>
#include <string>

#include "rsfda/errors.hpp"

namespace rsfda {

Var Tape::leaf(Tensor value, bool requires_grad) {
    if (value.empty()) throw DimensionError("tape leaf requires a non-empty tensor");
    require_finite(value, "tape leaf");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    has_gradients_ = false;
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
    require_finite(value, "tape operation");
    Node n;
    n.value = std::move(value);
    n.inputs.reserve(inputs.size());
    for (const Var& in : inputs) {
        node(in);
        n.inputs.push_back(in.id);
        n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    has_gradients_ = false;
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
    if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw StateError("variable was not recorded on this tape");
    return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

void Tape::backward(Var root) {
    const Node& r = node(root);
    if (r.value.size() != 1)
        throw DimensionError("backward root must be a scalar, got " + shape_str(r.value.shape()));
    for (auto& n : nodes_) n.grad = Tensor{};
    has_gradients_ = true;
    if (!r.requires_grad) {
        for (auto& n : nodes_)
            if (n.requires_grad) n.grad = Tensor(n.value.shape(), 0.0);
        return;
    }

    nodes_[root.id].grad = Tensor(r.value.shape(), 1.0);
    std::vector<const Tensor*> in_values;
    std::vector<Tensor*> in_grads;
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
        in_values.clear();
        in_grads.clear();
        for (int in : n.inputs) {
            Node& src = nodes_[in];
            in_values.push_back(&src.value);
            if (src.requires_grad) {
                if (src.grad.empty()) src.grad = Tensor(src.value.shape(), 0.0);
                in_grads.push_back(&src.grad);
            } else {
                in_grads.push_back(nullptr);
            }
        }
        n.backward(BackwardContext{in_values, n.value, n.grad, in_grads});
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
        if (!n.grad.empty() && !n.grad.all_finite())
            throw NumericError("non-finite gradient at tape node " + std::to_string(i));
    }
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = node(v);
    if (!has_gradients_) throw StateError("grad() requested before backward()");
    if (!n.requires_grad) throw StateError("gradient requested for a variable that does not require it");
    return n.grad;
}

namespace ops {

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(what) + ": shape " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
}
}  // namespace

Var matmul(Tape& t, Var a, Var b) {
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    require_matrix(A, 0, "matmul lhs");
    require_matrix(B, 0, "matmul rhs");
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    if (B.rows() != k)
        throw DimensionError("matmul: " + shape_str(A.shape()) + " * " + shape_str(B.shape()));
    Tensor out({n, m}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* o = &out(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A(i, p);
            const double* brow = B.row(p).data();
            for (std::size_t j = 0; j < m; ++j) o[j] += aip * brow[j];
        }
    }
    return t.record(std::move(out), {a, b}, [n, k, m](const BackwardContext& c) {
        const Tensor& A = *c.inputs[0];
        const Tensor& B = *c.inputs[1];
        const Tensor& G = c.grad_output;
        if (Tensor* gA = c.input_grads[0]) {
            for (std::size_t i = 0; i < n; ++i) {
                const double* grow = G.row(i).data();
                for (std::size_t p = 0; p < k; ++p) {
                    const double* brow = B.row(p).data();
                    double acc = 0.0;
                    for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
                    (*gA)(i, p) += acc;
                }
            }
        }
        if (Tensor* gB = c.input_grads[1]) {
            for (std::size_t i = 0; i < n; ++i) {
                const double* grow = G.row(i).data();
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = A(i, p);
                    double* gb = &(*gB)(p, 0);
                    for (std::size_t j = 0; j < m; ++j) gb[j] += aip * grow[j];
                }
            }
        }
    });
}

Var add_bias(Tape& t, Var a, Var bias) {
    const Tensor& A = t.value(a);
    const Tensor& b = t.value(bias);
    require_matrix(A, 0, "add_bias input");
    if (b.rank() != 1 || b.size() != A.cols())
        throw DimensionError("add_bias: bias " + shape_str(b.shape()) + " for input " +
                             shape_str(A.shape()));
    Tensor out = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) += b[j];
    return t.record(std::move(out), {a, bias}, [](const BackwardContext& c) {
        const Tensor& G = c.grad_output;
        if (Tensor* gA = c.input_grads[0])
            for (std::size_t i = 0; i < G.size(); ++i) (*gA)[i] += G[i];
        if (Tensor* gb = c.input_grads[1])
            for (std::size_t i = 0; i < G.rows(); ++i)
                for (std::size_t j = 0; j < G.cols(); ++j) (*gb)[j] += G(i, j);
    });
}

Var add(Tape& t, Var a, Var b) {
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    require_same_shape(A, B, "add");
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
    return t.record(std::move(out), {a, b}, [](const BackwardContext& c) {
        for (Tensor* g : c.input_grads)
            if (g)
                for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += c.grad_output[i];
    });
}

Var scale(Tape& t, Var a, double s) {
    Tensor out = t.value(a);
    for (double& v : out.data()) v *= s;
    return t.record(std::move(out), {a}, [s](const BackwardContext& c) {
        if (Tensor* g = c.input_grads[0])
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += s * c.grad_output[i];
    });
}

Var tanh(Tape& t, Var a) {
    Tensor out = t.value(a);
    for (double& v : out.data()) v = std::tanh(v);
    return t.record(std::move(out), {a}, [](const BackwardContext& c) {
        if (Tensor* g = c.input_grads[0])
            for (std::size_t i = 0; i < g->size(); ++i) {
                const double y = c.output[i];
                (*g)[i] += (1.0 - y * y) * c.grad_output[i];
            }
    });
}

Var relu(Tape& t, Var a) {
    Tensor out = t.value(a);
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return t.record(std::move(out), {a}, [](const BackwardContext& c) {
        if (Tensor* g = c.input_grads[0])
            for (std::size_t i = 0; i < g->size(); ++i)
                if ((*c.inputs[0])[i] > 0.0) (*g)[i] += c.grad_output[i];
    });
}

Var sum(Tape& t, Var a) {
    double s = 0.0;
    for (double v : t.value(a).data()) s += v;
    return t.record(Tensor::scalar(s), {a}, [](const BackwardContext& c) {
        if (Tensor* g = c.input_grads[0])
            for (double& v : g->data()) v += c.grad_output[0];
    });
}

Var half_sq_norm(Tape& t, Var a) {
    double s = 0.0;
    for (double v : t.value(a).data()) s += v * v;
    return t.record(Tensor::scalar(0.5 * s), {a}, [](const BackwardContext& c) {
        if (Tensor* g = c.input_grads[0])
            for (std::size_t i = 0; i < g->size(); ++i)
                (*g)[i] += (*c.inputs[0])[i] * c.grad_output[0];
    });
}

Var weighted_sum(Tape& t, std::span<const Var> scalars, std::span<const double> weights) {
    if (scalars.size() != weights.size() || scalars.empty())
        throw DimensionError("weighted_sum: term/weight count mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < scalars.size(); ++i) s += weights[i] * t.value(scalars[i]).item();
    std::vector<double> w(weights.begin(), weights.end());
    return t.record(Tensor::scalar(s), {scalars.begin(), scalars.end()},
                    [w = std::move(w)](const BackwardContext& c) {
                        for (std::size_t i = 0; i < w.size(); ++i)
                            if (Tensor* g = c.input_grads[i]) (*g)[0] += w[i] * c.grad_output[0];
                    });
}

}  // namespace ops
}  // namespace rsfda
