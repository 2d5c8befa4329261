#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rsfda/autodiff.hpp"
#include "rsfda/rng.hpp"
#include "rsfda/tensor.hpp"

namespace rsfda {

enum class Activation { tanh, relu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct Linear {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]

    std::size_t in_dim() const { return weight.rows(); }
    std::size_t out_dim() const { return weight.cols(); }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias.
Linear init_linear(std::size_t in, std::size_t out, Rng& rng);

// widths = {input_dim, hidden..., feature_dim}. Hidden layers apply the
// activation; the last layer is a linear bottleneck producing features.
class Encoder {
public:
    Encoder() = default;
    Encoder(std::vector<std::size_t> widths, Activation act, Rng& rng);

    const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    Activation activation() const noexcept { return act_; }
    std::size_t input_dim() const { return widths_.front(); }
    std::size_t feature_dim() const { return widths_.back(); }

    std::vector<Linear>& layers() noexcept { return layers_; }
    const std::vector<Linear>& layers() const noexcept { return layers_; }

    static std::size_t parameter_count(const std::vector<std::size_t>& widths);

private:
    std::vector<std::size_t> widths_;
    Activation act_ = Activation::relu;
    std::vector<Linear> layers_;
};

class Classifier {
public:
    Classifier() = default;
    Classifier(std::size_t feature_dim, std::size_t classes, Rng& rng);

    Linear& layer() noexcept { return layer_; }
    const Linear& layer() const noexcept { return layer_; }
    std::size_t classes() const { return layer_.out_dim(); }

    bool frozen() const noexcept { return frozen_; }
    void set_frozen(bool f) noexcept { frozen_ = f; }

private:
    Linear layer_;
    bool frozen_ = false;
};

struct ModelSpec {
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t feature_dim = 16;
    Activation activation = Activation::relu;
};

struct Model {
    Encoder encoder;
    Classifier classifier;

    static Model create(std::size_t input_dim, std::size_t classes, const ModelSpec& spec, Rng& rng);

    std::size_t input_dim() const { return encoder.input_dim(); }
    std::size_t feature_dim() const { return encoder.feature_dim(); }
    std::size_t classes() const { return classifier.classes(); }

    // Flat parameter view, encoder layers first (weight, bias per layer)
    // followed by the classifier weight and bias.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    std::uint64_t parameter_hash() const;
    std::uint64_t classifier_hash() const;
};

// Which optimizer group a flat parameter index belongs to. The final encoder
// layer (bottleneck) and the classifier form the fast "head" group.
enum class ParamGroup { backbone, head };
std::vector<ParamGroup> parameter_groups(const Model& m);
std::vector<bool> parameter_frozen(const Model& m);

// Model parameters placed on a tape as leaves. A frozen classifier never
// requires gradients.
struct BoundModel {
    std::vector<Var> params;  // same order as Model::parameters()
    const Model* model = nullptr;
};

BoundModel bind(Tape& tape, const Model& m, bool params_require_grad);

struct ForwardVars {
    Var features;
    Var logits;
};

ForwardVars forward(Tape& tape, const BoundModel& bm, Var x);

struct ForwardResult {
    Tensor features;
    Tensor logits;
};

// Tape-free inference. Rows are processed independently.
ForwardResult forward(const Model& m, const Tensor& x);
Tensor predict_logits(const Model& m, const Tensor& x);

// Gradients of a scalar loss for every parameter (same order as
// Model::parameters()); parameters bound without gradients report zeros.
struct ParamGrads {
    std::vector<Tensor> grads;
};

ParamGrads collect_grads(const Tape& tape, const BoundModel& bm);

}  // namespace rsfda
