#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "winsorcam/tensor.hpp"

namespace winsorcam {

struct InputSpec {
    std::size_t channels = 1;
    std::size_t height = 8;
    std::size_t width = 8;
    friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

// Conv2d 3x3 / stride 1 / pad 1, then ReLU, then an optional 2x2 max-pool (floor mode).
struct ConvLayer {
    std::string name;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    bool pool_after = false;
    Tensor weight;  // out x in x 3 x 3
    std::vector<double> bias;
    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

// Applied to the global-average-pooled features of the last conv block.
struct DenseLayer {
    std::size_t in_features = 0;
    std::size_t num_classes = 0;
    Tensor weight;  // classes x in
    std::vector<double> bias;
    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ConvSpec {
    std::size_t out_channels = 4;
    bool pool_after = false;
};

struct Architecture {
    InputSpec input;
    std::vector<ConvSpec> convs;
    std::size_t num_classes = 2;
};

struct ForwardTrace {
    std::vector<Tensor> activations;      // post-ReLU conv outputs A^i, C_i x H_i x W_i
    std::vector<Tensor> pre_activations;  // conv outputs before ReLU
    std::vector<Tensor> block_outputs;    // after the optional pool; input of the next block
    std::vector<std::vector<std::size_t>> pool_argmax;  // flat index into activations[i] per pooled cell
    std::vector<double> features;         // global average pool of the last block output
    Tensor logits;                        // num_classes
};

struct LayerGradients {
    std::vector<Tensor> activations;      // dy^c / dA^i
    std::vector<Tensor> pre_activations;  // dy^c / dz^i
};

class MicroCnn {
public:
    MicroCnn(InputSpec input, std::vector<ConvLayer> convs, DenseLayer dense);

    // Uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)] drawn from SplitMix64(seed); biases zero.
    static MicroCnn random(const Architecture& arch, std::uint64_t seed);

    const InputSpec& input() const noexcept { return input_; }
    const std::vector<ConvLayer>& convs() const noexcept { return convs_; }
    const DenseLayer& dense() const noexcept { return dense_; }
    std::size_t conv_count() const noexcept { return convs_.size(); }
    std::size_t num_classes() const noexcept { return dense_.num_classes; }

    // Spatial extent of conv layer i's output.
    std::pair<std::size_t, std::size_t> layer_extent(std::size_t i) const;

    ForwardTrace forward(const Tensor& image) const;

    // Re-runs the network from conv layer `layer`'s post-ReLU activation onward.
    Tensor logits_from_activation(std::size_t layer, const Tensor& activation) const;

    LayerGradients backward(const ForwardTrace& trace, std::size_t class_index) const;

    friend bool operator==(const MicroCnn&, const MicroCnn&) = default;

private:
    Tensor run_tail(std::size_t layer, const Tensor& activation, ForwardTrace* trace) const;

    InputSpec input_;
    std::vector<ConvLayer> convs_;
    DenseLayer dense_;
};

inline ForwardTrace forward(const MicroCnn& model, const Tensor& image) { return model.forward(image); }

// Gradient of logit y^c (not a softmax probability) w.r.t. every retained activation A^i.
std::vector<Tensor> backward_to_activations(const MicroCnn& model, const ForwardTrace& trace,
                                            std::size_t class_index);

std::size_t argmax(const Tensor& logits);

// Deterministic desk-scale test case: a bright square (the class evidence) on a
// dim noisy background, a 3-block model whose target class responds to it, and
// the square as ground-truth mask.
struct SyntheticFixture {
    MicroCnn model;
    Tensor image;  // 1 x 16 x 16, values in [0, 1]
    Tensor mask;   // 16 x 16, values in {0, 1}
    std::size_t target_class = 0;
};

SyntheticFixture make_synthetic_fixture(std::uint64_t seed);

}  // namespace winsorcam
