#include "winsorcam/microcnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "winsorcam/kernels.hpp"
#include "winsorcam/rng.hpp"

namespace winsorcam {

namespace {

kernels::Dims3 dims_of(const Tensor& t) { return {t.dim(0), t.dim(1), t.dim(2)}; }

struct Pooled {
    Tensor out;
    std::vector<std::size_t> argmax;
};

Pooled maxpool2x2(const Tensor& a) {
    const std::size_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
    const std::size_t oh = H / 2, ow = W / 2;
    Pooled p{Tensor({C, oh, ow}), std::vector<std::size_t>(C * oh * ow)};
    for (std::size_t k = 0; k < C; ++k) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                std::size_t best = (k * H + 2 * y) * W + 2 * x;
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = (k * H + 2 * y + dy) * W + 2 * x + dx;
                        if (a[idx] > a[best]) best = idx;
                    }
                }
                const std::size_t o = (k * oh + y) * ow + x;
                p.out[o] = a[best];
                p.argmax[o] = best;
            }
        }
    }
    return p;
}

Tensor relu(const Tensor& z) {
    Tensor a = z;
    for (double& v : a.values()) v = v > 0.0 ? v : 0.0;
    return a;
}

Tensor conv_forward(const ConvLayer& layer, const Tensor& x) {
    Tensor z({layer.out_channels, x.dim(1), x.dim(2)});
    kernels::conv3x3_forward(x.values(), dims_of(x), layer.weight.values(), layer.bias, layer.out_channels,
                             z.values());
    return z;
}

}  // namespace

MicroCnn::MicroCnn(InputSpec input, std::vector<ConvLayer> convs, DenseLayer dense)
    : input_(input), convs_(std::move(convs)), dense_(std::move(dense)) {
    if (input_.channels == 0 || input_.height == 0 || input_.width == 0) {
        throw std::invalid_argument("MicroCnn: input extents must be positive");
    }
    if (convs_.size() < 2) throw std::invalid_argument("MicroCnn: at least 2 conv layers are required");
    std::size_t ch = input_.channels, h = input_.height, w = input_.width;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        const auto& c = convs_[i];
        const std::string where = "MicroCnn: conv layer " + std::to_string(i) + " ";
        if (c.in_channels != ch) throw std::invalid_argument(where + "expects " + std::to_string(c.in_channels) +
                                                             " input channels, previous layer gives " + std::to_string(ch));
        if (c.out_channels == 0) throw std::invalid_argument(where + "has no output channels");
        if (c.weight.shape() != Shape{c.out_channels, c.in_channels, 3, 3})
            throw std::invalid_argument(where + "weight shape " + shape_to_string(c.weight.shape()));
        if (c.bias.size() != c.out_channels) throw std::invalid_argument(where + "bias length mismatch");
        ch = c.out_channels;
        if (c.pool_after) {
            if (h < 2 || w < 2) throw std::invalid_argument(where + "cannot pool a map smaller than 2x2");
            h /= 2;
            w /= 2;
        }
    }
    if (dense_.in_features != ch) throw std::invalid_argument("MicroCnn: dense input width does not match last conv");
    if (dense_.num_classes == 0) throw std::invalid_argument("MicroCnn: dense layer has no classes");
    if (dense_.weight.shape() != Shape{dense_.num_classes, dense_.in_features})
        throw std::invalid_argument("MicroCnn: dense weight shape " + shape_to_string(dense_.weight.shape()));
    if (dense_.bias.size() != dense_.num_classes) throw std::invalid_argument("MicroCnn: dense bias length mismatch");
}

MicroCnn MicroCnn::random(const Architecture& arch, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<ConvLayer> convs;
    std::size_t ch = arch.input.channels;
    for (std::size_t i = 0; i < arch.convs.size(); ++i) {
        ConvLayer layer;
        layer.name = "conv" + std::to_string(i + 1);
        layer.in_channels = ch;
        layer.out_channels = arch.convs[i].out_channels;
        layer.pool_after = arch.convs[i].pool_after;
        layer.weight = Tensor({layer.out_channels, ch, 3, 3});
        const double bound = 1.0 / std::sqrt(static_cast<double>(ch * 9));
        for (double& v : layer.weight.values()) v = rng.uniform(-bound, bound);
        layer.bias.assign(layer.out_channels, 0.0);
        ch = layer.out_channels;
        convs.push_back(std::move(layer));
    }
    DenseLayer dense;
    dense.in_features = ch;
    dense.num_classes = arch.num_classes;
    dense.weight = Tensor({arch.num_classes, ch});
    const double bound = 1.0 / std::sqrt(static_cast<double>(ch));
    for (double& v : dense.weight.values()) v = rng.uniform(-bound, bound);
    dense.bias.assign(arch.num_classes, 0.0);
    return MicroCnn(arch.input, std::move(convs), std::move(dense));
}

std::pair<std::size_t, std::size_t> MicroCnn::layer_extent(std::size_t i) const {
    std::size_t h = input_.height, w = input_.width;
    for (std::size_t j = 0; j < i; ++j) {
        if (convs_.at(j).pool_after) {
            h /= 2;
            w /= 2;
        }
    }
    return {h, w};
}

Tensor MicroCnn::run_tail(std::size_t layer, const Tensor& activation, ForwardTrace* trace) const {
    Tensor a = activation;
    for (std::size_t i = layer;; ++i) {
        Tensor block_out;
        if (convs_[i].pool_after) {
            auto pooled = maxpool2x2(a);
            block_out = std::move(pooled.out);
            if (trace) trace->pool_argmax.push_back(std::move(pooled.argmax));
        } else {
            block_out = a;
            if (trace) trace->pool_argmax.emplace_back();
        }
        if (trace) trace->block_outputs.push_back(block_out);
        if (i + 1 == convs_.size()) {
            a = std::move(block_out);
            break;
        }
        Tensor z = conv_forward(convs_[i + 1], block_out);
        a = relu(z);
        if (trace) {
            trace->pre_activations.push_back(std::move(z));
            trace->activations.push_back(a);
        }
    }

    const std::size_t C = a.dim(0);
    std::vector<double> features(C);
    kernels::plane_means(a.values(), C, a.dim(1) * a.dim(2), features);
    Tensor logits({dense_.num_classes});
    for (std::size_t c = 0; c < dense_.num_classes; ++c) {
        double acc = dense_.bias[c];
        for (std::size_t k = 0; k < C; ++k) acc += dense_.weight.at(c, k) * features[k];
        logits[c] = acc;
    }
    if (trace) trace->features = std::move(features);
    return logits;
}

ForwardTrace MicroCnn::forward(const Tensor& image) const {
    if (image.shape() != Shape{input_.channels, input_.height, input_.width}) {
        throw std::invalid_argument("forward: image shape " + shape_to_string(image.shape()) + " does not match model input " +
                                    shape_to_string({input_.channels, input_.height, input_.width}));
    }
    ForwardTrace trace;
    Tensor z = conv_forward(convs_[0], image);
    Tensor a = relu(z);
    trace.pre_activations.push_back(std::move(z));
    trace.activations.push_back(a);
    trace.logits = run_tail(0, a, &trace);
    return trace;
}

Tensor MicroCnn::logits_from_activation(std::size_t layer, const Tensor& activation) const {
    if (layer >= convs_.size()) throw std::invalid_argument("logits_from_activation: layer index out of range");
    const auto [h, w] = layer_extent(layer);
    if (activation.shape() != Shape{convs_[layer].out_channels, h, w}) {
        throw std::invalid_argument("logits_from_activation: activation shape " + shape_to_string(activation.shape()));
    }
    return run_tail(layer, activation, nullptr);
}

LayerGradients MicroCnn::backward(const ForwardTrace& trace, std::size_t class_index) const {
    if (class_index >= dense_.num_classes) {
        throw std::invalid_argument("backward: class index " + std::to_string(class_index) + " out of range [0, " +
                                    std::to_string(dense_.num_classes) + ")");
    }
    const std::size_t n = convs_.size();
    if (trace.activations.size() != n || trace.pre_activations.size() != n || trace.pool_argmax.size() != n ||
        trace.block_outputs.size() != n) {
        throw std::invalid_argument("backward: trace does not belong to this model");
    }

    LayerGradients grads;
    grads.activations.resize(n);
    grads.pre_activations.resize(n);

    // d y^c / d(last block output) = W[c, k] / (h * w) at every position.
    const Tensor& last = trace.block_outputs.back();
    Tensor g_block(last.shape());
    const std::size_t plane = last.dim(1) * last.dim(2);
    for (std::size_t k = 0; k < last.dim(0); ++k) {
        const double g = dense_.weight.at(class_index, k) / static_cast<double>(plane);
        for (double& v : g_block.channel(k)) v = g;
    }

    for (std::size_t i = n; i-- > 0;) {
        const Tensor& a = trace.activations[i];
        Tensor g_act(a.shape());
        if (convs_[i].pool_after) {
            const auto& idx = trace.pool_argmax[i];
            for (std::size_t o = 0; o < idx.size(); ++o) g_act[idx[o]] += g_block[o];
        } else {
            g_act = g_block;
        }

        Tensor g_pre = g_act;
        const Tensor& z = trace.pre_activations[i];
        for (std::size_t j = 0; j < g_pre.size(); ++j) {
            if (!(z[j] > 0.0)) g_pre[j] = 0.0;
        }

        if (i > 0) {
            const Tensor& x = trace.block_outputs[i - 1];
            Tensor g_in(x.shape());
            kernels::conv3x3_backward_input(g_pre.values(), convs_[i].out_channels, convs_[i].weight.values(),
                                            dims_of(x), g_in.values());
            g_block = std::move(g_in);
        }
        grads.activations[i] = std::move(g_act);
        grads.pre_activations[i] = std::move(g_pre);
    }
    return grads;
}

std::vector<Tensor> backward_to_activations(const MicroCnn& model, const ForwardTrace& trace,
                                            std::size_t class_index) {
    return model.backward(trace, class_index).activations;
}

std::size_t argmax(const Tensor& logits) {
    if (logits.empty()) throw std::invalid_argument("argmax: empty tensor");
    auto values = logits.values();
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

SyntheticFixture make_synthetic_fixture(std::uint64_t seed) {
    constexpr std::size_t kSize = 16;
    constexpr std::size_t kSide = 6;
    constexpr std::size_t kClasses = 3;
    SplitMix64 rng(seed ^ 0x57494e534f52ULL);

    // Odd offsets keep the square off the 2x2 pooling grid.
    const std::size_t row0 = 3 + 2 * rng.below(3);
    const std::size_t col0 = 3 + 2 * rng.below(3);

    Tensor image({1, kSize, kSize});
    Tensor mask({kSize, kSize});
    for (std::size_t y = 0; y < kSize; ++y) {
        for (std::size_t x = 0; x < kSize; ++x) {
            const bool inside = y >= row0 && y < row0 + kSide && x >= col0 && x < col0 + kSide;
            image.at(0, y, x) = inside ? rng.uniform(0.8, 1.0) : rng.uniform(0.0, 0.15);
            mask.at(y, x) = inside ? 1.0 : 0.0;
        }
    }

    auto make_conv = [&](std::string name, std::size_t in, std::size_t out, bool pool) {
        ConvLayer layer{std::move(name), in, out, pool, Tensor({out, in, 3, 3}), std::vector<double>(out, 0.0)};
        const double bound = 1.0 / std::sqrt(static_cast<double>(in * 9));
        // Channel 0 is the structured "brightness" path; the rest are seeded noise.
        for (std::size_t o = 1; o < out; ++o)
            for (std::size_t c = 0; c < in; ++c)
                for (std::size_t k = 0; k < 9; ++k) layer.weight[(o * in + c) * 9 + k] = rng.uniform(-bound, bound);
        return layer;
    };

    constexpr std::size_t kWidth = 4;
    ConvLayer conv1 = make_conv("conv1", 1, kWidth, false);
    conv1.weight[4] = 1.0;           // centre tap of channel 0
    conv1.bias[0] = -0.2;            // suppresses the background

    ConvLayer conv2 = make_conv("conv2", kWidth, kWidth, true);
    conv2.weight[4] = 1.0;  // channel 0 copies input channel 0

    ConvLayer conv3 = make_conv("conv3", kWidth, kWidth, false);
    for (std::size_t k = 0; k < 9; ++k) conv3.weight[k] = 1.0 / 9.0;  // channel 0 blurs input channel 0

    DenseLayer dense{kWidth, kClasses, Tensor({kClasses, kWidth}), std::vector<double>(kClasses, 0.0)};
    // Noise channels share one weight across all class rows.
    for (std::size_t k = 1; k < kWidth; ++k) {
        const double w = rng.uniform(-0.1, 0.1);
        for (std::size_t c = 0; c < kClasses; ++c) dense.weight.at(c, k) = w;
    }
    dense.weight.at(0, 0) = 1.0;
    for (std::size_t c = 1; c < kClasses; ++c) dense.weight.at(c, 0) = -0.5;

    MicroCnn model({1, kSize, kSize}, {std::move(conv1), std::move(conv2), std::move(conv3)}, std::move(dense));
    return SyntheticFixture{std::move(model), std::move(image), std::move(mask), 0};
}

}  // namespace winsorcam
