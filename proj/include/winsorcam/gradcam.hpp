#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "winsorcam/microcnn.hpp"
#include "winsorcam/tensor.hpp"

namespace winsorcam {

// Hooked activation A^i and its class-logit gradient G^c_i for one conv layer.
struct LayerCapture {
    std::string name;
    Tensor activation;  // C x H x W
    Tensor gradient;    // C x H x W
};

struct LayerGradCam {
    std::size_t layer_index = 0;
    std::vector<double> alpha;  // spatial mean of each gradient channel
    Tensor map;                 // ReLU(sum_k alpha_k A_k), H x W
};

// Grad-CAM of one layer. Throws std::invalid_argument when the shapes differ.
LayerGradCam layer_gradcam(const Tensor& activations, const Tensor& gradients, std::size_t layer_index = 0);

// One Grad-CAM per layer, shallow to deep. Layers whose gradients vanish are
// kept with a zero map.
std::vector<LayerGradCam> all_layer_gradcams(std::span<const LayerCapture> layers);
std::vector<LayerGradCam> all_layer_gradcams(const MicroCnn& model, const ForwardTrace& trace,
                                             std::size_t class_index);

std::vector<LayerCapture> capture_layers(const MicroCnn& model, const ForwardTrace& trace, std::size_t class_index);

}  // namespace winsorcam
