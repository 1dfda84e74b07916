#include "winsorcam/gradcam.hpp"

#include <stdexcept>

#include "winsorcam/kernels.hpp"

namespace winsorcam {

LayerGradCam layer_gradcam(const Tensor& activations, const Tensor& gradients, std::size_t layer_index) {
    require_rank(activations, 3, "layer_gradcam activations");
    if (activations.shape() != gradients.shape()) {
        throw std::invalid_argument("layer_gradcam: activation shape " + shape_to_string(activations.shape()) +
                                    " differs from gradient shape " + shape_to_string(gradients.shape()));
    }
    const std::size_t C = activations.dim(0), H = activations.dim(1), W = activations.dim(2);
    LayerGradCam cam{layer_index, std::vector<double>(C), Tensor({H, W})};
    kernels::plane_means(gradients.values(), C, H * W, cam.alpha);
    kernels::weighted_plane_sum(activations.values(), cam.alpha, H * W, /*relu=*/true, cam.map.values());
    return cam;
}

std::vector<LayerGradCam> all_layer_gradcams(std::span<const LayerCapture> layers) {
    if (layers.empty()) throw std::invalid_argument("all_layer_gradcams: no layers");
    std::vector<LayerGradCam> cams;
    cams.reserve(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) cams.push_back(layer_gradcam(layers[i].activation, layers[i].gradient, i));
    return cams;
}

std::vector<LayerCapture> capture_layers(const MicroCnn& model, const ForwardTrace& trace, std::size_t class_index) {
    auto grads = backward_to_activations(model, trace, class_index);
    std::vector<LayerCapture> layers;
    layers.reserve(grads.size());
    for (std::size_t i = 0; i < grads.size(); ++i)
        layers.push_back({model.convs()[i].name, trace.activations[i], std::move(grads[i])});
    return layers;
}

std::vector<LayerGradCam> all_layer_gradcams(const MicroCnn& model, const ForwardTrace& trace,
                                             std::size_t class_index) {
    return all_layer_gradcams(capture_layers(model, trace, class_index));
}

}  // namespace winsorcam
