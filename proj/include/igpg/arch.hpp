#pragma once

// Architecture families at desk scale: MLP over flattened pixels and a small
// CNN with 2x2 average pooling between convolutions. A descriptor maps
// deterministically to a parameter layout and to a canonical text rendering.

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "igpg/layout.hpp"
#include "igpg/task.hpp"
#include "igpg/tensor.hpp"

namespace igpg {

enum class ArchFamily { mlp, tiny_cnn, resnet };

struct ArchitectureDescriptor {
    ArchFamily family = ArchFamily::mlp;
    std::vector<int> sizes;  // mlp: hidden widths; tiny_cnn: conv channels

    bool operator==(const ArchitectureDescriptor &o) const { return family == o.family && sizes == o.sizes; }
};

inline std::string render_int_list(const std::vector<int> &v) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << v[i];
    }
    os << "]";
    return os.str();
}

// canonical text form, e.g. "architecture: MLP, hidden: [32, 16]"
inline std::string arch_description(const ArchitectureDescriptor &arch) {
    switch (arch.family) {
        case ArchFamily::mlp:
            return "architecture: MLP, hidden: " + render_int_list(arch.sizes);
        case ArchFamily::tiny_cnn:
            return "architecture: TinyCNN, channels: " + render_int_list(arch.sizes);
        case ArchFamily::resnet:
            // description-only family; no desk-scale layout behind it
            return "architecture: ResNet, num_blocks: " + render_int_list(arch.sizes);
    }
    throw std::invalid_argument("arch_description: unknown family");
}

inline ArchitectureDescriptor parse_arch(const std::string &text) {
    auto parse_list = [](const std::string &s, size_t from) {
        const size_t lb = s.find('[', from);
        const size_t rb = s.find(']', from);
        if (lb == std::string::npos || rb == std::string::npos || rb < lb) {
            throw std::invalid_argument("arch: malformed list in '" + s + "'");
        }
        std::vector<int> out;
        std::string item;
        std::istringstream is(s.substr(lb + 1, rb - lb - 1));
        while (std::getline(is, item, ',')) {
            if (item.find_first_not_of(" \t") == std::string::npos) continue;
            out.push_back(std::stoi(item));
        }
        return out;
    };
    ArchitectureDescriptor arch;
    if (text.find("MLP") != std::string::npos) {
        arch.family = ArchFamily::mlp;
    } else if (text.find("TinyCNN") != std::string::npos) {
        arch.family = ArchFamily::tiny_cnn;
    } else if (text.find("ResNet") != std::string::npos) {
        arch.family = ArchFamily::resnet;
    } else {
        throw std::invalid_argument("arch: unknown family in '" + text + "'");
    }
    arch.sizes = parse_list(text, 0);
    if (arch.sizes.empty()) throw std::invalid_argument("arch: empty size list in '" + text + "'");
    for (int s : arch.sizes) {
        if (s <= 0) throw std::invalid_argument("arch: non-positive size in '" + text + "'");
    }
    if (arch.family == ArchFamily::tiny_cnn && arch.sizes.size() > 3) {
        throw std::invalid_argument("arch: TinyCNN supports at most 3 conv layers on 8x8 input");
    }
    return arch;
}

inline ParameterLayout arch_layout(const ArchitectureDescriptor &arch, int num_classes) {
    ParameterLayout layout;
    if (arch.family == ArchFamily::resnet) {
        throw std::invalid_argument("arch_layout: ResNet descriptors are text-only at this scale");
    }
    if (arch.family == ArchFamily::mlp) {
        int d = kImageSize;
        for (int h : arch.sizes) {
            layout.layers.push_back(fc_layer(d, h));
            d = h;
        }
        layout.layers.push_back(fc_layer(d, num_classes));
    } else {
        int c = 1;
        int side = kImageSide;
        for (int ch : arch.sizes) {
            layout.layers.push_back(conv_layer(3, 3, c, ch));
            c = ch;
            side /= 2;  // pooled after every conv
        }
        layout.layers.push_back(fc_layer(c * side * side, num_classes));
    }
    return layout;
}

// ---------------------------------------------------------------- networks

struct ZooNet {
    ArchitectureDescriptor arch;
    int num_classes = 0;
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

inline ZooNet make_net(const ArchitectureDescriptor &arch, int num_classes, Rng &rng) {
    ZooNet net;
    net.arch = arch;
    net.num_classes = num_classes;
    const auto layout = arch_layout(arch, num_classes);
    for (const auto &spec : layout.layers) {
        double fan_in;
        if (spec.kind == LayerKind::fully_connected) {
            fan_in = spec.weight_shape[0];
        } else {
            fan_in = static_cast<double>(spec.weight_shape[0]) * spec.weight_shape[1] * spec.weight_shape[2];
        }
        net.weights.push_back(Tensor::randn(spec.weight_shape, rng, std::sqrt(2.0 / fan_in), true));
        net.biases.push_back(Tensor::zeros(spec.bias_shape, true));
    }
    return net;
}

// x is [B, kImageSize]; returns class logits [B, C]
inline Tensor net_forward(const ZooNet &net, const Tensor &x) {
    if (x.ndim() != 2 || x.dim(1) != kImageSize) {
        throw std::invalid_argument("net_forward: expected [B," + std::to_string(kImageSize) + "] input, got " +
                                    shape_str(x.shape()));
    }
    const int B = x.dim(0);
    if (net.arch.family == ArchFamily::mlp) {
        Tensor h = x;
        for (size_t i = 0; i + 1 < net.weights.size(); ++i) {
            h = relu(add(matmul(h, net.weights[i]), net.biases[i]));
        }
        return add(matmul(h, net.weights.back()), net.biases.back());
    }
    Tensor h = reshape(x, {B, 1, kImageSide, kImageSide});
    int side = kImageSide;
    for (size_t i = 0; i + 1 < net.weights.size(); ++i) {
        // conv weights are stored [kh,kw,cin,cout] to match the layout order
        h = avg_pool2(relu(conv2d(h, net.weights[i], net.biases[i], 1)));
        side /= 2;
    }
    const int c_last = net.arch.sizes.back();
    h = reshape(h, {B, c_last * side * side});
    return add(matmul(h, net.weights.back()), net.biases.back());
}

inline std::vector<Tensor> net_params(const ZooNet &net) {
    std::vector<Tensor> ps;
    for (size_t i = 0; i < net.weights.size(); ++i) {
        ps.push_back(net.weights[i]);
        ps.push_back(net.biases[i]);
    }
    return ps;
}

inline StructuredWeights net_weights(const ZooNet &net) {
    StructuredWeights sw;
    for (size_t i = 0; i < net.weights.size(); ++i) {
        sw.weights.push_back(net.weights[i].data());
        sw.biases.push_back(net.biases[i].data());
    }
    return sw;
}

inline void set_net_weights(ZooNet &net, const StructuredWeights &sw) {
    if (sw.weights.size() != net.weights.size()) {
        throw std::invalid_argument("set_net_weights: layer count mismatch");
    }
    for (size_t i = 0; i < net.weights.size(); ++i) {
        if (sw.weights[i].size() != net.weights[i].data().size() ||
            sw.biases[i].size() != net.biases[i].data().size()) {
            throw std::invalid_argument("set_net_weights: size mismatch at layer " + std::to_string(i));
        }
        net.weights[i].data() = sw.weights[i];
        net.biases[i].data() = sw.biases[i];
    }
}

}  // namespace igpg
