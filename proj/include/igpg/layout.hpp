#pragma once

// Bijection between structured per-layer weights and a flat parameter vector,
// plus fixed-size chunking with a trailing pad mask.

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "igpg/tensor.hpp"

namespace igpg {

enum class LayerKind { fully_connected, conv2d };

struct LayerSpec {
    LayerKind kind;
    Shape weight_shape;  // fully_connected: [d_in, d_out]; conv2d: [kh, kw, c_in, c_out]
    Shape bias_shape;    // empty when the layer has no bias

    int64_t weight_count() const { return shape_numel(weight_shape); }
    int64_t bias_count() const { return bias_shape.empty() ? 0 : shape_numel(bias_shape); }
    int64_t param_count() const { return weight_count() + bias_count(); }
};

struct ParameterLayout {
    std::vector<LayerSpec> layers;

    int64_t total_length() const {
        int64_t n = 0;
        for (const auto &l : layers) n += l.param_count();
        return n;
    }
};

inline LayerSpec fc_layer(int d_in, int d_out, bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::fully_connected;
    l.weight_shape = {d_in, d_out};
    if (bias) l.bias_shape = {d_out};
    return l;
}

inline LayerSpec conv_layer(int kh, int kw, int c_in, int c_out, bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.weight_shape = {kh, kw, c_in, c_out};
    if (bias) l.bias_shape = {c_out};
    return l;
}

// One layer's tensors as raw row-major values.
struct StructuredWeights {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;  // empty vector for bias-free layers
};

struct FlatParamVector {
    std::vector<double> values;
    ParameterLayout layout;

    int64_t length() const { return static_cast<int64_t>(values.size()); }
};

enum class VectorizeMode { architecture_wise, layer_wise };

namespace detail {

inline void check_structured(const StructuredWeights &sw, const ParameterLayout &layout) {
    if (sw.weights.size() != layout.layers.size() || sw.biases.size() != layout.layers.size()) {
        throw std::invalid_argument("vectorize: layer count mismatch with layout");
    }
    for (size_t i = 0; i < layout.layers.size(); ++i) {
        const auto &spec = layout.layers[i];
        if (static_cast<int64_t>(sw.weights[i].size()) != spec.weight_count() ||
            static_cast<int64_t>(sw.biases[i].size()) != spec.bias_count()) {
            throw std::invalid_argument("vectorize: shape mismatch at layer " + std::to_string(i) + " (" +
                                        (spec.kind == LayerKind::conv2d ? "conv2d" : "fully_connected") + ")");
        }
    }
}

}  // namespace detail

// vec(W) followed by the bias, one layer after another.
inline FlatParamVector vectorize(const StructuredWeights &sw, const ParameterLayout &layout) {
    detail::check_structured(sw, layout);
    FlatParamVector flat;
    flat.layout = layout;
    flat.values.reserve(static_cast<size_t>(layout.total_length()));
    for (size_t i = 0; i < layout.layers.size(); ++i) {
        flat.values.insert(flat.values.end(), sw.weights[i].begin(), sw.weights[i].end());
        flat.values.insert(flat.values.end(), sw.biases[i].begin(), sw.biases[i].end());
    }
    return flat;
}

// One vector per layer (weights then bias), layer order preserved.
inline std::vector<std::vector<double>> vectorize_layerwise(const StructuredWeights &sw,
                                                            const ParameterLayout &layout) {
    detail::check_structured(sw, layout);
    std::vector<std::vector<double>> out;
    out.reserve(layout.layers.size());
    for (size_t i = 0; i < layout.layers.size(); ++i) {
        std::vector<double> v = sw.weights[i];
        v.insert(v.end(), sw.biases[i].begin(), sw.biases[i].end());
        out.push_back(std::move(v));
    }
    return out;
}

inline StructuredWeights unflatten(const FlatParamVector &flat) {
    const auto &layout = flat.layout;
    if (flat.length() != layout.total_length()) {
        throw std::invalid_argument("unflatten: flat length " + std::to_string(flat.length()) +
                                    " does not match layout length " + std::to_string(layout.total_length()));
    }
    StructuredWeights sw;
    size_t off = 0;
    for (const auto &spec : layout.layers) {
        const auto wn = static_cast<size_t>(spec.weight_count());
        const auto bn = static_cast<size_t>(spec.bias_count());
        sw.weights.emplace_back(flat.values.begin() + off, flat.values.begin() + off + wn);
        off += wn;
        sw.biases.emplace_back(flat.values.begin() + off, flat.values.begin() + off + bn);
        off += bn;
    }
    return sw;
}

// ---------------------------------------------------------------- chunking

struct ChunkSet {
    std::vector<std::vector<double>> chunks;      // n chunks, each of length K
    std::vector<std::vector<uint8_t>> mask;       // 1 = real value, 0 = padding
    int64_t original_length = 0;                  // D
    int chunk_size = 0;                           // K

    int64_t padded_length() const { return static_cast<int64_t>(chunks.size()) * chunk_size; }
    int64_t count() const { return static_cast<int64_t>(chunks.size()); }
};

inline ChunkSet chunk(const std::vector<double> &values, int chunk_size) {
    if (chunk_size <= 0) throw std::invalid_argument("chunk: chunk size must be positive");
    ChunkSet cs;
    cs.chunk_size = chunk_size;
    cs.original_length = static_cast<int64_t>(values.size());
    const int64_t n = (cs.original_length + chunk_size - 1) / chunk_size;
    for (int64_t i = 0; i < n; ++i) {
        std::vector<double> c(static_cast<size_t>(chunk_size), 0.0);
        std::vector<uint8_t> m(static_cast<size_t>(chunk_size), 0);
        for (int j = 0; j < chunk_size; ++j) {
            const int64_t idx = i * chunk_size + j;
            if (idx < cs.original_length) {
                c[static_cast<size_t>(j)] = values[static_cast<size_t>(idx)];
                m[static_cast<size_t>(j)] = 1;
            }
        }
        cs.chunks.push_back(std::move(c));
        cs.mask.push_back(std::move(m));
    }
    return cs;
}

inline std::vector<double> dechunk(const ChunkSet &cs) {
    if (cs.chunk_size <= 0 && cs.count() > 0) throw std::invalid_argument("dechunk: invalid chunk size");
    if (cs.mask.size() != cs.chunks.size()) throw std::invalid_argument("dechunk: mask/chunk count mismatch");
    for (size_t i = 0; i < cs.chunks.size(); ++i) {
        if (cs.chunks[i].size() != static_cast<size_t>(cs.chunk_size) || cs.mask[i].size() != cs.chunks[i].size()) {
            throw std::invalid_argument("dechunk: chunk " + std::to_string(i) + " has wrong length");
        }
    }
    // the pad must be one contiguous run of zeros at the very end
    int64_t real = 0;
    bool in_pad = false;
    for (const auto &m : cs.mask) {
        for (uint8_t bit : m) {
            if (bit == 1) {
                if (in_pad) throw std::invalid_argument("dechunk: non-contiguous padding mask");
                ++real;
            } else {
                in_pad = true;
            }
        }
    }
    if (real != cs.original_length) {
        throw std::invalid_argument("dechunk: mask marks " + std::to_string(real) + " values but original length is " +
                                    std::to_string(cs.original_length));
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(real));
    for (const auto &c : cs.chunks) {
        const int64_t take = std::min<int64_t>(static_cast<int64_t>(c.size()), real - static_cast<int64_t>(out.size()));
        out.insert(out.end(), c.begin(), c.begin() + take);
    }
    return out;
}

}  // namespace igpg
