#pragma once

// End-to-end generation: plan the token budget for a target parameter count,
// sample tokens single-pass or in windowed blocks, decode token segments to
// chunks, and flatten into a runnable weight vector.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "igpg/arch.hpp"
#include "igpg/prior.hpp"
#include "igpg/vqvae.hpp"

namespace igpg {

struct GenerationPlan {
    int64_t param_count = 0;    // L
    int chunk_size = 0;         // K
    int tokens_per_chunk = 0;   // l
    int64_t chunk_count = 0;    // k = ceil(L/K)
    int64_t total_tokens = 0;   // k*l
    int n_max = 0;
    int context_window = 0;     // tokens carried between blocks
    enum class Mode { single_pass, chunk_wise } mode = Mode::single_pass;
    int64_t block_count = 1;    // nominal J = ceil(k*l / n_max)
};

inline GenerationPlan plan_generation(int64_t param_count, int chunk_size, int tokens_per_chunk, int n_max,
                                      int context_window) {
    if (param_count <= 0 || chunk_size <= 0 || tokens_per_chunk <= 0 || n_max <= 0) {
        throw std::invalid_argument("plan_generation: all sizes must be positive");
    }
    if (context_window <= 0 || context_window >= n_max) {
        throw std::invalid_argument("plan_generation: context window must lie in (0, n_max)");
    }
    GenerationPlan plan;
    plan.param_count = param_count;
    plan.chunk_size = chunk_size;
    plan.tokens_per_chunk = tokens_per_chunk;
    plan.n_max = n_max;
    plan.context_window = context_window;
    plan.chunk_count = (param_count + chunk_size - 1) / chunk_size;
    plan.total_tokens = plan.chunk_count * tokens_per_chunk;
    plan.mode = plan.total_tokens <= n_max ? GenerationPlan::Mode::single_pass : GenerationPlan::Mode::chunk_wise;
    plan.block_count = (plan.total_tokens + n_max - 1) / n_max;
    return plan;
}

// Windowed block generation: the first block is up to n_max tokens, each
// later block carries the last context_window tokens of its predecessor and
// emits n_max - context_window new ones; the concatenation is truncated to
// total_tokens.
inline std::vector<int> generate_tokens_windowed(const PriorModel &prior, const ConditioningContext &ctx,
                                                 int64_t total_tokens, int n_max, int context_window,
                                                 const SamplingStrategy &strategy) {
    if (context_window <= 0 || context_window >= n_max) {
        throw std::invalid_argument("generate: context window must lie in (0, n_max)");
    }
    std::vector<int> full = sample(prior, ctx, std::min<int64_t>(total_tokens, n_max), strategy);
    while (static_cast<int64_t>(full.size()) < total_tokens) {
        const std::vector<int> carried(full.end() - context_window, full.end());
        const std::vector<int> block =
            sample(prior, ctx, n_max - context_window, strategy, &carried);
        full.insert(full.end(), block.begin(), block.end());
    }
    full.resize(static_cast<size_t>(total_tokens));
    return full;
}

inline std::vector<int> generate_tokens(const PriorModel &prior, const ConditioningContext &ctx,
                                        const GenerationPlan &plan, const SamplingStrategy &strategy) {
    if (plan.mode == GenerationPlan::Mode::single_pass) {
        return sample(prior, ctx, plan.total_tokens, strategy);
    }
    return generate_tokens_windowed(prior, ctx, plan.total_tokens, plan.n_max, plan.context_window, strategy);
}

// tokens -> chunks -> flat vector of exactly plan.param_count values
inline std::vector<double> generate_params(const ConditioningContext &ctx, const GenerationPlan &plan,
                                           const VqVaeModel &tokenizer, const PriorModel &prior,
                                           const SamplingStrategy &strategy) {
    if (tokenizer.cfg.tokens_per_chunk != plan.tokens_per_chunk || tokenizer.cfg.chunk_size != plan.chunk_size) {
        throw std::invalid_argument("generate_params: plan does not match the tokenizer chunking");
    }
    if (prior.cfg.vocab != tokenizer.cfg.codebook_size) {
        throw std::invalid_argument("generate_params: prior vocabulary does not match the codebook");
    }
    if (prior.cfg.n_max != plan.n_max) {
        throw std::invalid_argument("generate_params: plan n_max does not match the prior");
    }
    const std::vector<int> tokens = generate_tokens(prior, ctx, plan, strategy);
    return detokenize_vector(tokenizer, tokens, plan.param_count);
}

// ---------------------------------------------------------------- layer-wise

// In layer-wise aggregation each layer is chunked and padded on its own; a
// record's sequence is the concatenation of its per-layer chunk tokens.
inline std::vector<int> tokenize_vector_layerwise(const VqVaeModel &m, const StructuredWeights &sw,
                                                  const ParameterLayout &layout) {
    std::vector<int> tokens;
    for (const auto &piece : vectorize_layerwise(sw, layout)) {
        const auto t = tokenize_vector(m, piece);
        tokens.insert(tokens.end(), t.begin(), t.end());
    }
    return tokens;
}

inline int64_t layerwise_token_count(const ParameterLayout &layout, int chunk_size, int tokens_per_chunk) {
    int64_t total = 0;
    for (const auto &spec : layout.layers) {
        total += (spec.param_count() + chunk_size - 1) / chunk_size * tokens_per_chunk;
    }
    return total;
}

inline std::vector<double> detokenize_vector_layerwise(const VqVaeModel &m, const std::vector<int> &tokens,
                                                       const ParameterLayout &layout) {
    if (static_cast<int64_t>(tokens.size()) !=
        layerwise_token_count(layout, m.cfg.chunk_size, m.cfg.tokens_per_chunk)) {
        throw std::invalid_argument("detokenize_vector_layerwise: token count does not match the layout");
    }
    std::vector<double> values;
    size_t off = 0;
    for (const auto &spec : layout.layers) {
        const int64_t piece_len = spec.param_count();
        const int64_t piece_tokens =
            (piece_len + m.cfg.chunk_size - 1) / m.cfg.chunk_size * m.cfg.tokens_per_chunk;
        const std::vector<int> seg(tokens.begin() + off, tokens.begin() + off + piece_tokens);
        const auto piece = detokenize_vector(m, seg, piece_len);
        values.insert(values.end(), piece.begin(), piece.end());
        off += static_cast<size_t>(piece_tokens);
    }
    return values;
}

// ---------------------------------------------------------------- instantiate

struct InstantiatedNet {
    StructuredWeights weights;
    ZooNet net;
};

inline InstantiatedNet instantiate(const std::vector<double> &flat_values, const ArchitectureDescriptor &arch,
                                   int num_classes) {
    FlatParamVector flat;
    flat.layout = arch_layout(arch, num_classes);
    if (static_cast<int64_t>(flat_values.size()) != flat.layout.total_length()) {
        throw std::invalid_argument("instantiate: got " + std::to_string(flat_values.size()) + " values, layout needs " +
                                    std::to_string(flat.layout.total_length()));
    }
    flat.values = flat_values;
    InstantiatedNet out;
    out.weights = unflatten(flat);
    Rng dummy(0);
    out.net = make_net(arch, num_classes, dummy);
    set_net_weights(out.net, out.weights);
    return out;
}

}  // namespace igpg
