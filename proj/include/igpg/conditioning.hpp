#pragma once

// Conditioning prefix for the prior: a dataset embedding from mean-pooled
// per-class exemplars through a frozen random-projection featurizer, an
// architecture embedding from a hashed sub-token bag over the canonical
// description, and the instruction-prompt rendering.

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "igpg/arch.hpp"
#include "igpg/task.hpp"
#include "igpg/tensor.hpp"

namespace igpg {

struct ConditioningContext {
    std::vector<double> dataset_embedding;  // e_D, length d_cond
    std::vector<double> arch_embedding;     // e_A, length d_cond (materialized)
    std::vector<int> arch_ids;              // sub-token bag behind e_A
    std::vector<int> prompt_ids;            // instruction mode: prompt bag rides in the dataset slot
    int prefix_length = 2;
};

// the featurizer is frozen: its projection depends only on this constant and
// the embedding width, never on experiment seeds
constexpr uint64_t kFeaturizerSeed = 0x66656174ULL;

inline std::vector<double> featurize_image(const std::vector<double> &pixels, int dim) {
    Rng rng(Rng::mix(kFeaturizerSeed, static_cast<uint64_t>(dim)));
    std::vector<double> proj(static_cast<size_t>(dim) * pixels.size());
    for (auto &v : proj) v = rng.normal() / std::sqrt(static_cast<double>(pixels.size()));
    std::vector<double> out(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < pixels.size(); ++j) acc += proj[static_cast<size_t>(i) * pixels.size() + j] * pixels[j];
        out[static_cast<size_t>(i)] = std::tanh(acc);
    }
    return out;
}

// mean over samples_per_class exemplar features from every class
inline std::vector<double> dataset_embedding(const TaskDescriptor &task, int samples_per_class, int dim) {
    if (samples_per_class < 1) throw std::invalid_argument("dataset_embedding: need at least one sample per class");
    if (task.num_classes < 1) throw std::invalid_argument("dataset_embedding: task has no classes");
    const auto exemplars = task_exemplars(task, samples_per_class);
    std::vector<double> mean(static_cast<size_t>(dim), 0.0);
    for (const auto &img : exemplars) {
        const auto f = featurize_image(img, dim);
        for (int i = 0; i < dim; ++i) mean[static_cast<size_t>(i)] += f[static_cast<size_t>(i)];
    }
    for (auto &v : mean) v /= static_cast<double>(exemplars.size());
    return mean;
}

// hashed unigram + adjacent-bigram bag; bigrams keep permuted size lists apart
inline std::vector<int> arch_token_ids(const std::string &text, int vocab) {
    if (vocab < 1) throw std::invalid_argument("arch_token_ids: vocab must be positive");
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    if (words.empty()) throw std::invalid_argument("arch_token_ids: no sub-tokens in '" + text + "'");
    auto fnv = [](const std::string &s) {
        uint64_t h = 1469598103934665603ULL;
        for (char c : s) h = (h ^ static_cast<uint8_t>(c)) * 1099511628211ULL;
        return h;
    };
    std::vector<int> ids;
    for (size_t i = 0; i < words.size(); ++i) {
        ids.push_back(static_cast<int>(fnv(words[i]) % static_cast<uint64_t>(vocab)));
        if (i + 1 < words.size()) {
            ids.push_back(static_cast<int>(fnv(words[i] + "\x1f" + words[i + 1]) % static_cast<uint64_t>(vocab)));
        }
    }
    return ids;
}

// architecture description as it appears inside the instruction prompt
inline std::string prompt_arch_text(const ArchitectureDescriptor &arch) {
    switch (arch.family) {
        case ArchFamily::mlp:
            return "MLP with: hidden = " + render_int_list(arch.sizes);
        case ArchFamily::tiny_cnn:
            return "TinyCNN with: channels = " + render_int_list(arch.sizes);
        case ArchFamily::resnet:
            return "ResNet with: num_blocks = " + render_int_list(arch.sizes);
    }
    throw std::invalid_argument("prompt_arch_text: unknown family");
}

inline std::string render_prompt(const ArchitectureDescriptor &arch, int64_t codebook_length) {
    return "Instruction: You are a codebook generator. Input: Generate the full codebook of length " +
           std::to_string(codebook_length) + " for " + prompt_arch_text(arch) + ". Output:";
}

}  // namespace igpg
