#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "igpg/conditioning.hpp"
#include "testutil.hpp"

using namespace igpg;
using testutil::close;

TEST_CASE("dataset embedding is the mean of the exemplar features") {
    const auto task = make_task(TaskKind::blob, 0, 5, 42);
    const int dim = 32;
    const auto emb = dataset_embedding(task, 5, dim);
    REQUIRE(emb.size() == 32);

    // recompute by pooling in a shuffled order; the mean cannot care
    auto exemplars = task_exemplars(task, 5);
    std::reverse(exemplars.begin(), exemplars.end());
    std::vector<double> manual(dim, 0.0);
    for (const auto &img : exemplars) {
        const auto f = featurize_image(img, dim);
        for (int i = 0; i < dim; ++i) manual[static_cast<size_t>(i)] += f[static_cast<size_t>(i)];
    }
    for (auto &v : manual) v /= static_cast<double>(exemplars.size());
    for (int i = 0; i < dim; ++i) REQUIRE(close(emb[static_cast<size_t>(i)], manual[static_cast<size_t>(i)], 1e-12));
}

TEST_CASE("identical exemplar features pool to themselves") {
    std::vector<double> img(kImageSize, 0.25);
    const auto f = featurize_image(img, 16);
    // mean of n copies of f is f
    std::vector<double> mean(16, 0.0);
    for (int rep = 0; rep < 7; ++rep) {
        const auto fi = featurize_image(img, 16);
        for (int i = 0; i < 16; ++i) mean[static_cast<size_t>(i)] += fi[static_cast<size_t>(i)];
    }
    for (int i = 0; i < 16; ++i) REQUIRE(close(mean[static_cast<size_t>(i)] / 7.0, f[static_cast<size_t>(i)], 1e-12));
}

TEST_CASE("the featurizer is frozen and deterministic") {
    std::vector<double> img(kImageSize);
    Rng rng(50);
    for (auto &v : img) v = rng.normal();
    const auto a = featurize_image(img, 24);
    // interleave unrelated RNG work; the featurizer cannot depend on it
    for (int i = 0; i < 100; ++i) rng.normal();
    const auto b = featurize_image(img, 24);
    REQUIRE(a == b);
    for (double v : a) {
        REQUIRE(v >= -1.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("different task seeds give different embeddings") {
    const auto t1 = make_task(TaskKind::blob, 0, 5, 42);
    const auto t2 = make_task(TaskKind::blob, 1, 5, 42);
    const auto t3 = make_task(TaskKind::glyph, 0, 5, 42);
    const auto e1 = dataset_embedding(t1, 5, 32);
    const auto e2 = dataset_embedding(t2, 5, 32);
    const auto e3 = dataset_embedding(t3, 5, 32);
    auto dist = [](const std::vector<double> &a, const std::vector<double> &b) {
        double d = 0.0;
        for (size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(d);
    };
    REQUIRE(dist(e1, e2) > 1e-3);
    REQUIRE(dist(e1, e3) > 1e-3);
    REQUIRE(dist(e2, e3) > 1e-3);
    REQUIRE_THROWS_AS(dataset_embedding(t1, 0, 32), std::invalid_argument);
}

TEST_CASE("hashed sub-token bags separate the architecture vocabulary") {
    const int vocab = 512;
    std::vector<ArchitectureDescriptor> archs = {
        {ArchFamily::mlp, {16}},          {ArchFamily::mlp, {32, 16}},     {ArchFamily::mlp, {16, 32}},
        {ArchFamily::tiny_cnn, {8, 16}},  {ArchFamily::tiny_cnn, {4, 8}},  {ArchFamily::tiny_cnn, {6, 12}},
        {ArchFamily::resnet, {6, 7, 6}},  {ArchFamily::mlp, {8}},
    };
    std::set<std::vector<int>> bags;
    for (const auto &a : archs) bags.insert(arch_token_ids(arch_description(a), vocab));
    REQUIRE(bags.size() == archs.size());

    // determinism and the single-token case
    REQUIRE(arch_token_ids("width", vocab) == arch_token_ids("width", vocab));
    REQUIRE(arch_token_ids("width", vocab).size() == 1);
    REQUIRE_THROWS_AS(arch_token_ids("  ;; ", vocab), std::invalid_argument);
}

TEST_CASE("prompt rendering matches the instruction template") {
    const ArchitectureDescriptor resnet{ArchFamily::resnet, {6, 7, 6}};
    REQUIRE(render_prompt(resnet, 512) ==
            "Instruction: You are a codebook generator. Input: Generate the full codebook of length 512 for "
            "ResNet with: num_blocks = [6, 7, 6]. Output:");
    REQUIRE(render_prompt(resnet, 512) == render_prompt(resnet, 512));

    const ArchitectureDescriptor mlp{ArchFamily::mlp, {32, 16}};
    REQUIRE(render_prompt(mlp, 0) ==
            "Instruction: You are a codebook generator. Input: Generate the full codebook of length 0 for "
            "MLP with: hidden = [32, 16]. Output:");
}
