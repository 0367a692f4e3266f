#include <catch2/catch_amalgamated.hpp>

#include "igpg/layout.hpp"
#include "testutil.hpp"

using namespace igpg;

namespace {

StructuredWeights random_weights(const ParameterLayout &layout, Rng &rng) {
    StructuredWeights sw;
    for (const auto &spec : layout.layers) {
        std::vector<double> w(static_cast<size_t>(spec.weight_count()));
        std::vector<double> b(static_cast<size_t>(spec.bias_count()));
        for (auto &v : w) v = rng.normal();
        for (auto &v : b) v = rng.normal();
        sw.weights.push_back(std::move(w));
        sw.biases.push_back(std::move(b));
    }
    return sw;
}

ParameterLayout random_layout(Rng &rng) {
    ParameterLayout layout;
    const int n = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < n; ++i) {
        if (rng.uniform() < 0.5) {
            layout.layers.push_back(fc_layer(1 + static_cast<int>(rng.below(12)), 1 + static_cast<int>(rng.below(12)),
                                             rng.uniform() < 0.8));
        } else {
            layout.layers.push_back(conv_layer(1 + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(3)),
                                               1 + static_cast<int>(rng.below(4)), 1 + static_cast<int>(rng.below(6)),
                                               rng.uniform() < 0.8));
        }
    }
    return layout;
}

}  // namespace

TEST_CASE("layer segment lengths match the closed forms") {
    REQUIRE(conv_layer(3, 3, 3, 16).param_count() == 3 * 3 * 3 * 16 + 16);
    REQUIRE(fc_layer(4, 3).param_count() == 4 * 3 + 3);
    ParameterLayout two;
    two.layers = {fc_layer(4, 3), fc_layer(3, 2)};
    REQUIRE(two.total_length() == 15 + 8);
}

TEST_CASE("layout length equals brute-force element count") {
    Rng rng(21);
    for (int t = 0; t < 50; ++t) {
        const auto layout = random_layout(rng);
        const auto sw = random_weights(layout, rng);
        int64_t brute = 0;
        for (size_t i = 0; i < sw.weights.size(); ++i) {
            brute += static_cast<int64_t>(sw.weights[i].size() + sw.biases[i].size());
        }
        REQUIRE(layout.total_length() == brute);
    }
}

TEST_CASE("vectorize and unflatten are exact inverses") {
    Rng rng(22);
    for (int t = 0; t < 100; ++t) {
        const auto layout = random_layout(rng);
        const auto sw = random_weights(layout, rng);
        const auto flat = vectorize(sw, layout);
        REQUIRE(flat.length() == layout.total_length());
        const auto back = unflatten(flat);
        REQUIRE(back.weights == sw.weights);
        REQUIRE(back.biases == sw.biases);
    }
}

TEST_CASE("vectorize validates shapes and names the layer") {
    ParameterLayout layout;
    layout.layers = {fc_layer(4, 3), fc_layer(3, 2)};
    StructuredWeights sw;
    sw.weights = {std::vector<double>(12), std::vector<double>(7)};  // second layer wrong
    sw.biases = {std::vector<double>(3), std::vector<double>(2)};
    try {
        vectorize(sw, layout);
        FAIL("expected shape mismatch");
    } catch (const std::invalid_argument &e) {
        REQUIRE(std::string(e.what()).find("layer 1") != std::string::npos);
    }
}

TEST_CASE("unflatten rejects wrong lengths and maps zeros to zeros") {
    ParameterLayout layout;
    layout.layers = {fc_layer(4, 3), fc_layer(3, 2)};
    FlatParamVector flat;
    flat.layout = layout;
    flat.values.assign(static_cast<size_t>(layout.total_length() - 1), 0.0);
    REQUIRE_THROWS_AS(unflatten(flat), std::invalid_argument);

    flat.values.assign(static_cast<size_t>(layout.total_length()), 0.0);
    const auto sw = unflatten(flat);
    for (const auto &w : sw.weights) {
        for (double v : w) REQUIRE(v == 0.0);
    }
}

TEST_CASE("layer-wise vectorization emits one vector per layer") {
    ParameterLayout layout;
    layout.layers = {fc_layer(4, 3), conv_layer(3, 3, 2, 5)};
    Rng rng(23);
    const auto sw = random_weights(layout, rng);
    const auto per_layer = vectorize_layerwise(sw, layout);
    REQUIRE(per_layer.size() == 2);
    REQUIRE(static_cast<int64_t>(per_layer[0].size()) == layout.layers[0].param_count());
    REQUIRE(static_cast<int64_t>(per_layer[1].size()) == layout.layers[1].param_count());
    // concatenating the per-layer vectors reproduces the architecture-wise one
    std::vector<double> joined = per_layer[0];
    joined.insert(joined.end(), per_layer[1].begin(), per_layer[1].end());
    REQUIRE(joined == vectorize(sw, layout).values);
}

TEST_CASE("chunking a 2464-long vector with K=1000 pads to 3000") {
    std::vector<double> values(2464);
    Rng rng(24);
    for (auto &v : values) v = rng.normal();
    const auto cs = chunk(values, 1000);
    REQUIRE(cs.count() == 3);
    REQUIRE(cs.padded_length() == 3000);
    REQUIRE(cs.original_length == 2464);
    int64_t pad = 0;
    for (size_t j = 0; j < 1000; ++j) {
        if (cs.mask[2][j] == 0) {
            ++pad;
            REQUIRE(cs.chunks[2][j] == 0.0);
        }
    }
    REQUIRE(pad == 3000 - 2464);
    REQUIRE(dechunk(cs) == values);
}

TEST_CASE("exact multiples need no padding") {
    std::vector<double> values(2048, 1.5);
    const auto cs = chunk(values, 1024);
    REQUIRE(cs.count() == 2);
    for (const auto &m : cs.mask) {
        for (uint8_t bit : m) REQUIRE(bit == 1);
    }
}

TEST_CASE("chunk/dechunk roundtrip over random sizes") {
    Rng rng(25);
    for (int t = 0; t < 200; ++t) {
        const int64_t d = 1 + rng.below(5000);
        const int k = 1 + static_cast<int>(rng.below(512));
        std::vector<double> values(static_cast<size_t>(d));
        for (auto &v : values) v = rng.normal();
        const auto cs = chunk(values, k);
        REQUIRE(cs.padded_length() == ((d + k - 1) / k) * k);
        // naive oracle: concatenate everything, then truncate
        std::vector<double> naive;
        for (const auto &c : cs.chunks) naive.insert(naive.end(), c.begin(), c.end());
        naive.resize(static_cast<size_t>(d));
        REQUIRE(dechunk(cs) == naive);
        REQUIRE(dechunk(cs) == values);
    }
}

TEST_CASE("chunk edge cases") {
    REQUIRE_THROWS_AS(chunk({1.0}, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(chunk({1.0}, -3), std::invalid_argument);

    // empty input -> empty chunk set -> empty vector
    const auto empty = chunk({}, 16);
    REQUIRE(empty.count() == 0);
    REQUIRE(dechunk(empty).empty());

    // single chunk with D == K is an identity copy
    std::vector<double> values{1, 2, 3, 4};
    const auto cs = chunk(values, 4);
    REQUIRE(cs.count() == 1);
    REQUIRE(dechunk(cs) == values);

    // fully masked single chunk decodes to the empty vector
    ChunkSet masked;
    masked.chunk_size = 4;
    masked.original_length = 0;
    masked.chunks = {{0, 0, 0, 0}};
    masked.mask = {{0, 0, 0, 0}};
    REQUIRE(dechunk(masked).empty());
}

TEST_CASE("dechunk rejects non-contiguous masks") {
    ChunkSet cs;
    cs.chunk_size = 4;
    cs.original_length = 3;
    cs.chunks = {{1, 0, 2, 3}};
    cs.mask = {{1, 0, 1, 1}};
    REQUIRE_THROWS_AS(dechunk(cs), std::invalid_argument);
}
