#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "igpg/prior.hpp"
#include "testutil.hpp"

using namespace igpg;
using testutil::close;

namespace {

PriorConfig tiny_cfg() {
    PriorConfig cfg;
    cfg.vocab = 24;
    cfg.d_model = 32;
    cfg.n_blocks = 2;
    cfg.n_heads = 4;
    cfg.n_max = 24;
    cfg.arch_vocab = 64;
    return cfg;
}

ConditioningContext fixed_ctx(const PriorModel &m, uint64_t seed) {
    ConditioningContext ctx;
    Rng rng(seed);
    ctx.dataset_embedding.resize(static_cast<size_t>(m.cfg.d_model));
    for (auto &v : ctx.dataset_embedding) v = 0.5 * rng.normal();
    ctx.arch_ids = {static_cast<int>(rng.below(m.cfg.arch_vocab)), static_cast<int>(rng.below(m.cfg.arch_vocab))};
    ctx.arch_embedding = arch_embedding_tensor(m, ctx.arch_ids).data();
    return ctx;
}

}  // namespace

TEST_CASE("forward respects causality") {
    Rng rng(60);
    PriorModel m = make_prior(tiny_cfg(), rng);
    const auto ctx = fixed_ctx(m, 1);
    std::vector<int> tokens{3, 7, 1, 9, 4, 2, 8, 5};
    const Tensor base = prior_forward(m, ctx, tokens);
    REQUIRE(base.shape() == Shape{9, 24});

    for (int j = 0; j < 8; ++j) {
        auto perturbed = tokens;
        perturbed[static_cast<size_t>(j)] = (perturbed[static_cast<size_t>(j)] + 11) % 24;
        const Tensor out = prior_forward(m, ctx, perturbed);
        // rows up to and including j predict tokens <= j and cannot move
        for (int r = 0; r <= j; ++r) {
            for (int c = 0; c < 24; ++c) {
                REQUIRE(base.at(r * 24 + c) == out.at(r * 24 + c));
            }
        }
        // some later row must move
        double diff = 0.0;
        for (int r = j + 1; r < 9; ++r) {
            for (int c = 0; c < 24; ++c) diff += std::fabs(base.at(r * 24 + c) - out.at(r * 24 + c));
        }
        REQUIRE(diff > 0.0);
    }
}

TEST_CASE("prefix-only forward yields one first-token row") {
    Rng rng(61);
    PriorModel m = make_prior(tiny_cfg(), rng);
    const auto ctx = fixed_ctx(m, 2);
    const Tensor logits = prior_forward(m, ctx, {});
    REQUIRE(logits.shape() == Shape{1, 24});
}

TEST_CASE("forward rejects overlength and out-of-range input") {
    Rng rng(62);
    PriorModel m = make_prior(tiny_cfg(), rng);
    const auto ctx = fixed_ctx(m, 3);
    REQUIRE_THROWS_AS(prior_forward(m, ctx, std::vector<int>(25, 0)), std::invalid_argument);
    REQUIRE_THROWS_AS(prior_forward(m, ctx, {0, 99}), std::invalid_argument);
    REQUIRE_THROWS_AS(prior_loss(m, ctx, {}), std::invalid_argument);
}

TEST_CASE("output distributions normalize") {
    Rng rng(63);
    PriorModel m = make_prior(tiny_cfg(), rng);
    const auto ctx = fixed_ctx(m, 4);
    const Tensor logits = prior_forward(m, ctx, {1, 2, 3});
    const Tensor probs = softmax_rows(logits);
    for (int i = 0; i < probs.dim(0); ++i) {
        double s = 0.0;
        for (int j = 0; j < probs.dim(1); ++j) s += probs.at(i * probs.dim(1) + j);
        REQUIRE(close(s, 1.0, 0.0, 1e-12));
    }
}

TEST_CASE("uniform logits cost exactly ln(m)") {
    Rng rng(64);
    PriorModel m = make_prior(tiny_cfg(), rng);
    std::fill(m.head_w.data().begin(), m.head_w.data().end(), 0.0);
    std::fill(m.head_b.data().begin(), m.head_b.data().end(), 0.0);
    const auto ctx = fixed_ctx(m, 5);
    const Tensor nll = prior_loss(m, ctx, {0, 5, 17, 3});
    REQUIRE(close(nll.item(), std::log(24.0), 1e-12, 0.0));
}

TEST_CASE("loss matches a scalar cross-entropy recomputation") {
    Rng rng(65);
    PriorConfig cfg = tiny_cfg();
    cfg.vocab = 2;
    PriorModel m = make_prior(cfg, rng);
    const auto ctx = fixed_ctx(m, 6);
    const std::vector<int> tokens{1, 0, 1, 1};
    const Tensor logits = prior_forward(m, ctx, tokens);
    double manual = 0.0;
    for (size_t i = 0; i < tokens.size(); ++i) {
        const double a = logits.at(static_cast<int64_t>(i) * 2);
        const double b = logits.at(static_cast<int64_t>(i) * 2 + 1);
        const double mx = std::max(a, b);
        const double lse = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
        manual += lse - (tokens[i] == 0 ? a : b);
    }
    manual /= static_cast<double>(tokens.size());
    REQUIRE(close(prior_loss(m, ctx, tokens).item(), manual, 1e-12));
    REQUIRE(prior_loss(m, ctx, tokens).item() >= 0.0);
}

TEST_CASE("sampling strategies") {
    Rng rng(66);
    PriorModel m = make_prior(tiny_cfg(), rng);
    const auto ctx = fixed_ctx(m, 7);

    SECTION("greedy is deterministic") {
        REQUIRE(sample(m, ctx, 10, SamplingStrategy::greedy()) == sample(m, ctx, 10, SamplingStrategy::greedy()));
    }
    SECTION("top-1 equals greedy at any temperature") {
        REQUIRE(sample(m, ctx, 10, SamplingStrategy::topk(1, 7.3, 99)) ==
                sample(m, ctx, 10, SamplingStrategy::greedy()));
    }
    SECTION("full-support top-k at vanishing temperature equals greedy") {
        REQUIRE(sample(m, ctx, 10, SamplingStrategy::topk(24, 1e-6, 3)) ==
                sample(m, ctx, 10, SamplingStrategy::greedy()));
    }
    SECTION("fixed seed reproduces stochastic samples") {
        REQUIRE(sample(m, ctx, 10, SamplingStrategy::topk(5, 1.0, 11)) ==
                sample(m, ctx, 10, SamplingStrategy::topk(5, 1.0, 11)));
    }
    SECTION("invalid parameters are rejected") {
        REQUIRE_THROWS_AS(sample(m, ctx, 4, SamplingStrategy::topk(0, 1.0, 0)), std::invalid_argument);
        REQUIRE_THROWS_AS(sample(m, ctx, 4, SamplingStrategy::topk(4, 0.0, 0)), std::invalid_argument);
        REQUIRE_THROWS_AS(sample(m, ctx, 4, SamplingStrategy::topk(25, 1.0, 0)), std::invalid_argument);
    }
    SECTION("long generations slide the window instead of overflowing") {
        const auto out = sample(m, ctx, 40, SamplingStrategy::greedy());
        REQUIRE(out.size() == 40);
    }
}

TEST_CASE("an overfit prior reproduces its training sequence greedily") {
    Rng rng(67);
    PriorConfig cfg = tiny_cfg();
    PriorModel m = make_prior(cfg, rng);
    Rng seq_rng(8);
    std::vector<int> seq(16);
    for (auto &t : seq) t = static_cast<int>(seq_rng.below(cfg.vocab));

    PriorTrainItem item;
    item.ctx = fixed_ctx(m, 9);
    item.tokens = seq;
    PriorTrainConfig tcfg;
    tcfg.steps = 400;
    tcfg.lr = 3e-3;
    const auto stats = train_prior(m, {item}, tcfg);
    REQUIRE(stats.final_nll < 0.5 * std::log(static_cast<double>(cfg.vocab)));
    REQUIRE(sample(m, item.ctx, 16, SamplingStrategy::greedy()) == seq);
}

TEST_CASE("swapping the dataset embedding moves the first-token logits") {
    Rng rng(68);
    PriorConfig cfg = tiny_cfg();
    PriorModel m = make_prior(cfg, rng);
    // two sequences that disagree from the very first token, under two contexts
    PriorTrainItem a, b;
    a.ctx = fixed_ctx(m, 10);
    b.ctx = fixed_ctx(m, 11);
    b.ctx.arch_ids = a.ctx.arch_ids;  // same architecture, different dataset
    a.tokens = std::vector<int>(12, 2);
    b.tokens = std::vector<int>(12, 19);
    PriorTrainConfig tcfg;
    tcfg.steps = 500;
    tcfg.lr = 3e-3;
    train_prior(m, {a, b}, tcfg);

    ConditioningContext swapped = a.ctx;
    swapped.dataset_embedding = b.ctx.dataset_embedding;
    const Tensor la = prior_forward(m, a.ctx, {});
    const Tensor ls = prior_forward(m, swapped, {});
    double diff = 0.0;
    for (int j = 0; j < cfg.vocab; ++j) diff += std::fabs(la.at(j) - ls.at(j));
    REQUIRE(diff > 1e-6);
    REQUIRE(sample(m, a.ctx, 12, SamplingStrategy::greedy()) != sample(m, swapped, 12, SamplingStrategy::greedy()));
}

TEST_CASE("prior checkpoints roundtrip exactly") {
    Rng rng(69);
    PriorModel m = make_prior(tiny_cfg(), rng);
    const std::string path = "/tmp/igpg_prior_" + std::to_string(::getpid()) + ".bin";
    save_prior(m, path);
    const PriorModel back = load_prior(path);
    REQUIRE(back.cfg.d_model == m.cfg.d_model);
    REQUIRE(back.tok_emb.data() == m.tok_emb.data());
    REQUIRE(back.blocks.size() == m.blocks.size());
    REQUIRE(back.blocks[1].fc2_w.data() == m.blocks[1].fc2_w.data());

    const auto ctx = fixed_ctx(m, 12);
    REQUIRE(sample(back, ctx, 6, SamplingStrategy::greedy()) == sample(m, ctx, 6, SamplingStrategy::greedy()));

    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(100);
    f.put(static_cast<char>(0x3c));
    f.close();
    REQUIRE_THROWS_AS(load_prior(path), IoError);
    std::remove(path.c_str());
}
