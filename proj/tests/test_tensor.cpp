#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "igpg/optim.hpp"
#include "igpg/tensor.hpp"
#include "testutil.hpp"

using namespace igpg;
using testutil::close;
using testutil::gradcheck;

TEST_CASE("sum gradient is all ones") {
    Rng rng(1);
    Tensor p = Tensor::randn({3, 4}, rng, 1.0, true);
    backward(sum(p));
    for (double g : p.grad()) REQUIRE(g == 1.0);
}

TEST_CASE("stop_gradient is forward identity with zero backward") {
    Rng rng(2);
    Tensor p = Tensor::randn({5}, rng, 1.0, true);
    Tensor s = stop_gradient(p);
    REQUIRE(std::memcmp(s.data().data(), p.data().data(), p.numel() * sizeof(double)) == 0);

    // loss = sum(sg[p] * p)  ->  grad = value of p
    backward(sum(mul(stop_gradient(p), p)));
    for (int i = 0; i < p.numel(); ++i) REQUIRE(p.grad()[i] == p.at(i));
}

TEST_CASE("disconnected parameter has zero gradient") {
    Rng rng(3);
    Tensor p = Tensor::randn({4}, rng, 1.0, true);
    Tensor q = Tensor::randn({4}, rng, 1.0, true);
    backward(sum(p));
    for (double g : q.grad()) REQUIRE(g == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    Rng rng(4);
    Tensor p = Tensor::randn({2, 2}, rng, 1.0, true);
    REQUIRE_THROWS_AS(backward(add(p, p)), std::invalid_argument);
}

TEST_CASE("elementwise and matmul ops pass finite-difference checks") {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
        Tensor b = Tensor::randn({3, 4}, rng, 1.0, true);
        Tensor bias = Tensor::randn({4}, rng, 1.0, true);
        Tensor w = Tensor::randn({4, 2}, rng, 1.0, true);

        REQUIRE(gradcheck([&] { return sum(mul(add(a, bias), sub(b, a))); }, {a, b, bias}));
        REQUIRE(gradcheck([&] { return mean(matmul(add(a, b), w)); }, {a, b, w}));
        REQUIRE(gradcheck([&] { return sum(matmul_nt(a, b)); }, {a, b}));
    }
}

TEST_CASE("activations pass finite-difference checks") {
    Rng rng(6);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = Tensor::randn({4, 3}, rng, 1.0, true);
        REQUIRE(gradcheck([&] { return sum(gelu(a)); }, {a}));
        REQUIRE(gradcheck([&] { return sum(tanh_act(a)); }, {a}));
        // keep relu away from the kink
        Tensor shifted = Tensor::randn({4, 3}, rng, 1.0, true);
        for (auto &v : shifted.data()) {
            if (std::fabs(v) < 0.05) v += 0.1;
        }
        REQUIRE(gradcheck([&] { return sum(relu(shifted)); }, {shifted}));
    }
}

TEST_CASE("softmax family passes finite-difference checks") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = Tensor::randn({3, 5}, rng, 1.0, true);
        Tensor m = Tensor::randn({3, 5}, rng, 1.0, true);
        REQUIRE(gradcheck([&] { return sum(mul(softmax_rows(a), m)); }, {a}));
        REQUIRE(gradcheck([&] { return sum(mul(log_softmax_rows(a), m)); }, {a}));
        REQUIRE(gradcheck([&] { return cross_entropy(a, {4, 0, 2}); }, {a}));
    }
}

TEST_CASE("shape ops pass finite-difference checks") {
    Rng rng(8);
    Tensor a = Tensor::randn({2, 6}, rng, 1.0, true);
    Tensor b = Tensor::randn({3, 6}, rng, 1.0, true);
    Tensor m = Tensor::randn({5, 4}, rng, 1.0, true);
    REQUIRE(gradcheck([&] { return sum(mul(concat_rows(a, b), concat_rows(b, a))); }, {a, b}));
    REQUIRE(gradcheck([&] { return sum(slice_rows(concat_rows(a, b), 1, 4)); }, {a, b}));
    REQUIRE(gradcheck([&] { return sum(mul(slice_cols(m, 1, 3), slice_cols(m, 2, 4))); }, {m}));
    REQUIRE(gradcheck([&] { return sum(concat_cols({slice_cols(m, 0, 2), slice_cols(m, 2, 4)})); }, {m}));
    REQUIRE(gradcheck([&] { return sum(mul(reshape(a, {3, 4}), reshape(a, {3, 4}))); }, {a}));
    REQUIRE(gradcheck([&] { return mean(row_mean(m)); }, {m}));
    REQUIRE(gradcheck([&] { return sum(col_mean(m)); }, {m}));
}

TEST_CASE("layer norm and embedding lookup pass finite-difference checks") {
    Rng rng(9);
    Tensor x = Tensor::randn({3, 6}, rng, 1.0, true);
    Tensor g = Tensor::randn({6}, rng, 0.3, true);
    Tensor b = Tensor::randn({6}, rng, 0.3, true);
    for (auto &v : g.data()) v += 1.0;
    REQUIRE(gradcheck([&] { return sum(mul(layer_norm(x, g, b), x)); }, {x, g, b}, 2e-4));

    Tensor table = Tensor::randn({7, 4}, rng, 1.0, true);
    std::vector<int> ids{3, 3, 0, 6};
    Tensor weights = Tensor::randn({4, 4}, rng, 1.0, true);
    REQUIRE(gradcheck([&] { return sum(mul(embedding_lookup(table, ids), weights)); }, {table}));
}

TEST_CASE("conv2d passes finite-difference checks") {
    Rng rng(10);
    Tensor x = Tensor::randn({2, 2, 5, 5}, rng, 1.0, true);
    Tensor w = Tensor::randn({3, 3, 2, 3}, rng, 0.5, true);
    Tensor b = Tensor::randn({3}, rng, 0.5, true);
    REQUIRE(gradcheck([&] { return mean(conv2d(x, w, b, 1)); }, {x, w, b}));
    REQUIRE(gradcheck([&] { return mean(conv2d(x, w, b, 0)); }, {x, w, b}));
}

TEST_CASE("three-layer mlp with cross-entropy matches finite differences") {
    Rng rng(11);
    Tensor x = Tensor::randn({4, 6}, rng, 1.0, false);
    Tensor w1 = Tensor::randn({6, 8}, rng, 0.5, true);
    Tensor b1 = Tensor::zeros({8}, true);
    Tensor w2 = Tensor::randn({8, 8}, rng, 0.5, true);
    Tensor b2 = Tensor::zeros({8}, true);
    Tensor w3 = Tensor::randn({8, 3}, rng, 0.5, true);
    Tensor b3 = Tensor::zeros({3}, true);
    std::vector<int> y{0, 2, 1, 2};
    auto build = [&] {
        Tensor h1 = gelu(add(matmul(x, w1), b1));
        Tensor h2 = gelu(add(matmul(h1, w2), b2));
        return cross_entropy(add(matmul(h2, w3), b3), y);
    };
    REQUIRE(gradcheck(build, {w1, b1, w2, b2, w3, b3}));
}

TEST_CASE("gumbel noise node is constant in backward") {
    Rng rng(12);
    Tensor logits = Tensor::randn({2, 4}, rng, 1.0, true);
    Tensor g = gumbel_like(logits, rng);
    REQUIRE_FALSE(g.requires_grad());
    REQUIRE(gradcheck([&] { return sum(mul(softmax_rows(add(logits, g)), logits)); }, {logits}));
}

TEST_CASE("gradients accumulate across backward passes on fresh graphs") {
    Tensor p = Tensor::from_data({2}, {1.0, 2.0}, true);
    backward(sum(p));
    backward(sum(mul(p, p)));
    REQUIRE(p.grad()[0] == 1.0 + 2.0);
    REQUIRE(p.grad()[1] == 1.0 + 4.0);
    p.zero_grad();
    REQUIRE(p.grad()[0] == 0.0);
}

TEST_CASE("adamw closed forms") {
    SECTION("zero gradient applies decoupled decay only") {
        Tensor p = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
        p.grad();  // allocate zeros
        AdamWConfig cfg;
        cfg.lr = 0.1;
        cfg.weight_decay = 0.04;
        AdamW opt({p}, cfg);
        opt.step();
        REQUIRE(close(p.at(0), 1.0 - 0.1 * 0.04 * 1.0, 1e-12, 0.0));
        REQUIRE(close(p.at(1), -2.0 + 0.1 * 0.04 * 2.0, 1e-12, 0.0));
    }
    SECTION("first step without decay moves by -lr*sign(g)") {
        Tensor p = Tensor::from_data({2}, {0.3, -0.7}, true);
        p.grad() = {0.02, -4.0};
        AdamWConfig cfg;
        cfg.lr = 0.05;
        cfg.weight_decay = 0.0;
        cfg.eps = 1e-300;
        AdamW opt({p}, cfg);
        opt.step();
        REQUIRE(close(p.at(0), 0.3 - 0.05, 1e-9));
        REQUIRE(close(p.at(1), -0.7 + 0.05, 1e-9));
    }
    SECTION("ten steps on p^2 decrease monotonically toward zero") {
        Tensor p = Tensor::scalar(1.0, true);
        AdamWConfig cfg;
        cfg.lr = 0.1;
        cfg.weight_decay = 0.0;
        AdamW opt({p}, cfg);
        double prev = 1.0;
        for (int i = 0; i < 10; ++i) {
            opt.zero_grad();
            backward(mul(p, p));
            opt.step();
            REQUIRE(p.at(0) < prev);
            REQUIRE(p.at(0) > -0.5);
            prev = p.at(0);
        }
    }
}

TEST_CASE("linear schedule endpoints and midpoint") {
    LinearSchedule sched{1e-4, 1000};
    REQUIRE(sched.at(0) == 1e-4);
    REQUIRE(sched.at(1000) == 0.0);
    REQUIRE(sched.at(1500) == 0.0);
    REQUIRE(close(sched.at(500), 5e-5, 1e-12, 0.0));
}

TEST_CASE("training trajectory is bit-deterministic for a fixed seed") {
    auto run = [] {
        Rng rng(77);
        Tensor w = Tensor::randn({4, 3}, rng, 0.5, true);
        Tensor x = Tensor::randn({8, 4}, rng, 1.0, false);
        std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
        AdamWConfig cfg;
        cfg.lr = 1e-2;
        AdamW opt({w}, cfg);
        for (int i = 0; i < 20; ++i) {
            opt.zero_grad();
            backward(cross_entropy(matmul(x, w), y));
            opt.step();
        }
        return w.data();
    };
    auto a = run();
    auto b = run();
    REQUIRE(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}
