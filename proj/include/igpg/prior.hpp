#pragma once

// Decoder-only causal transformer over codebook tokens. The conditioning
// prefix occupies two positions (dataset embedding, architecture embedding)
// ahead of the token embeddings; prefix positions are conditioned on, never
// scored. There is no begin-of-sequence token: the first codebook token is
// predicted from the prefix alone.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "igpg/conditioning.hpp"
#include "igpg/optim.hpp"
#include "igpg/serialize.hpp"
#include "igpg/tensor.hpp"

namespace igpg {

struct PriorConfig {
    int vocab = 256;      // m, matches the tokenizer codebook
    int d_model = 128;
    int n_blocks = 4;
    int n_heads = 4;
    int n_max = 768;      // maximum token positions per forward pass
    int arch_vocab = 512; // hashed sub-token table size
};

constexpr int kPrefixLength = 2;

struct PriorBlock {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b;
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;
};

struct PriorModel {
    PriorConfig cfg;
    Tensor tok_emb;   // [vocab, d]
    Tensor pos_emb;   // [n_max + prefix, d]
    Tensor arch_emb;  // [arch_vocab, d], trained jointly with the prior
    std::vector<PriorBlock> blocks;
    Tensor lnf_g, lnf_b;
    Tensor head_w, head_b;

    std::vector<Tensor> params() const {
        std::vector<Tensor> ps{tok_emb, pos_emb, arch_emb, lnf_g, lnf_b, head_w, head_b};
        for (const auto &b : blocks) {
            for (const Tensor &t : {b.ln1_g, b.ln1_b, b.wq, b.bq, b.wk, b.bk, b.wv, b.bv, b.wo, b.bo, b.ln2_g,
                                    b.ln2_b, b.fc1_w, b.fc1_b, b.fc2_w, b.fc2_b}) {
                ps.push_back(t);
            }
        }
        return ps;
    }
};

inline PriorModel make_prior(const PriorConfig &cfg, Rng &rng) {
    if (cfg.d_model % cfg.n_heads != 0) throw std::invalid_argument("prior: d_model must divide into heads");
    PriorModel m;
    m.cfg = cfg;
    const int d = cfg.d_model;
    const double ws = 0.02;
    m.tok_emb = Tensor::randn({cfg.vocab, d}, rng, ws, true);
    m.pos_emb = Tensor::randn({cfg.n_max + kPrefixLength, d}, rng, ws, true);
    m.arch_emb = Tensor::randn({cfg.arch_vocab, d}, rng, ws, true);
    for (int i = 0; i < cfg.n_blocks; ++i) {
        PriorBlock b;
        b.ln1_g = Tensor::full({d}, 1.0, true);
        b.ln1_b = Tensor::zeros({d}, true);
        b.wq = Tensor::randn({d, d}, rng, ws, true);
        b.bq = Tensor::zeros({d}, true);
        b.wk = Tensor::randn({d, d}, rng, ws, true);
        b.bk = Tensor::zeros({d}, true);
        b.wv = Tensor::randn({d, d}, rng, ws, true);
        b.bv = Tensor::zeros({d}, true);
        b.wo = Tensor::randn({d, d}, rng, ws, true);
        b.bo = Tensor::zeros({d}, true);
        b.ln2_g = Tensor::full({d}, 1.0, true);
        b.ln2_b = Tensor::zeros({d}, true);
        b.fc1_w = Tensor::randn({d, 4 * d}, rng, ws, true);
        b.fc1_b = Tensor::zeros({4 * d}, true);
        b.fc2_w = Tensor::randn({4 * d, d}, rng, ws, true);
        b.fc2_b = Tensor::zeros({d}, true);
        m.blocks.push_back(std::move(b));
    }
    m.lnf_g = Tensor::full({d}, 1.0, true);
    m.lnf_b = Tensor::zeros({d}, true);
    m.head_w = Tensor::randn({d, cfg.vocab}, rng, ws, true);
    m.head_b = Tensor::zeros({cfg.vocab}, true);
    return m;
}

// architecture embedding as the mean of the hashed sub-token rows; stays in
// the graph so prior training updates the table
inline Tensor arch_embedding_tensor(const PriorModel &m, const std::vector<int> &arch_ids) {
    return col_mean(embedding_lookup(m.arch_emb, arch_ids));
}

inline ConditioningContext make_context(const PriorModel &m, const TaskDescriptor &task,
                                        const ArchitectureDescriptor &arch, int samples_per_class = 5) {
    ConditioningContext ctx;
    ctx.dataset_embedding = dataset_embedding(task, samples_per_class, m.cfg.d_model);
    ctx.arch_ids = arch_token_ids(arch_description(arch), m.cfg.arch_vocab);
    ctx.arch_embedding = arch_embedding_tensor(m, ctx.arch_ids).data();
    ctx.prefix_length = kPrefixLength;
    return ctx;
}

namespace detail {

inline Tensor causal_mask(int n) {
    std::vector<double> d(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) d[static_cast<size_t>(i) * n + j] = -1e30;
    }
    return Tensor::from_data({n, n}, std::move(d));
}

inline Tensor attention(const PriorBlock &b, const Tensor &x, int n_heads) {
    const int T = x.dim(0), d = x.dim(1);
    const int hd = d / n_heads;
    const Tensor q = add(matmul(x, b.wq), b.bq);
    const Tensor k = add(matmul(x, b.wk), b.bk);
    const Tensor v = add(matmul(x, b.wv), b.bv);
    const Tensor mask = causal_mask(T);
    std::vector<Tensor> heads;
    heads.reserve(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        const Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
        const Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
        const Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
        const Tensor scores = add(scale(matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(hd))), mask);
        heads.push_back(matmul(softmax_rows(scores), vh));
    }
    return add(matmul(concat_cols(heads), b.wo), b.bo);
}

}  // namespace detail

// Per-position next-token logits. Returns len(tokens)+1 rows: row i is the
// distribution for token i given the prefix and tokens < i; the final row
// predicts the continuation. An empty sequence yields the first-token row.
inline Tensor prior_forward(const PriorModel &m, const ConditioningContext &ctx, const std::vector<int> &tokens) {
    const int T = static_cast<int>(tokens.size());
    if (T > m.cfg.n_max) {
        throw std::invalid_argument("prior_forward: " + std::to_string(T) + " tokens exceed the n_max of " +
                                    std::to_string(m.cfg.n_max) + "; block-split the sequence");
    }
    for (int t : tokens) {
        if (t < 0 || t >= m.cfg.vocab) throw std::invalid_argument("prior_forward: token id out of range");
    }
    if (ctx.prompt_ids.empty() && static_cast<int>(ctx.dataset_embedding.size()) != m.cfg.d_model) {
        throw std::invalid_argument("prior_forward: dataset embedding width mismatch");
    }
    const Tensor e_d = ctx.prompt_ids.empty() ? Tensor::from_data({1, m.cfg.d_model}, ctx.dataset_embedding)
                                              : arch_embedding_tensor(m, ctx.prompt_ids);
    const Tensor e_a = arch_embedding_tensor(m, ctx.arch_ids);
    Tensor x = concat_rows(e_d, e_a);
    if (T > 0) x = concat_rows(x, embedding_lookup(m.tok_emb, tokens));
    const int rows = T + kPrefixLength;
    x = add(x, slice_rows(m.pos_emb, 0, rows));
    for (const auto &b : m.blocks) {
        x = add(x, detail::attention(b, layer_norm(x, b.ln1_g, b.ln1_b), m.cfg.n_heads));
        const Tensor h = layer_norm(x, b.ln2_g, b.ln2_b);
        x = add(x, add(matmul(gelu(add(matmul(h, b.fc1_w), b.fc1_b)), b.fc2_w), b.fc2_b));
    }
    x = layer_norm(x, m.lnf_g, m.lnf_b);
    const Tensor logits = add(matmul(x, m.head_w), m.head_b);
    return slice_rows(logits, kPrefixLength - 1, rows);
}

// mean negative log-likelihood over token positions (prefix is not scored)
inline Tensor prior_loss(const PriorModel &m, const ConditioningContext &ctx, const std::vector<int> &tokens) {
    if (tokens.empty()) throw std::invalid_argument("prior_loss: empty token sequence");
    const Tensor logits = prior_forward(m, ctx, tokens);
    return cross_entropy(slice_rows(logits, 0, static_cast<int>(tokens.size())), tokens);
}

// ---------------------------------------------------------------- sampling

struct SamplingStrategy {
    enum class Mode { greedy, top_k };
    Mode mode = Mode::greedy;
    int k = 1;
    double temperature = 1.0;
    uint64_t seed = 0;

    static SamplingStrategy greedy() { return {}; }
    static SamplingStrategy topk(int k, double temperature, uint64_t seed) {
        SamplingStrategy s;
        s.mode = Mode::top_k;
        s.k = k;
        s.temperature = temperature;
        s.seed = seed;
        return s;
    }
};

namespace detail {

inline int pick_token(const Tensor &logit_rows, int row, const SamplingStrategy &s, Rng &rng, int vocab) {
    if (s.mode == SamplingStrategy::Mode::greedy) return argmax_row(logit_rows, row);
    const double *p = logit_rows.data().data() + static_cast<size_t>(row) * vocab;
    // indices of the k largest logits, ties to the lower index
    std::vector<int> order(static_cast<size_t>(vocab));
    for (int i = 0; i < vocab; ++i) order[static_cast<size_t>(i)] = i;
    std::partial_sort(order.begin(), order.begin() + s.k, order.end(), [&](int a, int b) {
        if (p[a] != p[b]) return p[a] > p[b];
        return a < b;
    });
    std::vector<double> probs(static_cast<size_t>(s.k));
    double mx = p[order[0]];
    double z = 0.0;
    for (int i = 0; i < s.k; ++i) {
        probs[static_cast<size_t>(i)] = std::exp((p[order[static_cast<size_t>(i)]] - mx) / s.temperature);
        z += probs[static_cast<size_t>(i)];
    }
    const double u = rng.uniform() * z;
    double acc = 0.0;
    for (int i = 0; i < s.k; ++i) {
        acc += probs[static_cast<size_t>(i)];
        if (u < acc) return order[static_cast<size_t>(i)];
    }
    return order[static_cast<size_t>(s.k - 1)];
}

}  // namespace detail

// Autoregressive sampling. The forward window slides so no pass ever sees
// more than n_max token positions; context_tokens seed the window without
// being emitted.
inline std::vector<int> sample(const PriorModel &m, const ConditioningContext &ctx, int64_t length,
                               const SamplingStrategy &strategy, const std::vector<int> *context_tokens = nullptr) {
    if (strategy.mode == SamplingStrategy::Mode::top_k &&
        (strategy.k < 1 || strategy.k > m.cfg.vocab || strategy.temperature <= 0.0)) {
        throw std::invalid_argument("sample: invalid top-k parameters");
    }
    Rng rng(strategy.seed);
    std::vector<int> window = context_tokens ? *context_tokens : std::vector<int>{};
    std::vector<int> out;
    out.reserve(static_cast<size_t>(length));
    while (static_cast<int64_t>(out.size()) < length) {
        if (static_cast<int>(window.size()) >= m.cfg.n_max) {
            window.erase(window.begin(),
                         window.begin() + (static_cast<int>(window.size()) - (m.cfg.n_max - 1)));
        }
        const Tensor logits = prior_forward(m, ctx, window);
        const int next = detail::pick_token(logits, logits.dim(0) - 1, strategy, rng, m.cfg.vocab);
        out.push_back(next);
        window.push_back(next);
    }
    return out;
}

// ---------------------------------------------------------------- training

struct PriorTrainItem {
    ConditioningContext ctx;
    std::vector<int> tokens;
};

struct PriorTrainConfig {
    int64_t steps = 4000;
    double lr = 1e-3;
    double weight_decay = 0.0;
    uint64_t seed = 1;
    bool verbose = false;
};

struct PriorTrainStats {
    double final_nll = 0.0;
};

inline PriorTrainStats train_prior(PriorModel &m, const std::vector<PriorTrainItem> &items,
                                   const PriorTrainConfig &cfg) {
    if (items.empty()) throw std::invalid_argument("train_prior: no training sequences");
    for (const auto &it : items) {
        if (static_cast<int>(it.tokens.size()) > m.cfg.n_max) {
            throw std::invalid_argument("train_prior: sequence longer than n_max");
        }
    }
    Rng rng(cfg.seed);
    AdamWConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    AdamW opt(m.params(), ocfg);
    LinearSchedule sched{cfg.lr, cfg.steps};
    PriorTrainStats stats;
    double running = 0.0;
    int64_t running_n = 0;
    for (int64_t step = 0; step < cfg.steps; ++step) {
        const auto &item = items[static_cast<size_t>(rng.below(static_cast<int64_t>(items.size())))];
        opt.zero_grad();
        const Tensor loss = prior_loss(m, item.ctx, item.tokens);
        if (!all_finite(loss)) throw std::runtime_error("train_prior: non-finite loss at step " + std::to_string(step));
        backward(loss);
        opt.step(sched.at(step));
        running += loss.item();
        ++running_n;
        if (cfg.verbose && (step % 500 == 0 || step == cfg.steps - 1)) {
            std::fprintf(stderr, "prior step %lld nll %.4f\n", static_cast<long long>(step), running / running_n);
            running = 0.0;
            running_n = 0;
        }
        if (step == cfg.steps - 1) stats.final_nll = loss.item();
    }
    return stats;
}

// ---------------------------------------------------------------- persistence

inline void save_prior(const PriorModel &m, const std::string &path) {
    TensorStore s;
    s.put_meta("vocab", std::to_string(m.cfg.vocab));
    s.put_meta("d_model", std::to_string(m.cfg.d_model));
    s.put_meta("n_blocks", std::to_string(m.cfg.n_blocks));
    s.put_meta("n_heads", std::to_string(m.cfg.n_heads));
    s.put_meta("n_max", std::to_string(m.cfg.n_max));
    s.put_meta("arch_vocab", std::to_string(m.cfg.arch_vocab));
    s.put("tok_emb", m.tok_emb);
    s.put("pos_emb", m.pos_emb);
    s.put("arch_emb", m.arch_emb);
    s.put("lnf_g", m.lnf_g);
    s.put("lnf_b", m.lnf_b);
    s.put("head_w", m.head_w);
    s.put("head_b", m.head_b);
    for (size_t i = 0; i < m.blocks.size(); ++i) {
        const auto &b = m.blocks[i];
        const std::string p = "block" + std::to_string(i) + ".";
        s.put(p + "ln1_g", b.ln1_g);
        s.put(p + "ln1_b", b.ln1_b);
        s.put(p + "wq", b.wq);
        s.put(p + "bq", b.bq);
        s.put(p + "wk", b.wk);
        s.put(p + "bk", b.bk);
        s.put(p + "wv", b.wv);
        s.put(p + "bv", b.bv);
        s.put(p + "wo", b.wo);
        s.put(p + "bo", b.bo);
        s.put(p + "ln2_g", b.ln2_g);
        s.put(p + "ln2_b", b.ln2_b);
        s.put(p + "fc1_w", b.fc1_w);
        s.put(p + "fc1_b", b.fc1_b);
        s.put(p + "fc2_w", b.fc2_w);
        s.put(p + "fc2_b", b.fc2_b);
    }
    s.save(path, "IGPGPR1");
}

inline PriorModel load_prior(const std::string &path) {
    const TensorStore s = TensorStore::load(path, "IGPGPR1");
    PriorModel m;
    m.cfg.vocab = static_cast<int>(s.meta_int("vocab"));
    m.cfg.d_model = static_cast<int>(s.meta_int("d_model"));
    m.cfg.n_blocks = static_cast<int>(s.meta_int("n_blocks"));
    m.cfg.n_heads = static_cast<int>(s.meta_int("n_heads"));
    m.cfg.n_max = static_cast<int>(s.meta_int("n_max"));
    m.cfg.arch_vocab = static_cast<int>(s.meta_int("arch_vocab"));
    m.tok_emb = s.get("tok_emb", true);
    m.pos_emb = s.get("pos_emb", true);
    m.arch_emb = s.get("arch_emb", true);
    m.lnf_g = s.get("lnf_g", true);
    m.lnf_b = s.get("lnf_b", true);
    m.head_w = s.get("head_w", true);
    m.head_b = s.get("head_b", true);
    for (int i = 0; i < m.cfg.n_blocks; ++i) {
        const std::string p = "block" + std::to_string(i) + ".";
        PriorBlock b;
        b.ln1_g = s.get(p + "ln1_g", true);
        b.ln1_b = s.get(p + "ln1_b", true);
        b.wq = s.get(p + "wq", true);
        b.bq = s.get(p + "bq", true);
        b.wk = s.get(p + "wk", true);
        b.bk = s.get(p + "bk", true);
        b.wv = s.get(p + "wv", true);
        b.bv = s.get(p + "bv", true);
        b.wo = s.get(p + "wo", true);
        b.bo = s.get(p + "bo", true);
        b.ln2_g = s.get(p + "ln2_g", true);
        b.ln2_b = s.get(p + "ln2_b", true);
        b.fc1_w = s.get(p + "fc1_w", true);
        b.fc1_b = s.get(p + "fc1_b", true);
        b.fc2_w = s.get(p + "fc2_w", true);
        b.fc2_b = s.get(p + "fc2_b", true);
        m.blocks.push_back(std::move(b));
    }
    return m;
}

}  // namespace igpg
