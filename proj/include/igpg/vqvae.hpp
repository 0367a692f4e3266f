#pragma once

// Gumbel VQ-VAE over parameter chunks. The encoder maps a chunk to an l x m
// logit grid, the quantizer mixes codebook entries with Gumbel-softmax
// weights, and the decoder reconstructs the chunk. Training minimizes
//
//   masked reconstruction + gamma * commitment + beta * codebook term
//
// with stop-gradients routing the two auxiliary terms: the commitment term
// only reaches the encoder, the codebook term only reaches the codebook.
// Inference is the deterministic codec: tokenize = argmax over noise-free
// logits, detokenize = decode of one-hot codebook rows.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "igpg/layout.hpp"
#include "igpg/optim.hpp"
#include "igpg/serialize.hpp"
#include "igpg/tensor.hpp"

namespace igpg {

struct TemperatureSchedule {
    double tau_max = 1.0;
    double tau_min = 1e-4;
    int64_t cycle_length = 1000;
};

// exponential decay from tau_max to tau_min within each cycle, then reset
inline double temperature_at(int64_t step, const TemperatureSchedule &sched) {
    if (step < 0) throw std::invalid_argument("temperature_at: negative step");
    if (sched.tau_max <= sched.tau_min || sched.tau_min <= 0.0 || sched.cycle_length < 1) {
        throw std::invalid_argument("temperature_at: need tau_max > tau_min > 0 and a positive cycle");
    }
    if (sched.cycle_length == 1) return sched.tau_min;
    const int64_t pos = step % sched.cycle_length;
    const double frac = static_cast<double>(pos) / static_cast<double>(sched.cycle_length - 1);
    return sched.tau_max * std::pow(sched.tau_min / sched.tau_max, frac);
}

struct LossConfig {
    double beta = 1.0;    // codebook term
    double gamma = 0.25;  // commitment term
};

struct VqConfig {
    int chunk_size = 256;      // K
    int tokens_per_chunk = 8;  // l
    int codebook_size = 256;   // m
    int code_dim = 64;
    int hidden = 256;
    LossConfig loss;
    TemperatureSchedule schedule;
};

struct VqVaeModel {
    VqConfig cfg;
    Tensor enc_w1, enc_b1, enc_w2, enc_b2;  // K -> hidden -> l*m
    Tensor dec_w1, dec_b1, dec_w2, dec_b2;  // l*code_dim -> hidden -> K
    Tensor codebook;                        // [m, code_dim]
    // frozen input standardization, fitted on the training corpus
    double in_mean = 0.0;
    double in_scale = 1.0;

    std::vector<Tensor> params() const {
        return {enc_w1, enc_b1, enc_w2, enc_b2, dec_w1, dec_b1, dec_w2, dec_b2, codebook};
    }

    std::vector<Tensor> encoder_params() const { return {enc_w1, enc_b1, enc_w2, enc_b2}; }
    std::vector<Tensor> decoder_params() const { return {dec_w1, dec_b1, dec_w2, dec_b2}; }
};

inline VqVaeModel make_vqvae(const VqConfig &cfg, Rng &rng) {
    if (cfg.codebook_size < 2) throw std::invalid_argument("vqvae: codebook needs at least 2 entries");
    VqVaeModel m;
    m.cfg = cfg;
    const int lm = cfg.tokens_per_chunk * cfg.codebook_size;
    const int ld = cfg.tokens_per_chunk * cfg.code_dim;
    m.enc_w1 = Tensor::randn({cfg.chunk_size, cfg.hidden}, rng, std::sqrt(2.0 / cfg.chunk_size), true);
    m.enc_b1 = Tensor::zeros({cfg.hidden}, true);
    m.enc_w2 = Tensor::randn({cfg.hidden, lm}, rng, std::sqrt(2.0 / cfg.hidden), true);
    m.enc_b2 = Tensor::zeros({lm}, true);
    m.dec_w1 = Tensor::randn({ld, cfg.hidden}, rng, std::sqrt(2.0 / ld), true);
    m.dec_b1 = Tensor::zeros({cfg.hidden}, true);
    m.dec_w2 = Tensor::randn({cfg.hidden, cfg.chunk_size}, rng, std::sqrt(2.0 / cfg.hidden), true);
    m.dec_b2 = Tensor::zeros({cfg.chunk_size}, true);
    m.codebook = Tensor::randn({cfg.codebook_size, cfg.code_dim}, rng, 1.0 / std::sqrt(cfg.code_dim), true);
    return m;
}

// ---------------------------------------------------------------- forward

// X [B, K] -> logits [B*l, m]
inline Tensor vq_encode_batch(const VqVaeModel &m, const Tensor &x) {
    if (x.ndim() != 2 || x.dim(1) != m.cfg.chunk_size) {
        throw std::invalid_argument("encode: expected [B," + std::to_string(m.cfg.chunk_size) + "], got " +
                                    shape_str(x.shape()));
    }
    const Tensor xs = affine(x, 1.0 / m.in_scale, -m.in_mean / m.in_scale);
    const Tensor h = gelu(add(matmul(xs, m.enc_w1), m.enc_b1));
    const Tensor logits = add(matmul(h, m.enc_w2), m.enc_b2);
    return reshape(logits, {x.dim(0) * m.cfg.tokens_per_chunk, m.cfg.codebook_size});
}

inline Tensor vq_encode(const VqVaeModel &m, const std::vector<double> &chunk) {
    if (static_cast<int>(chunk.size()) != m.cfg.chunk_size) {
        throw std::invalid_argument("encode: chunk length " + std::to_string(chunk.size()) + ", expected " +
                                    std::to_string(m.cfg.chunk_size));
    }
    return vq_encode_batch(m, Tensor::from_data({1, m.cfg.chunk_size}, chunk));
}

struct QuantizeResult {
    Tensor y;                  // [n, m], rows sum to 1
    Tensor z_q;                // [n, code_dim], y-weighted codebook mix
    std::vector<int> indices;  // argmax_j y per row
};

// y_j = exp((pi_j + g_j)/tau) / sum_i exp((pi_i + g_i)/tau); z_q = sum_j y_j e_j.
// Noise is a constant; the result is differentiable w.r.t. logits and codebook.
inline QuantizeResult gumbel_quantize(const Tensor &codebook, const Tensor &logits, double tau,
                                      const Tensor *noise = nullptr) {
    if (tau <= 0.0) throw std::invalid_argument("gumbel_quantize: temperature must be positive");
    if (noise != nullptr && noise->shape() != logits.shape()) {
        throw std::invalid_argument("gumbel_quantize: noise shape mismatch");
    }
    Tensor pre = noise ? add(logits, *noise) : logits;
    QuantizeResult out;
    out.y = softmax_rows(scale(pre, 1.0 / tau));
    out.z_q = matmul(out.y, codebook);
    out.indices.resize(static_cast<size_t>(out.y.dim(0)));
    for (int i = 0; i < out.y.dim(0); ++i) out.indices[static_cast<size_t>(i)] = argmax_row(out.y, i);
    return out;
}

// z_q [n, code_dim] with n a multiple of l -> chunks [n/l, K]
inline Tensor vq_decode_batch(const VqVaeModel &m, const Tensor &z_q) {
    const int ld = m.cfg.tokens_per_chunk * m.cfg.code_dim;
    if (z_q.ndim() != 2 || z_q.dim(1) != m.cfg.code_dim || z_q.dim(0) % m.cfg.tokens_per_chunk != 0) {
        throw std::invalid_argument("decode: expected [B*l," + std::to_string(m.cfg.code_dim) + "], got " +
                                    shape_str(z_q.shape()));
    }
    const int batch = z_q.dim(0) / m.cfg.tokens_per_chunk;
    const Tensor flat = reshape(z_q, {batch, ld});
    const Tensor h = gelu(add(matmul(flat, m.dec_w1), m.dec_b1));
    const Tensor xn = add(matmul(h, m.dec_w2), m.dec_b2);
    return affine(xn, m.in_scale, m.in_mean);
}

// ---------------------------------------------------------------- loss

struct VqLossParts {
    Tensor total;
    Tensor reconstruction;
    Tensor commitment;
    Tensor codebook;
};

// Masked three-term objective. The mask gates the reconstruction term only;
// reductions are means over unmasked positions / elements.
inline VqLossParts vqvae_loss(const Tensor &theta, const Tensor &theta_hat, const Tensor &z, const Tensor &z_q,
                              const Tensor &mask, const LossConfig &cfg) {
    if (theta.shape() != theta_hat.shape() || theta.shape() != mask.shape()) {
        throw std::invalid_argument("vqvae_loss: theta/theta_hat/mask shapes differ");
    }
    if (z.shape() != z_q.shape()) throw std::invalid_argument("vqvae_loss: z and z_q shapes differ");
    double mask_count = 0.0;
    for (double v : mask.data()) mask_count += v;

    const Tensor diff = mul(mask, sub(theta, theta_hat));
    const Tensor recon = scale(sum(mul(diff, diff)), mask_count > 0.0 ? 1.0 / mask_count : 0.0);

    const Tensor cdiff = sub(z, stop_gradient(z_q));
    const Tensor commit = mean(mul(cdiff, cdiff));

    const Tensor bdiff = sub(stop_gradient(z), z_q);
    const Tensor cbook = mean(mul(bdiff, bdiff));

    VqLossParts parts;
    parts.reconstruction = recon;
    parts.commitment = commit;
    parts.codebook = cbook;
    parts.total = add(recon, add(scale(commit, cfg.gamma), scale(cbook, cfg.beta)));
    return parts;
}

// Full training-path forward for a batch of chunks. The codebook term gets a
// y-detached mix so its gradient reaches only the codebook; z is the
// noise-free soft code with the codebook held constant, so the commitment
// term reaches only the encoder.
struct VqForwardOut {
    Tensor theta_hat;
    Tensor z;
    Tensor z_q;          // full mix, feeds the decoder
    Tensor z_q_detached; // y under stop-gradient, feeds the codebook term
    Tensor logits;
    std::vector<int> indices;
};

inline VqForwardOut vq_forward_batch(const VqVaeModel &m, const Tensor &x, double tau, const Tensor *noise) {
    VqForwardOut out;
    out.logits = vq_encode_batch(m, x);
    QuantizeResult q = gumbel_quantize(m.codebook, out.logits, tau, noise);
    out.z_q = q.z_q;
    out.indices = std::move(q.indices);
    out.z_q_detached = matmul(stop_gradient(q.y), m.codebook);
    out.z = matmul(softmax_rows(out.logits), stop_gradient(m.codebook));
    out.theta_hat = vq_decode_batch(m, out.z_q);
    return out;
}

inline VqLossParts vq_training_loss(const VqVaeModel &m, const Tensor &x, const Tensor &mask, double tau,
                                    const Tensor *noise) {
    const VqForwardOut f = vq_forward_batch(m, x, tau, noise);
    return vqvae_loss(x, f.theta_hat, f.z, f.z_q_detached, mask, m.cfg.loss);
}

// ---------------------------------------------------------------- codec

inline std::vector<int> tokenize(const VqVaeModel &m, const std::vector<double> &chunk) {
    const Tensor logits = vq_encode(m, chunk);
    std::vector<int> tokens(static_cast<size_t>(m.cfg.tokens_per_chunk));
    for (int i = 0; i < m.cfg.tokens_per_chunk; ++i) tokens[static_cast<size_t>(i)] = argmax_row(logits, i);
    return tokens;
}

inline std::vector<double> detokenize(const VqVaeModel &m, const std::vector<int> &tokens) {
    if (static_cast<int>(tokens.size()) != m.cfg.tokens_per_chunk) {
        throw std::invalid_argument("detokenize: expected " + std::to_string(m.cfg.tokens_per_chunk) + " tokens");
    }
    for (int t : tokens) {
        if (t < 0 || t >= m.cfg.codebook_size) throw std::invalid_argument("detokenize: token out of range");
    }
    const Tensor z_q = embedding_lookup(stop_gradient(m.codebook), tokens);
    return vq_decode_batch(m, z_q).data();
}

// whole flat vectors: chunk, tokenize each chunk, concatenate (k*l tokens)
inline std::vector<int> tokenize_vector(const VqVaeModel &m, const std::vector<double> &values) {
    const ChunkSet cs = chunk(values, m.cfg.chunk_size);
    std::vector<double> xd;
    xd.reserve(cs.chunks.size() * static_cast<size_t>(m.cfg.chunk_size));
    for (const auto &c : cs.chunks) xd.insert(xd.end(), c.begin(), c.end());
    const Tensor x = Tensor::from_data({static_cast<int>(cs.count()), m.cfg.chunk_size}, std::move(xd));
    const Tensor logits = vq_encode_batch(m, x);
    std::vector<int> tokens(static_cast<size_t>(logits.dim(0)));
    for (int i = 0; i < logits.dim(0); ++i) tokens[static_cast<size_t>(i)] = argmax_row(logits, i);
    return tokens;
}

// inverse up to reconstruction error: decode k*l tokens, drop the pad tail
inline std::vector<double> detokenize_vector(const VqVaeModel &m, const std::vector<int> &tokens,
                                             int64_t original_length) {
    if (tokens.empty() || static_cast<int64_t>(tokens.size()) % m.cfg.tokens_per_chunk != 0) {
        throw std::invalid_argument("detokenize_vector: token count must be a positive multiple of l");
    }
    for (int t : tokens) {
        if (t < 0 || t >= m.cfg.codebook_size) throw std::invalid_argument("detokenize_vector: token out of range");
    }
    const Tensor z_q = embedding_lookup(stop_gradient(m.codebook), tokens);
    const Tensor chunks = vq_decode_batch(m, z_q);
    const auto &cv = chunks.data();
    if (original_length > static_cast<int64_t>(cv.size())) {
        throw std::invalid_argument("detokenize_vector: tokens decode to fewer than original_length values");
    }
    return std::vector<double>(cv.begin(), cv.begin() + original_length);
}

// ---------------------------------------------------------------- training

struct VqTrainConfig {
    int64_t steps = 6000;
    int batch_size = 64;
    double lr = 3e-3;
    double weight_decay = 0.0;
    uint64_t seed = 1;
    bool gumbel_noise = true;
    bool verbose = false;
};

struct ChunkCorpus {
    std::vector<std::vector<double>> chunks;
    std::vector<std::vector<uint8_t>> masks;

    void add_vector(const std::vector<double> &values, int chunk_size) {
        ChunkSet cs = chunk(values, chunk_size);
        for (size_t i = 0; i < cs.chunks.size(); ++i) {
            chunks.push_back(std::move(cs.chunks[i]));
            masks.push_back(std::move(cs.mask[i]));
        }
    }
};

struct VqTrainStats {
    double final_reconstruction = 0.0;
    double final_total = 0.0;
    // token ids observed on the full corpus during the last pass of training
    std::vector<std::vector<int>> final_epoch_indices;
};

inline VqTrainStats train_vqvae(VqVaeModel &m, const ChunkCorpus &corpus, const VqTrainConfig &cfg) {
    if (corpus.chunks.empty()) throw std::invalid_argument("train_vqvae: empty corpus");
    const int K = m.cfg.chunk_size;

    // fit frozen input standardization on real (unmasked) values
    double mean = 0.0, var = 0.0;
    int64_t count = 0;
    for (size_t i = 0; i < corpus.chunks.size(); ++i) {
        for (int j = 0; j < K; ++j) {
            if (corpus.masks[i][static_cast<size_t>(j)]) {
                mean += corpus.chunks[i][static_cast<size_t>(j)];
                ++count;
            }
        }
    }
    mean /= static_cast<double>(count);
    for (size_t i = 0; i < corpus.chunks.size(); ++i) {
        for (int j = 0; j < K; ++j) {
            if (corpus.masks[i][static_cast<size_t>(j)]) {
                const double d = corpus.chunks[i][static_cast<size_t>(j)] - mean;
                var += d * d;
            }
        }
    }
    m.in_mean = mean;
    m.in_scale = std::max(std::sqrt(var / static_cast<double>(count)), 1e-8);

    Rng rng(cfg.seed);
    AdamWConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    AdamW opt(m.params(), ocfg);
    LinearSchedule sched{cfg.lr, cfg.steps};

    const int64_t n = static_cast<int64_t>(corpus.chunks.size());
    auto make_batch = [&](const std::vector<int64_t> &idx, Tensor &x, Tensor &mask) {
        std::vector<double> xd(idx.size() * static_cast<size_t>(K));
        std::vector<double> md(idx.size() * static_cast<size_t>(K));
        for (size_t i = 0; i < idx.size(); ++i) {
            const auto &c = corpus.chunks[static_cast<size_t>(idx[i])];
            const auto &mk = corpus.masks[static_cast<size_t>(idx[i])];
            for (int j = 0; j < K; ++j) {
                xd[i * K + j] = c[static_cast<size_t>(j)];
                md[i * K + j] = mk[static_cast<size_t>(j)];
            }
        }
        x = Tensor::from_data({static_cast<int>(idx.size()), K}, std::move(xd));
        mask = Tensor::from_data({static_cast<int>(idx.size()), K}, std::move(md));
    };

    VqTrainStats stats;
    for (int64_t step = 0; step < cfg.steps; ++step) {
        std::vector<int64_t> idx(static_cast<size_t>(std::min<int64_t>(cfg.batch_size, n)));
        for (auto &i : idx) i = rng.below(n);
        Tensor x, mask;
        make_batch(idx, x, mask);
        const double tau = temperature_at(step, m.cfg.schedule);
        Tensor noise;
        if (cfg.gumbel_noise) {
            noise = gumbel_like(Tensor::zeros({x.dim(0) * m.cfg.tokens_per_chunk, m.cfg.codebook_size}), rng);
        }
        opt.zero_grad();
        const VqLossParts parts =
            vq_training_loss(m, x, mask, tau, cfg.gumbel_noise ? &noise : nullptr);
        if (!all_finite(parts.total)) {
            throw std::runtime_error("train_vqvae: non-finite loss at step " + std::to_string(step));
        }
        backward(parts.total);
        opt.step(sched.at(step));
        if (step == cfg.steps - 1) {
            stats.final_reconstruction = parts.reconstruction.item();
            stats.final_total = parts.total.item();
        }
        if (cfg.verbose && (step % 500 == 0 || step == cfg.steps - 1)) {
            std::fprintf(stderr, "vqvae step %lld tau %.4g recon %.3e total %.3e\n",
                         static_cast<long long>(step), tau, parts.reconstruction.item(), parts.total.item());
        }
    }

    // one pass over the corpus along the training path (final temperature,
    // noise as configured) to log the indices each chunk received
    const double tau_final = temperature_at(cfg.steps - 1, m.cfg.schedule);
    for (int64_t i = 0; i < n; ++i) {
        Tensor x, mask;
        make_batch({i}, x, mask);
        Tensor noise;
        if (cfg.gumbel_noise) {
            noise = gumbel_like(Tensor::zeros({m.cfg.tokens_per_chunk, m.cfg.codebook_size}), rng);
        }
        const VqForwardOut f = vq_forward_batch(m, x, tau_final, cfg.gumbel_noise ? &noise : nullptr);
        stats.final_epoch_indices.push_back(f.indices);
    }
    return stats;
}

// ---------------------------------------------------------------- persistence

inline void save_vqvae(const VqVaeModel &m, const std::string &path) {
    TensorStore s;
    s.put_meta("chunk_size", std::to_string(m.cfg.chunk_size));
    s.put_meta("tokens_per_chunk", std::to_string(m.cfg.tokens_per_chunk));
    s.put_meta("codebook_size", std::to_string(m.cfg.codebook_size));
    s.put_meta("code_dim", std::to_string(m.cfg.code_dim));
    s.put_meta("hidden", std::to_string(m.cfg.hidden));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", m.cfg.loss.beta);
    s.put_meta("beta", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", m.cfg.loss.gamma);
    s.put_meta("gamma", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", m.cfg.schedule.tau_max);
    s.put_meta("tau_max", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", m.cfg.schedule.tau_min);
    s.put_meta("tau_min", buf);
    s.put_meta("cycle_length", std::to_string(m.cfg.schedule.cycle_length));
    std::snprintf(buf, sizeof(buf), "%.17g", m.in_mean);
    s.put_meta("in_mean", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", m.in_scale);
    s.put_meta("in_scale", buf);
    s.put("enc_w1", m.enc_w1);
    s.put("enc_b1", m.enc_b1);
    s.put("enc_w2", m.enc_w2);
    s.put("enc_b2", m.enc_b2);
    s.put("dec_w1", m.dec_w1);
    s.put("dec_b1", m.dec_b1);
    s.put("dec_w2", m.dec_w2);
    s.put("dec_b2", m.dec_b2);
    s.put("codebook", m.codebook);
    s.save(path, "IGPGVQ1");
}

inline VqVaeModel load_vqvae(const std::string &path) {
    const TensorStore s = TensorStore::load(path, "IGPGVQ1");
    VqVaeModel m;
    m.cfg.chunk_size = static_cast<int>(s.meta_int("chunk_size"));
    m.cfg.tokens_per_chunk = static_cast<int>(s.meta_int("tokens_per_chunk"));
    m.cfg.codebook_size = static_cast<int>(s.meta_int("codebook_size"));
    m.cfg.code_dim = static_cast<int>(s.meta_int("code_dim"));
    m.cfg.hidden = static_cast<int>(s.meta_int("hidden"));
    m.cfg.loss.beta = s.meta_double("beta");
    m.cfg.loss.gamma = s.meta_double("gamma");
    m.cfg.schedule.tau_max = s.meta_double("tau_max");
    m.cfg.schedule.tau_min = s.meta_double("tau_min");
    m.cfg.schedule.cycle_length = s.meta_int("cycle_length");
    m.in_mean = s.meta_double("in_mean");
    m.in_scale = s.meta_double("in_scale");
    m.enc_w1 = s.get("enc_w1", true);
    m.enc_b1 = s.get("enc_b1", true);
    m.enc_w2 = s.get("enc_w2", true);
    m.enc_b2 = s.get("enc_b2", true);
    m.dec_w1 = s.get("dec_w1", true);
    m.dec_b1 = s.get("dec_b1", true);
    m.dec_w2 = s.get("dec_w2", true);
    m.dec_b2 = s.get("dec_b2", true);
    m.codebook = s.get("codebook", true);
    return m;
}

}  // namespace igpg
