#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "igpg/tensor.hpp"

namespace igpg {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// base_lr * (1 - step/total_steps), clamped to 0 past the end
struct LinearSchedule {
    double base_lr = 1e-4;
    int64_t total_steps = 1;

    double at(int64_t step) const {
        if (step < 0) throw std::invalid_argument("lr schedule: negative step");
        if (step >= total_steps) return 0.0;
        return base_lr * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
    }
};

// AdamW with decoupled weight decay: decay is applied to the parameter
// directly, never through the gradient moments.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0) {
            throw std::invalid_argument("adamw: betas must lie in [0, 1)");
        }
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto &p : params_) {
            m_.emplace_back(p.numel(), 0.0);
            v_.emplace_back(p.numel(), 0.0);
        }
    }

    void step() { step(cfg_.lr); }

    void step(double lr) {
        ++step_count_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
        for (size_t pi = 0; pi < params_.size(); ++pi) {
            auto &p = params_[pi].data();
            const auto &g = params_[pi].grad();
            if (g.size() != p.size()) {
                throw std::invalid_argument("adamw: gradient size mismatch for parameter " + std::to_string(pi));
            }
            auto &m = m_[pi];
            auto &v = v_[pi];
            for (size_t i = 0; i < p.size(); ++i) {
                p[i] -= lr * cfg_.weight_decay * p[i];
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    void zero_grad() {
        for (auto &p : params_) p.zero_grad();
    }

    int64_t steps() const { return step_count_; }
    const AdamWConfig &config() const { return cfg_; }

private:
    std::vector<Tensor> params_;
    AdamWConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    int64_t step_count_ = 0;
};

}  // namespace igpg
