#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "igpg/tensor.hpp"

namespace testutil {

// |a - b| <= rtol * max(|a|, |b|) + atol
inline bool close(double a, double b, double rtol = 1e-4, double atol = 1e-8) {
    return std::fabs(a - b) <= rtol * std::max(std::fabs(a), std::fabs(b)) + atol;
}

// Central finite differences of a scalar-valued evaluation against one
// parameter buffer. `eval` must rebuild the forward pass from scratch.
inline std::vector<double> fd_grad(const std::function<double()> &eval, std::vector<double> &data,
                                   double h = 1e-5) {
    std::vector<double> g(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        const double orig = data[i];
        data[i] = orig + h;
        const double fp = eval();
        data[i] = orig - h;
        const double fm = eval();
        data[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Analytic gradient of `build`'s scalar output w.r.t. each listed parameter,
// checked elementwise against central differences.
inline bool gradcheck(const std::function<igpg::Tensor()> &build, std::vector<igpg::Tensor> params,
                      double rtol = 1e-4, double atol = 1e-8) {
    igpg::Tensor loss = build();
    for (auto &p : params) p.zero_grad();
    igpg::backward(loss);
    auto eval = [&] { return build().item(); };
    for (auto &p : params) {
        const std::vector<double> analytic = p.grad();
        const std::vector<double> numeric = fd_grad(eval, p.data());
        for (size_t i = 0; i < analytic.size(); ++i) {
            if (!close(analytic[i], numeric[i], rtol, atol)) return false;
        }
    }
    return true;
}

}  // namespace testutil
