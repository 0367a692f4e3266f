#pragma once

// Dense float64 tensors with reverse-mode autodiff, sized for networks up to
// ~1e5 parameters. Single-threaded graph execution; independent graphs may
// live on separate threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace igpg {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape &shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor: non-positive extent in shape");
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape &shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Deterministic RNG. Distributions are hand-rolled on top of mt19937_64 so
// streams are identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1), safe for logs
    double uniform_open() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform_open();
        const double v = uniform_open();
        const double r = std::sqrt(-2.0 * std::log(u));
        spare_ = r * std::sin(2.0 * M_PI * v);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * v);
    }

    double gumbel() { return -std::log(-std::log(uniform_open())); }

    // uniform integer in [0, n)
    int64_t below(int64_t n) {
        // rejection sampling keeps the draw unbiased
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return static_cast<int64_t>(x % un);
    }

    // derive an independent stream; splitmix64 mixes the key
    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on demand, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backward_fn;  // accumulates node->grad into parents
    const char *op = "leaf";

    int64_t numel() const { return static_cast<int64_t>(value.size()); }

    std::vector<double> &grad_buffer() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

// Value-semantics handle onto a graph node. Copies alias the same node.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape &shape, bool requires_grad = false) {
        return from_data(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad);
    }

    static Tensor full(const Shape &shape, double v, bool requires_grad = false) {
        return from_data(shape, std::vector<double>(shape_numel(shape), v), requires_grad);
    }

    static Tensor from_data(const Shape &shape, std::vector<double> data, bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
            throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match data length " +
                                        std::to_string(data.size()));
        }
        auto node = std::make_shared<TensorNode>();
        node->shape = shape;
        node->value = std::move(data);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    static Tensor randn(const Shape &shape, Rng &rng, double stddev = 1.0, bool requires_grad = false) {
        std::vector<double> d(shape_numel(shape));
        for (auto &x : d) x = rng.normal() * stddev;
        return from_data(shape, std::move(d), requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const Shape &shape() const { return node_->shape; }
    int64_t numel() const { return node_->numel(); }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    bool requires_grad() const { return node_->requires_grad; }

    std::vector<double> &data() { return node_->value; }
    const std::vector<double> &data() const { return node_->value; }

    // gradient of the last backward() pass; zeros when never reached
    std::vector<double> &grad() { return node_->grad_buffer(); }

    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }

    double item() const {
        if (numel() != 1) throw std::invalid_argument("tensor: item() on non-scalar of shape " + shape_str(shape()));
        return node_->value[0];
    }

    double at(int64_t i) const { return node_->value[static_cast<size_t>(i)]; }

    std::shared_ptr<TensorNode> node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    friend Tensor make_op(const char *op, Shape shape, std::vector<double> value,
                          std::vector<Tensor> parents, std::function<void()> *out_slot);
    friend class OpBuilder;

    std::shared_ptr<TensorNode> node_;
};

// Builds an op node; the caller fills `backward` after construction so the
// lambda can capture raw node pointers without reference cycles.
class OpBuilder {
public:
    OpBuilder(const char *op, Shape shape, std::vector<Tensor> parents)
        : node_(std::make_shared<TensorNode>()) {
        node_->op = op;
        node_->shape = std::move(shape);
        node_->value.assign(static_cast<size_t>(shape_numel(node_->shape)), 0.0);
        bool rg = false;
        node_->parents.reserve(parents.size());
        for (auto &p : parents) {
            rg = rg || p.requires_grad();
            node_->parents.push_back(p.node());
        }
        node_->requires_grad = rg;
    }

    std::vector<double> &value() { return node_->value; }
    TensorNode *raw() { return node_.get(); }
    TensorNode *parent(size_t i) { return node_->parents[i].get(); }
    bool needs_grad() const { return node_->requires_grad; }

    void set_backward(std::function<void()> fn) {
        if (node_->requires_grad) node_->backward_fn = std::move(fn);
    }

    Tensor finish() { return Tensor(std::move(node_)); }

private:
    std::shared_ptr<TensorNode> node_;
};

// Topological view over the graph that produced `root`. Creation walks parent
// edges depth-first, so parents always precede their consumers in order().
class Graph {
public:
    explicit Graph(const Tensor &root) : root_(root) {
        std::unordered_set<TensorNode *> seen;
        std::vector<std::pair<TensorNode *, size_t>> stack;
        stack.emplace_back(root.node().get(), 0);
        seen.insert(root.node().get());
        while (!stack.empty()) {
            auto &[node, next] = stack.back();
            if (next < node->parents.size()) {
                TensorNode *p = node->parents[next++].get();
                if (seen.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order_.push_back(node);
                stack.pop_back();
            }
        }
    }

    const std::vector<TensorNode *> &order() const { return order_; }

    // Reverse sweep from a scalar root. Leaf gradients accumulate across
    // calls; intermediate nodes are fresh per forward pass.
    void backward() {
        TensorNode *root = root_.node().get();
        if (root->numel() != 1) {
            throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(root->shape));
        }
        for (TensorNode *n : order_) {
            if (n->requires_grad) n->grad_buffer();
        }
        root->grad_buffer()[0] += 1.0;
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            if ((*it)->backward_fn) (*it)->backward_fn();
        }
    }

private:
    Tensor root_;
    std::vector<TensorNode *> order_;
};

inline void backward(const Tensor &loss) { Graph(loss).backward(); }

// ---------------------------------------------------------------- helpers

namespace detail {

inline void check_same_shape(const char *op, const Tensor &a, const Tensor &b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    }
}

// b broadcasts over a iff b's shape is a trailing suffix of a's shape
inline bool is_suffix_broadcast(const Tensor &a, const Tensor &b) {
    if (b.ndim() > a.ndim()) return false;
    const int off = a.ndim() - b.ndim();
    for (int i = 0; i < b.ndim(); ++i) {
        if (a.shape()[static_cast<size_t>(off + i)] != b.shape()[static_cast<size_t>(i)]) return false;
    }
    return true;
}

// C[n,m] += A[n,k] * B[k,m]
inline void mm_nn(const double *a, const double *b, double *c, int64_t n, int64_t k, int64_t m) {
    for (int64_t i = 0; i < n; ++i) {
        double *ci = c + i * m;
        const double *ai = a + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double *bp = b + p * m;
            for (int64_t j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[n,m] += A[n,k] * B[m,k]^T
inline void mm_nt(const double *a, const double *b, double *c, int64_t n, int64_t k, int64_t m) {
    for (int64_t i = 0; i < n; ++i) {
        const double *ai = a + i * k;
        double *ci = c + i * m;
        for (int64_t j = 0; j < m; ++j) {
            const double *bj = b + j * k;
            double acc = 0.0;
            for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

// C[k,m] += A[n,k]^T * B[n,m]
inline void mm_tn(const double *a, const double *b, double *c, int64_t n, int64_t k, int64_t m) {
    for (int64_t i = 0; i < n; ++i) {
        const double *ai = a + i * k;
        const double *bi = b + i * m;
        for (int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            double *cp = c + p * m;
            for (int64_t j = 0; j < m; ++j) cp[j] += av * bi[j];
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------- basic ops

enum class EwKind { add, sub, mul };

inline Tensor ewise(EwKind kind, const Tensor &a, const Tensor &b) {
    const char *name = kind == EwKind::add ? "add" : kind == EwKind::sub ? "sub" : "mul";
    const bool same = a.shape() == b.shape();
    if (!same && !detail::is_suffix_broadcast(a, b)) {
        throw std::invalid_argument(std::string(name) + ": shapes " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()) + " are incompatible");
    }
    const int64_t an = a.numel(), bn = b.numel();
    OpBuilder ob(name, a.shape(), {a, b});
    auto &out = ob.value();
    const auto &av = a.data();
    const auto &bv = b.data();
    for (int64_t i = 0; i < an; ++i) {
        const double x = av[i], y = bv[i % bn];
        out[i] = kind == EwKind::add ? x + y : kind == EwKind::sub ? x - y : x * y;
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0), *pb = ob.parent(1);
        ob.set_backward([self, pa, pb, kind, an, bn] {
            const auto &g = self->grad;
            if (pa->requires_grad) {
                auto &ga = pa->grad_buffer();
                if (kind == EwKind::mul) {
                    for (int64_t i = 0; i < an; ++i) ga[i] += g[i] * pb->value[i % bn];
                } else {
                    for (int64_t i = 0; i < an; ++i) ga[i] += g[i];
                }
            }
            if (pb->requires_grad) {
                auto &gb = pb->grad_buffer();
                if (kind == EwKind::mul) {
                    for (int64_t i = 0; i < an; ++i) gb[i % bn] += g[i] * pa->value[i];
                } else if (kind == EwKind::sub) {
                    for (int64_t i = 0; i < an; ++i) gb[i % bn] -= g[i];
                } else {
                    for (int64_t i = 0; i < an; ++i) gb[i % bn] += g[i];
                }
            }
        });
    }
    return ob.finish();
}

inline Tensor add(const Tensor &a, const Tensor &b) { return ewise(EwKind::add, a, b); }
inline Tensor sub(const Tensor &a, const Tensor &b) { return ewise(EwKind::sub, a, b); }
inline Tensor mul(const Tensor &a, const Tensor &b) { return ewise(EwKind::mul, a, b); }

inline Tensor affine(const Tensor &a, double scale, double shift = 0.0) {
    OpBuilder ob("affine", a.shape(), {a});
    const auto &av = a.data();
    auto &out = ob.value();
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * scale + shift;
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa, scale] {
            auto &ga = pa->grad_buffer();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += self->grad[i] * scale;
        });
    }
    return ob.finish();
}

inline Tensor scale(const Tensor &a, double s) { return affine(a, s, 0.0); }
inline Tensor neg(const Tensor &a) { return affine(a, -1.0, 0.0); }

// forward identity, zero gradient backward
inline Tensor stop_gradient(const Tensor &a) {
    return Tensor::from_data(a.shape(), a.data(), false);
}

inline Tensor matmul(const Tensor &a, const Tensor &b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    }
    const int64_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    OpBuilder ob("matmul", {static_cast<int>(n), static_cast<int>(m)}, {a, b});
    detail::mm_nn(a.data().data(), b.data().data(), ob.value().data(), n, k, m);
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0), *pb = ob.parent(1);
        ob.set_backward([self, pa, pb, n, k, m] {
            const double *g = self->grad.data();
            if (pa->requires_grad)
                detail::mm_nt(g, pb->value.data(), pa->grad_buffer().data(), n, m, k);
            if (pb->requires_grad)
                detail::mm_tn(pa->value.data(), g, pb->grad_buffer().data(), n, k, m);
        });
    }
    return ob.finish();
}

// a [n,k] times b[m,k] transposed -> [n,m]
inline Tensor matmul_nt(const Tensor &a, const Tensor &b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1)) {
        throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    }
    const int64_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
    OpBuilder ob("matmul_nt", {static_cast<int>(n), static_cast<int>(m)}, {a, b});
    detail::mm_nt(a.data().data(), b.data().data(), ob.value().data(), n, k, m);
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0), *pb = ob.parent(1);
        ob.set_backward([self, pa, pb, n, k, m] {
            const double *g = self->grad.data();
            if (pa->requires_grad)
                detail::mm_nn(g, pb->value.data(), pa->grad_buffer().data(), n, m, k);
            if (pb->requires_grad)
                detail::mm_tn(g, pa->value.data(), pb->grad_buffer().data(), n, m, k);
        });
    }
    return ob.finish();
}

inline Tensor reshape(const Tensor &a, const Shape &shape) {
    if (shape_numel(shape) != a.numel()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    OpBuilder ob("reshape", shape, {a});
    ob.value() = a.data();
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa] {
            auto &ga = pa->grad_buffer();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += self->grad[i];
        });
    }
    return ob.finish();
}

inline Tensor concat_rows(const std::vector<Tensor> &parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    const int cols = parts[0].ndim() == 2 ? parts[0].dim(1) : -1;
    int rows = 0;
    for (const auto &p : parts) {
        if (p.ndim() != 2 || p.dim(1) != cols) {
            throw std::invalid_argument("concat_rows: all parts must be 2-d with equal column count");
        }
        rows += p.dim(0);
    }
    OpBuilder ob("concat_rows", {rows, cols}, parts);
    auto &out = ob.value();
    size_t off = 0;
    for (const auto &p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.begin() + off);
        off += p.data().size();
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw();
        std::vector<TensorNode *> ps;
        for (size_t i = 0; i < parts.size(); ++i) ps.push_back(ob.parent(i));
        ob.set_backward([self, ps] {
            size_t off = 0;
            for (TensorNode *p : ps) {
                if (p->requires_grad) {
                    auto &gp = p->grad_buffer();
                    for (size_t i = 0; i < gp.size(); ++i) gp[i] += self->grad[off + i];
                }
                off += p->value.size();
            }
        });
    }
    return ob.finish();
}

inline Tensor concat_rows(const Tensor &a, const Tensor &b) { return concat_rows(std::vector<Tensor>{a, b}); }

inline Tensor slice_rows(const Tensor &a, int r0, int r1) {
    if (a.ndim() != 2 || r0 < 0 || r1 > a.dim(0) || r0 > r1) {
        throw std::invalid_argument("slice_rows: invalid range [" + std::to_string(r0) + "," + std::to_string(r1) +
                                    ") for shape " + shape_str(a.shape()));
    }
    const int m = a.dim(1);
    OpBuilder ob("slice_rows", {r1 - r0, m}, {a});
    auto &out = ob.value();
    std::copy(a.data().begin() + static_cast<size_t>(r0) * m, a.data().begin() + static_cast<size_t>(r1) * m,
              out.begin());
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa, r0, m] {
            auto &ga = pa->grad_buffer();
            for (size_t i = 0; i < self->grad.size(); ++i) ga[static_cast<size_t>(r0) * m + i] += self->grad[i];
        });
    }
    return ob.finish();
}

inline Tensor slice_cols(const Tensor &a, int c0, int c1) {
    if (a.ndim() != 2 || c0 < 0 || c1 > a.dim(1) || c0 > c1) {
        throw std::invalid_argument("slice_cols: invalid range [" + std::to_string(c0) + "," + std::to_string(c1) +
                                    ") for shape " + shape_str(a.shape()));
    }
    const int n = a.dim(0), m = a.dim(1), w = c1 - c0;
    OpBuilder ob("slice_cols", {n, w}, {a});
    auto &out = ob.value();
    const auto &av = a.data();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < w; ++j) out[static_cast<size_t>(i) * w + j] = av[static_cast<size_t>(i) * m + c0 + j];
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa, n, m, c0, w] {
            auto &ga = pa->grad_buffer();
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < w; ++j) {
                    ga[static_cast<size_t>(i) * m + c0 + j] += self->grad[static_cast<size_t>(i) * w + j];
                }
            }
        });
    }
    return ob.finish();
}

inline Tensor concat_cols(const std::vector<Tensor> &parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    const int n = parts[0].ndim() == 2 ? parts[0].dim(0) : -1;
    int m = 0;
    for (const auto &p : parts) {
        if (p.ndim() != 2 || p.dim(0) != n) {
            throw std::invalid_argument("concat_cols: all parts must be 2-d with equal row count");
        }
        m += p.dim(1);
    }
    OpBuilder ob("concat_cols", {n, m}, parts);
    auto &out = ob.value();
    int coff = 0;
    for (const auto &p : parts) {
        const int w = p.dim(1);
        for (int i = 0; i < n; ++i) {
            std::copy(p.data().begin() + static_cast<size_t>(i) * w, p.data().begin() + static_cast<size_t>(i + 1) * w,
                      out.begin() + static_cast<size_t>(i) * m + coff);
        }
        coff += w;
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw();
        std::vector<TensorNode *> ps;
        std::vector<int> widths;
        for (size_t i = 0; i < parts.size(); ++i) {
            ps.push_back(ob.parent(i));
            widths.push_back(parts[i].dim(1));
        }
        ob.set_backward([self, ps, widths, n, m] {
            int coff = 0;
            for (size_t pi = 0; pi < ps.size(); ++pi) {
                const int w = widths[pi];
                if (ps[pi]->requires_grad) {
                    auto &gp = ps[pi]->grad_buffer();
                    for (int i = 0; i < n; ++i) {
                        for (int j = 0; j < w; ++j) {
                            gp[static_cast<size_t>(i) * w + j] += self->grad[static_cast<size_t>(i) * m + coff + j];
                        }
                    }
                }
                coff += w;
            }
        });
    }
    return ob.finish();
}

// ---------------------------------------------------------------- reductions

inline Tensor sum(const Tensor &a) {
    OpBuilder ob("sum", {1}, {a});
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    ob.value()[0] = acc;
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa] {
            const double g = self->grad[0];
            auto &ga = pa->grad_buffer();
            for (auto &x : ga) x += g;
        });
    }
    return ob.finish();
}

inline Tensor mean(const Tensor &a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

// [n,m] -> [n]
inline Tensor row_mean(const Tensor &a) {
    if (a.ndim() != 2) throw std::invalid_argument("row_mean: expected 2-d, got " + shape_str(a.shape()));
    const int n = a.dim(0), m = a.dim(1);
    OpBuilder ob("row_mean", {n}, {a});
    auto &out = ob.value();
    const auto &av = a.data();
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += av[static_cast<size_t>(i) * m + j];
        out[i] = acc / m;
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa, n, m] {
            auto &ga = pa->grad_buffer();
            for (int i = 0; i < n; ++i) {
                const double g = self->grad[i] / m;
                for (int j = 0; j < m; ++j) ga[static_cast<size_t>(i) * m + j] += g;
            }
        });
    }
    return ob.finish();
}

// [n,m] -> [1,m]
inline Tensor col_mean(const Tensor &a) {
    if (a.ndim() != 2) throw std::invalid_argument("col_mean: expected 2-d, got " + shape_str(a.shape()));
    const int n = a.dim(0), m = a.dim(1);
    OpBuilder ob("col_mean", {1, m}, {a});
    auto &out = ob.value();
    const auto &av = a.data();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) out[j] += av[static_cast<size_t>(i) * m + j] / n;
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa, n, m] {
            auto &ga = pa->grad_buffer();
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < m; ++j) ga[static_cast<size_t>(i) * m + j] += self->grad[j] / n;
            }
        });
    }
    return ob.finish();
}

// ---------------------------------------------------------------- activations

inline Tensor relu(const Tensor &a) {
    OpBuilder ob("relu", a.shape(), {a});
    const auto &av = a.data();
    auto &out = ob.value();
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa] {
            auto &ga = pa->grad_buffer();
            for (size_t i = 0; i < ga.size(); ++i) {
                if (pa->value[i] > 0.0) ga[i] += self->grad[i];
            }
        });
    }
    return ob.finish();
}

inline Tensor gelu(const Tensor &a) {
    OpBuilder ob("gelu", a.shape(), {a});
    const auto &av = a.data();
    auto &out = ob.value();
    for (size_t i = 0; i < av.size(); ++i) out[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] * M_SQRT1_2));
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa] {
            auto &ga = pa->grad_buffer();
            constexpr double inv_sqrt_2pi = 0.3989422804014327;
            for (size_t i = 0; i < ga.size(); ++i) {
                const double x = pa->value[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
                ga[i] += self->grad[i] * (cdf + x * pdf);
            }
        });
    }
    return ob.finish();
}

inline Tensor tanh_act(const Tensor &a) {
    OpBuilder ob("tanh", a.shape(), {a});
    const auto &av = a.data();
    auto &out = ob.value();
    for (size_t i = 0; i < av.size(); ++i) out[i] = std::tanh(av[i]);
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa] {
            auto &ga = pa->grad_buffer();
            for (size_t i = 0; i < ga.size(); ++i) {
                const double y = self->value[i];
                ga[i] += self->grad[i] * (1.0 - y * y);
            }
        });
    }
    return ob.finish();
}

// ---------------------------------------------------------------- softmax family

// row-wise softmax over the last dimension of a 2-d tensor
inline Tensor softmax_rows(const Tensor &a) {
    if (a.ndim() != 2) throw std::invalid_argument("softmax_rows: expected 2-d, got " + shape_str(a.shape()));
    const int n = a.dim(0), m = a.dim(1);
    OpBuilder ob("softmax", a.shape(), {a});
    const auto &av = a.data();
    auto &out = ob.value();
    for (int i = 0; i < n; ++i) {
        const double *row = av.data() + static_cast<size_t>(i) * m;
        double *orow = out.data() + static_cast<size_t>(i) * m;
        double mx = row[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < m; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (int j = 0; j < m; ++j) orow[j] /= z;
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa, n, m] {
            auto &ga = pa->grad_buffer();
            for (int i = 0; i < n; ++i) {
                const double *y = self->value.data() + static_cast<size_t>(i) * m;
                const double *g = self->grad.data() + static_cast<size_t>(i) * m;
                double dot = 0.0;
                for (int j = 0; j < m; ++j) dot += y[j] * g[j];
                double *gr = ga.data() + static_cast<size_t>(i) * m;
                for (int j = 0; j < m; ++j) gr[j] += y[j] * (g[j] - dot);
            }
        });
    }
    return ob.finish();
}

inline Tensor log_softmax_rows(const Tensor &a) {
    if (a.ndim() != 2) throw std::invalid_argument("log_softmax_rows: expected 2-d, got " + shape_str(a.shape()));
    const int n = a.dim(0), m = a.dim(1);
    OpBuilder ob("log_softmax", a.shape(), {a});
    const auto &av = a.data();
    auto &out = ob.value();
    for (int i = 0; i < n; ++i) {
        const double *row = av.data() + static_cast<size_t>(i) * m;
        double *orow = out.data() + static_cast<size_t>(i) * m;
        double mx = row[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < m; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        for (int j = 0; j < m; ++j) orow[j] = row[j] - lse;
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa, n, m] {
            auto &ga = pa->grad_buffer();
            for (int i = 0; i < n; ++i) {
                const double *lsm = self->value.data() + static_cast<size_t>(i) * m;
                const double *g = self->grad.data() + static_cast<size_t>(i) * m;
                double gsum = 0.0;
                for (int j = 0; j < m; ++j) gsum += g[j];
                double *gr = ga.data() + static_cast<size_t>(i) * m;
                for (int j = 0; j < m; ++j) gr[j] += g[j] - std::exp(lsm[j]) * gsum;
            }
        });
    }
    return ob.finish();
}

// mean negative log-likelihood of integer targets under row-wise softmax
inline Tensor cross_entropy(const Tensor &logits, const std::vector<int> &targets) {
    if (logits.ndim() != 2 || static_cast<size_t>(logits.dim(0)) != targets.size()) {
        throw std::invalid_argument("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                                    std::to_string(targets.size()) + " targets");
    }
    const int n = logits.dim(0), m = logits.dim(1);
    for (int t : targets) {
        if (t < 0 || t >= m) throw std::invalid_argument("cross_entropy: target class out of range");
    }
    OpBuilder ob("cross_entropy", {1}, {logits});
    const auto &lv = logits.data();
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double *row = lv.data() + static_cast<size_t>(i) * m;
        double mx = row[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < m; ++j) z += std::exp(row[j] - mx);
        loss += mx + std::log(z) - row[targets[static_cast<size_t>(i)]];
    }
    ob.value()[0] = loss / n;
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pa = ob.parent(0);
        ob.set_backward([self, pa, targets, n, m] {
            const double g = self->grad[0] / n;
            auto &ga = pa->grad_buffer();
            for (int i = 0; i < n; ++i) {
                const double *row = pa->value.data() + static_cast<size_t>(i) * m;
                double mx = row[0];
                for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
                double z = 0.0;
                for (int j = 0; j < m; ++j) z += std::exp(row[j] - mx);
                double *gr = ga.data() + static_cast<size_t>(i) * m;
                for (int j = 0; j < m; ++j) gr[j] += g * std::exp(row[j] - mx) / z;
                gr[targets[static_cast<size_t>(i)]] -= g;
            }
        });
    }
    return ob.finish();
}

// ---------------------------------------------------------------- layer norm

inline Tensor layer_norm(const Tensor &x, const Tensor &gain, const Tensor &bias, double eps = 1e-5) {
    if (x.ndim() != 2 || gain.ndim() != 1 || bias.ndim() != 1 || gain.dim(0) != x.dim(1) || bias.dim(0) != x.dim(1)) {
        throw std::invalid_argument("layer_norm: expected x [n,d], gain [d], bias [d]");
    }
    const int n = x.dim(0), d = x.dim(1);
    OpBuilder ob("layer_norm", x.shape(), {x, gain, bias});
    const auto &xv = x.data();
    const auto &gv = gain.data();
    const auto &bv = bias.data();
    auto &out = ob.value();
    std::vector<double> inv_std(static_cast<size_t>(n));
    std::vector<double> xhat(xv.size());
    for (int i = 0; i < n; ++i) {
        const double *row = xv.data() + static_cast<size_t>(i) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += row[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= d;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(i)] = is;
        for (int j = 0; j < d; ++j) {
            const double h = (row[j] - mu) * is;
            xhat[static_cast<size_t>(i) * d + j] = h;
            out[static_cast<size_t>(i) * d + j] = h * gv[j] + bv[j];
        }
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *px = ob.parent(0), *pg = ob.parent(1), *pb = ob.parent(2);
        ob.set_backward([self, px, pg, pb, n, d, inv_std = std::move(inv_std), xhat = std::move(xhat)] {
            for (int i = 0; i < n; ++i) {
                const double *g = self->grad.data() + static_cast<size_t>(i) * d;
                const double *h = xhat.data() + static_cast<size_t>(i) * d;
                if (pg->requires_grad) {
                    auto &gg = pg->grad_buffer();
                    for (int j = 0; j < d; ++j) gg[j] += g[j] * h[j];
                }
                if (pb->requires_grad) {
                    auto &gb = pb->grad_buffer();
                    for (int j = 0; j < d; ++j) gb[j] += g[j];
                }
                if (px->requires_grad) {
                    auto &gx = px->grad_buffer();
                    double mean_dh = 0.0, mean_dhh = 0.0;
                    for (int j = 0; j < d; ++j) {
                        const double dh = g[j] * pg->value[j];
                        mean_dh += dh;
                        mean_dhh += dh * h[j];
                    }
                    mean_dh /= d;
                    mean_dhh /= d;
                    const double is = inv_std[static_cast<size_t>(i)];
                    double *gr = gx.data() + static_cast<size_t>(i) * d;
                    for (int j = 0; j < d; ++j) {
                        const double dh = g[j] * pg->value[j];
                        gr[j] += is * (dh - mean_dh - h[j] * mean_dhh);
                    }
                }
            }
        });
    }
    return ob.finish();
}

// ---------------------------------------------------------------- lookup

inline Tensor embedding_lookup(const Tensor &table, const std::vector<int> &ids) {
    if (table.ndim() != 2) throw std::invalid_argument("embedding_lookup: table must be 2-d");
    const int v = table.dim(0), d = table.dim(1);
    for (int id : ids) {
        if (id < 0 || id >= v) throw std::invalid_argument("embedding_lookup: id out of range");
    }
    const int n = static_cast<int>(ids.size());
    OpBuilder ob("embedding_lookup", {n, d}, {table});
    auto &out = ob.value();
    const auto &tv = table.data();
    for (int i = 0; i < n; ++i) {
        std::copy(tv.begin() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d,
                  tv.begin() + static_cast<size_t>(ids[static_cast<size_t>(i)] + 1) * d,
                  out.begin() + static_cast<size_t>(i) * d);
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *pt = ob.parent(0);
        ob.set_backward([self, pt, ids, d] {
            auto &gt = pt->grad_buffer();
            for (size_t i = 0; i < ids.size(); ++i) {
                const double *g = self->grad.data() + i * d;
                double *row = gt.data() + static_cast<size_t>(ids[i]) * d;
                for (int j = 0; j < d; ++j) row[j] += g[j];
            }
        });
    }
    return ob.finish();
}

// ---------------------------------------------------------------- conv2d

// x [B,Cin,H,W], w [kh,kw,Cin,Cout], bias [Cout]; stride 1
inline Tensor conv2d(const Tensor &x, const Tensor &w, const Tensor &bias, int pad) {
    if (x.ndim() != 4 || w.ndim() != 4 || bias.ndim() != 1) {
        throw std::invalid_argument("conv2d: expected x [B,C,H,W], w [kh,kw,Cin,Cout], bias [Cout]");
    }
    const int B = x.dim(0), cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int kh = w.dim(0), kw = w.dim(1), wcin = w.dim(2), cout = w.dim(3);
    if (wcin != cin || bias.dim(0) != cout) {
        throw std::invalid_argument("conv2d: channel mismatch between input " + shape_str(x.shape()) +
                                    " and kernel " + shape_str(w.shape()));
    }
    const int oh = H + 2 * pad - kh + 1, ow = W + 2 * pad - kw + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: kernel larger than padded input");
    OpBuilder ob("conv2d", {B, cout, oh, ow}, {x, w, bias});
    const auto &xv = x.data();
    const auto &wv = w.data();
    const auto &bv = bias.data();
    auto &out = ob.value();
    auto xat = [&](int b, int c, int i, int j) {
        return xv[((static_cast<size_t>(b) * cin + c) * H + i) * W + j];
    };
    auto wat = [&](int ki, int kj, int ci, int co) {
        return wv[((static_cast<size_t>(ki) * kw + kj) * cin + ci) * cout + co];
    };
    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < cout; ++co) {
            for (int i = 0; i < oh; ++i) {
                for (int j = 0; j < ow; ++j) {
                    double acc = bv[co];
                    for (int ki = 0; ki < kh; ++ki) {
                        const int si = i + ki - pad;
                        if (si < 0 || si >= H) continue;
                        for (int kj = 0; kj < kw; ++kj) {
                            const int sj = j + kj - pad;
                            if (sj < 0 || sj >= W) continue;
                            for (int ci = 0; ci < cin; ++ci) acc += xat(b, ci, si, sj) * wat(ki, kj, ci, co);
                        }
                    }
                    out[((static_cast<size_t>(b) * cout + co) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *px = ob.parent(0), *pw = ob.parent(1), *pb = ob.parent(2);
        ob.set_backward([self, px, pw, pb, B, cin, H, W, kh, kw, cout, oh, ow, pad] {
            const auto &g = self->grad;
            auto gat = [&](int b, int co, int i, int j) {
                return g[((static_cast<size_t>(b) * cout + co) * oh + i) * ow + j];
            };
            if (pb->requires_grad) {
                auto &gb = pb->grad_buffer();
                for (int b = 0; b < B; ++b) {
                    for (int co = 0; co < cout; ++co) {
                        double acc = 0.0;
                        for (int i = 0; i < oh; ++i) {
                            for (int j = 0; j < ow; ++j) acc += gat(b, co, i, j);
                        }
                        gb[co] += acc;
                    }
                }
            }
            if (pw->requires_grad) {
                auto &gw = pw->grad_buffer();
                for (int b = 0; b < B; ++b) {
                    for (int co = 0; co < cout; ++co) {
                        for (int i = 0; i < oh; ++i) {
                            for (int j = 0; j < ow; ++j) {
                                const double gv = gat(b, co, i, j);
                                if (gv == 0.0) continue;
                                for (int ki = 0; ki < kh; ++ki) {
                                    const int si = i + ki - pad;
                                    if (si < 0 || si >= H) continue;
                                    for (int kj = 0; kj < kw; ++kj) {
                                        const int sj = j + kj - pad;
                                        if (sj < 0 || sj >= W) continue;
                                        for (int ci = 0; ci < cin; ++ci) {
                                            gw[((static_cast<size_t>(ki) * kw + kj) * cin + ci) * cout + co] +=
                                                gv * px->value[((static_cast<size_t>(b) * cin + ci) * H + si) * W + sj];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if (px->requires_grad) {
                auto &gx = px->grad_buffer();
                for (int b = 0; b < B; ++b) {
                    for (int co = 0; co < cout; ++co) {
                        for (int i = 0; i < oh; ++i) {
                            for (int j = 0; j < ow; ++j) {
                                const double gv = gat(b, co, i, j);
                                if (gv == 0.0) continue;
                                for (int ki = 0; ki < kh; ++ki) {
                                    const int si = i + ki - pad;
                                    if (si < 0 || si >= H) continue;
                                    for (int kj = 0; kj < kw; ++kj) {
                                        const int sj = j + kj - pad;
                                        if (sj < 0 || sj >= W) continue;
                                        for (int ci = 0; ci < cin; ++ci) {
                                            gx[((static_cast<size_t>(b) * cin + ci) * H + si) * W + sj] +=
                                                gv * pw->value[((static_cast<size_t>(ki) * kw + kj) * cin + ci) * cout + co];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return ob.finish();
}

// mean over non-overlapping 2x2 windows; x [B,C,H,W] with even H, W
inline Tensor avg_pool2(const Tensor &x) {
    if (x.ndim() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
        throw std::invalid_argument("avg_pool2: expected [B,C,H,W] with even H and W, got " + shape_str(x.shape()));
    }
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int oh = H / 2, ow = W / 2;
    OpBuilder ob("avg_pool2", {B, C, oh, ow}, {x});
    const auto &xv = x.data();
    auto &out = ob.value();
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const size_t base = (static_cast<size_t>(b) * C + c) * H * W;
            const size_t obase = (static_cast<size_t>(b) * C + c) * oh * ow;
            for (int i = 0; i < oh; ++i) {
                for (int j = 0; j < ow; ++j) {
                    const size_t p = base + static_cast<size_t>(2 * i) * W + 2 * j;
                    out[obase + static_cast<size_t>(i) * ow + j] =
                        0.25 * (xv[p] + xv[p + 1] + xv[p + W] + xv[p + W + 1]);
                }
            }
        }
    }
    if (ob.needs_grad()) {
        TensorNode *self = ob.raw(), *px = ob.parent(0);
        ob.set_backward([self, px, B, C, H, W, oh, ow] {
            auto &gx = px->grad_buffer();
            for (int b = 0; b < B; ++b) {
                for (int c = 0; c < C; ++c) {
                    const size_t base = (static_cast<size_t>(b) * C + c) * H * W;
                    const size_t obase = (static_cast<size_t>(b) * C + c) * oh * ow;
                    for (int i = 0; i < oh; ++i) {
                        for (int j = 0; j < ow; ++j) {
                            const double g = 0.25 * self->grad[obase + static_cast<size_t>(i) * ow + j];
                            const size_t p = base + static_cast<size_t>(2 * i) * W + 2 * j;
                            gx[p] += g;
                            gx[p + 1] += g;
                            gx[p + W] += g;
                            gx[p + W + 1] += g;
                        }
                    }
                }
            }
        });
    }
    return ob.finish();
}

// ---------------------------------------------------------------- misc

inline Tensor gumbel_like(const Tensor &a, Rng &rng) {
    std::vector<double> d(a.numel());
    for (auto &x : d) x = rng.gumbel();
    return Tensor::from_data(a.shape(), std::move(d));
}

inline int argmax_row(const Tensor &a, int row) {
    const int m = a.dim(a.ndim() - 1);
    const double *p = a.data().data() + static_cast<size_t>(row) * m;
    int best = 0;
    for (int j = 1; j < m; ++j) {
        if (p[j] > p[best]) best = j;
    }
    return best;
}

inline bool all_finite(const Tensor &a) {
    for (double v : a.data()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace igpg
