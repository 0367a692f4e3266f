#pragma once

// Procedural classification tasks on 8x8 grayscale images. Every sample is a
// pure function of (task seed, split, class, index), so splits are stable
// across runs and machines. Test splits are exactly class-balanced.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "igpg/tensor.hpp"

namespace igpg {

constexpr int kImageSide = 8;
constexpr int kImageSize = kImageSide * kImageSide;

enum class TaskKind { blob, glyph };

struct TaskDescriptor {
    TaskKind kind = TaskKind::blob;
    std::string id;       // "blob0", "glyph3", ...
    int num_classes = 0;  // C
    uint64_t seed = 0;
};

inline TaskDescriptor make_task(TaskKind kind, int variant, int num_classes, uint64_t base_seed) {
    if (num_classes < 2) throw std::invalid_argument("task: need at least 2 classes");
    TaskDescriptor t;
    t.kind = kind;
    t.id = (kind == TaskKind::blob ? "blob" : "glyph") + std::to_string(variant);
    t.num_classes = num_classes;
    t.seed = Rng::mix(base_seed, Rng::mix(static_cast<uint64_t>(kind == TaskKind::blob ? 11 : 13),
                                          static_cast<uint64_t>(variant)));
    return t;
}

inline TaskDescriptor parse_task(const std::string &id, int num_classes, uint64_t seed) {
    TaskDescriptor t;
    if (id.rfind("blob", 0) == 0) {
        t.kind = TaskKind::blob;
    } else if (id.rfind("glyph", 0) == 0) {
        t.kind = TaskKind::glyph;
    } else {
        throw std::invalid_argument("task: unknown id '" + id + "'");
    }
    t.id = id;
    t.num_classes = num_classes;
    t.seed = seed;
    return t;
}

struct Dataset {
    std::vector<double> pixels;  // [count, kImageSize] row-major
    std::vector<int> labels;
    int64_t count = 0;

    Tensor batch(const std::vector<int64_t> &idx) const {
        std::vector<double> d(idx.size() * kImageSize);
        for (size_t i = 0; i < idx.size(); ++i) {
            std::copy(pixels.begin() + idx[i] * kImageSize, pixels.begin() + (idx[i] + 1) * kImageSize,
                      d.begin() + static_cast<int64_t>(i) * kImageSize);
        }
        return Tensor::from_data({static_cast<int>(idx.size()), kImageSize}, std::move(d));
    }

    std::vector<int> label_batch(const std::vector<int64_t> &idx) const {
        std::vector<int> out(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) out[i] = labels[static_cast<size_t>(idx[i])];
        return out;
    }
};

namespace detail {

inline std::vector<double> class_prototype(const TaskDescriptor &task, int cls) {
    Rng rng(Rng::mix(task.seed, 0x70726f74ULL + static_cast<uint64_t>(cls)));
    std::vector<double> img(kImageSize, 0.0);
    if (task.kind == TaskKind::blob) {
        // one bump per class on a jittered ring, so prototypes stay apart
        const double angle = 2.0 * M_PI * cls / task.num_classes + 0.12 * rng.normal();
        const double radius = 2.4 + 0.2 * rng.uniform();
        const double cx = 3.5 + radius * std::cos(angle);
        const double cy = 3.5 + radius * std::sin(angle);
        const double sigma = 1.0 + 0.3 * rng.uniform();
        for (int y = 0; y < kImageSide; ++y) {
            for (int x = 0; x < kImageSide; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                img[static_cast<size_t>(y) * kImageSide + x] = std::exp(-d2 / (2.0 * sigma * sigma));
            }
        }
    } else {
        // binary stroke pattern, box-blurred once
        std::vector<double> raw(kImageSize, 0.0);
        for (auto &v : raw) v = rng.uniform() < 0.35 ? 1.0 : 0.0;
        for (int y = 0; y < kImageSide; ++y) {
            for (int x = 0; x < kImageSide; ++x) {
                double acc = 0.0;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= kImageSide || xx < 0 || xx >= kImageSide) continue;
                        acc += raw[static_cast<size_t>(yy) * kImageSide + xx];
                        ++n;
                    }
                }
                img[static_cast<size_t>(y) * kImageSide + x] = acc / n;
            }
        }
    }
    return img;
}

inline void render_sample(const TaskDescriptor &task, const std::vector<double> &proto, uint64_t stream, int cls,
                          int index, double *out) {
    Rng rng(Rng::mix(Rng::mix(task.seed, stream), static_cast<uint64_t>(cls) * 1000003ULL +
                                                      static_cast<uint64_t>(index)));
    const double gain = 0.85 + 0.3 * rng.uniform();
    const double noise = task.kind == TaskKind::blob ? 0.22 : 0.28;
    for (int i = 0; i < kImageSize; ++i) out[i] = gain * proto[static_cast<size_t>(i)] + noise * rng.normal();
}

}  // namespace detail

constexpr uint64_t kTrainStream = 0x7452ULL;
constexpr uint64_t kTestStream = 0x7453ULL;
constexpr uint64_t kExemplarStream = 0x7454ULL;

inline Dataset task_split(const TaskDescriptor &task, uint64_t stream, int per_class) {
    if (per_class < 1) throw std::invalid_argument("task: per_class must be positive");
    Dataset ds;
    ds.count = static_cast<int64_t>(task.num_classes) * per_class;
    ds.pixels.resize(static_cast<size_t>(ds.count) * kImageSize);
    ds.labels.resize(static_cast<size_t>(ds.count));
    int64_t row = 0;
    for (int c = 0; c < task.num_classes; ++c) {
        const auto proto = detail::class_prototype(task, c);
        for (int i = 0; i < per_class; ++i, ++row) {
            detail::render_sample(task, proto, stream, c, i, ds.pixels.data() + row * kImageSize);
            ds.labels[static_cast<size_t>(row)] = c;
        }
    }
    return ds;
}

inline Dataset task_train_set(const TaskDescriptor &task, int per_class) {
    return task_split(task, kTrainStream, per_class);
}

inline Dataset task_test_set(const TaskDescriptor &task, int per_class) {
    return task_split(task, kTestStream, per_class);
}

// per-class conditioning exemplars, [C * per_class][kImageSize], class-major
inline std::vector<std::vector<double>> task_exemplars(const TaskDescriptor &task, int per_class) {
    if (per_class < 1) throw std::invalid_argument("task: exemplar count must be positive");
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<size_t>(task.num_classes) * per_class);
    for (int c = 0; c < task.num_classes; ++c) {
        const auto proto = detail::class_prototype(task, c);
        for (int i = 0; i < per_class; ++i) {
            std::vector<double> img(kImageSize);
            detail::render_sample(task, proto, kExemplarStream, c, i, img.data());
            out.push_back(std::move(img));
        }
    }
    return out;
}

}  // namespace igpg
