#pragma once

// Builds tiny model zoos: trains each (architecture, task) pair with AdamW
// and a linear learning-rate schedule, keeps the last few epoch checkpoints
// as flat vectors, and persists them in the IGPGZOO1 container.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "igpg/arch.hpp"
#include "igpg/layout.hpp"
#include "igpg/optim.hpp"
#include "igpg/serialize.hpp"
#include "igpg/task.hpp"

namespace igpg {

struct ZooRecord {
    ArchitectureDescriptor arch;
    TaskDescriptor task;
    int epoch = 0;
    FlatParamVector flat;
    double test_accuracy = 0.0;
};

struct ZooTrainConfig {
    int epochs = 30;
    int keep_last = 5;
    int batch_size = 32;
    int train_per_class = 32;
    int test_per_class = 20;
    double lr = 8e-3;
    double weight_decay = 0.0;  // zero keeps late checkpoints near the optimum
    uint64_t seed = 1;
};

// argmax with ties broken toward the lowest class index; test splits are
// exactly balanced, so constant predictors score exactly 1/C
inline double classify_accuracy(const Tensor &logits, const std::vector<int> &labels) {
    int correct = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (argmax_row(logits, static_cast<int>(i)) == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

inline double eval_accuracy(const ArchitectureDescriptor &arch, const std::vector<double> &flat_values,
                            const TaskDescriptor &task, int test_per_class) {
    Rng dummy(0);
    ZooNet net = make_net(arch, task.num_classes, dummy);
    FlatParamVector flat;
    flat.values = flat_values;
    flat.layout = arch_layout(arch, task.num_classes);
    set_net_weights(net, unflatten(flat));
    const Dataset test = task_test_set(task, test_per_class);
    std::vector<int64_t> all(static_cast<size_t>(test.count));
    for (int64_t i = 0; i < test.count; ++i) all[static_cast<size_t>(i)] = i;
    const Tensor logits = net_forward(net, test.batch(all));
    return classify_accuracy(logits, test.labels);
}

// Trains one classifier; returns checkpoints for the last keep_last epochs.
inline std::vector<ZooRecord> train_one(const ArchitectureDescriptor &arch, const TaskDescriptor &task,
                                        const ZooTrainConfig &cfg, uint64_t run_seed) {
    Rng rng(run_seed);
    ZooNet net = make_net(arch, task.num_classes, rng);
    const ParameterLayout layout = arch_layout(arch, task.num_classes);
    const Dataset train = task_train_set(task, cfg.train_per_class);

    AdamWConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    AdamW opt(net_params(net), ocfg);

    const int64_t steps_per_epoch = (train.count + cfg.batch_size - 1) / cfg.batch_size;
    LinearSchedule sched{cfg.lr, steps_per_epoch * cfg.epochs};

    std::vector<int64_t> order(static_cast<size_t>(train.count));
    for (int64_t i = 0; i < train.count; ++i) order[static_cast<size_t>(i)] = i;

    std::vector<ZooRecord> records;
    int64_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Fisher-Yates with the run RNG keeps the trajectory reproducible
        for (int64_t i = train.count - 1; i > 0; --i) {
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.below(i + 1))]);
        }
        bool diverged = false;
        for (int64_t b = 0; b < train.count; b += cfg.batch_size) {
            const std::vector<int64_t> idx(order.begin() + b,
                                           order.begin() + std::min<int64_t>(b + cfg.batch_size, train.count));
            opt.zero_grad();
            Tensor loss = cross_entropy(net_forward(net, train.batch(idx)), train.label_batch(idx));
            if (!all_finite(loss)) {
                diverged = true;
                break;
            }
            backward(loss);
            opt.step(sched.at(step++));
        }
        if (diverged) {
            std::cerr << "zoo: training diverged (" << arch_description(arch) << " on " << task.id << " epoch "
                      << epoch << "), skipping remaining checkpoints\n";
            break;
        }
        if (epoch > cfg.epochs - cfg.keep_last) {
            ZooRecord rec;
            rec.arch = arch;
            rec.task = task;
            rec.epoch = epoch;
            rec.flat = vectorize(net_weights(net), layout);
            rec.test_accuracy = eval_accuracy(arch, rec.flat.values, task, cfg.test_per_class);
            records.push_back(std::move(rec));
        }
    }
    return records;
}

inline std::vector<ZooRecord> build_zoo(const std::vector<ArchitectureDescriptor> &archs,
                                        const std::vector<TaskDescriptor> &tasks, const ZooTrainConfig &cfg) {
    std::vector<ZooRecord> zoo;
    for (const auto &arch : archs) {
        for (const auto &task : tasks) {
            uint64_t h = 1469598103934665603ULL;
            for (char c : arch_description(arch)) h = (h ^ static_cast<uint8_t>(c)) * 1099511628211ULL;
            const uint64_t run_seed = Rng::mix(Rng::mix(cfg.seed, h), task.seed);
            auto recs = train_one(arch, task, cfg, run_seed);
            zoo.insert(zoo.end(), recs.begin(), recs.end());
        }
    }
    return zoo;
}

// ---------------------------------------------------------------- persistence

inline void save_zoo(const std::vector<ZooRecord> &zoo, const std::string &path) {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(zoo.size()));
    for (const auto &rec : zoo) {
        w.str(arch_description(rec.arch));
        w.str(rec.task.id);
        w.u32(static_cast<uint32_t>(rec.task.num_classes));
        w.u64(rec.task.seed);
        w.u32(static_cast<uint32_t>(rec.epoch));
        w.f64(rec.test_accuracy);
        w.f64_array(rec.flat.values);
    }
    write_file(path, "IGPGZOO1", w.bytes());
}

inline std::vector<ZooRecord> load_zoo(const std::string &path) {
    const auto payload = read_file(path, "IGPGZOO1");
    ByteReader r(payload.data(), payload.size());
    const uint32_t n = r.u32();
    std::vector<ZooRecord> zoo;
    zoo.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        ZooRecord rec;
        rec.arch = parse_arch(r.str());
        const std::string task_id = r.str();
        const int num_classes = static_cast<int>(r.u32());
        const uint64_t seed = r.u64();
        rec.task = parse_task(task_id, num_classes, seed);
        rec.epoch = static_cast<int>(r.u32());
        rec.test_accuracy = r.f64();
        rec.flat.values = r.f64_array();
        rec.flat.layout = arch_layout(rec.arch, num_classes);
        if (rec.flat.length() != rec.flat.layout.total_length()) {
            throw IoError(path + ": record " + std::to_string(i) + " weight length does not match layout");
        }
        zoo.push_back(std::move(rec));
    }
    if (!r.done()) throw IoError(path + ": trailing bytes after records");
    return zoo;
}

}  // namespace igpg
