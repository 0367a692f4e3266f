#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "igpg/zoo.hpp"
#include "testutil.hpp"

using namespace igpg;

namespace {

ZooTrainConfig small_cfg() {
    ZooTrainConfig cfg;
    cfg.epochs = 20;
    cfg.keep_last = 5;
    cfg.seed = 7;
    return cfg;
}

std::string temp_path(const char *name) {
    return std::string("/tmp/igpg_test_") + name + "_" + std::to_string(::getpid());
}

}  // namespace

TEST_CASE("zoo training reaches the pilot accuracy threshold") {
    const ArchitectureDescriptor arch{ArchFamily::mlp, {16}};
    const auto task = make_task(TaskKind::blob, 0, 4, 42);
    const auto zoo = build_zoo({arch}, {task}, small_cfg());
    REQUIRE(zoo.size() == 5);
    for (const auto &rec : zoo) {
        REQUIRE(rec.test_accuracy >= 0.8);
        REQUIRE(rec.flat.length() == arch_layout(arch, 4).total_length());
    }
}

TEST_CASE("keep_last of zero yields an empty zoo") {
    auto cfg = small_cfg();
    cfg.epochs = 3;
    cfg.keep_last = 0;
    const ArchitectureDescriptor arch{ArchFamily::mlp, {8}};
    const auto task = make_task(TaskKind::blob, 0, 4, 42);
    REQUIRE(build_zoo({arch}, {task}, cfg).empty());
}

TEST_CASE("distinct seeds give distinct weights") {
    auto cfg = small_cfg();
    cfg.epochs = 4;
    cfg.keep_last = 1;
    const ArchitectureDescriptor arch{ArchFamily::mlp, {8}};
    const auto task = make_task(TaskKind::blob, 0, 4, 42);
    auto a = build_zoo({arch}, {task}, cfg);
    cfg.seed = 999;
    auto b = build_zoo({arch}, {task}, cfg);
    double linf = 0.0;
    for (size_t i = 0; i < a[0].flat.values.size(); ++i) {
        linf = std::max(linf, std::fabs(a[0].flat.values[i] - b[0].flat.values[i]));
    }
    REQUIRE(linf > 0.0);
}

TEST_CASE("zoo build is deterministic for a fixed seed") {
    auto cfg = small_cfg();
    cfg.epochs = 4;
    cfg.keep_last = 2;
    const ArchitectureDescriptor arch{ArchFamily::tiny_cnn, {4}};
    const auto task = make_task(TaskKind::glyph, 0, 4, 42);
    const auto a = build_zoo({arch}, {task}, cfg);
    const auto b = build_zoo({arch}, {task}, cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].flat.values == b[i].flat.values);
        REQUIRE(a[i].test_accuracy == b[i].test_accuracy);
    }
}

TEST_CASE("save/load roundtrip is exact") {
    auto cfg = small_cfg();
    cfg.epochs = 4;
    cfg.keep_last = 2;
    const ArchitectureDescriptor arch{ArchFamily::mlp, {8, 6}};
    const auto task = make_task(TaskKind::glyph, 1, 4, 42);
    const auto zoo = build_zoo({arch}, {task}, cfg);
    const auto path = temp_path("zoo");
    save_zoo(zoo, path);
    const auto back = load_zoo(path);
    REQUIRE(back.size() == zoo.size());
    for (size_t i = 0; i < zoo.size(); ++i) {
        REQUIRE(back[i].flat.values == zoo[i].flat.values);
        REQUIRE(back[i].epoch == zoo[i].epoch);
        REQUIRE(back[i].test_accuracy == zoo[i].test_accuracy);
        REQUIRE(back[i].arch == zoo[i].arch);
        REQUIRE(back[i].task.id == zoo[i].task.id);
        REQUIRE(back[i].task.seed == zoo[i].task.seed);
        REQUIRE(back[i].task.num_classes == zoo[i].task.num_classes);
    }
    std::remove(path.c_str());
}

TEST_CASE("an empty zoo file is valid") {
    const auto path = temp_path("zoo_empty");
    save_zoo({}, path);
    REQUIRE(load_zoo(path).empty());
    std::remove(path.c_str());
}

TEST_CASE("corrupted zoo files raise structured errors") {
    auto cfg = small_cfg();
    cfg.epochs = 2;
    cfg.keep_last = 1;
    const ArchitectureDescriptor arch{ArchFamily::mlp, {6}};
    const auto task = make_task(TaskKind::blob, 2, 4, 42);
    const auto zoo = build_zoo({arch}, {task}, cfg);
    const auto path = temp_path("zoo_bad");
    save_zoo(zoo, path);

    SECTION("flipped payload byte fails the checksum") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        f.put(static_cast<char>(0x5a));
        f.close();
        try {
            load_zoo(path);
            FAIL("expected checksum error");
        } catch (const IoError &e) {
            REQUIRE(std::string(e.what()).find("checksum") != std::string::npos);
        }
    }
    SECTION("wrong magic is rejected") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('X');
        f.close();
        try {
            load_zoo(path);
            FAIL("expected magic error");
        } catch (const IoError &e) {
            REQUIRE(std::string(e.what()).find("magic") != std::string::npos);
        }
    }
    SECTION("truncation is rejected") {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
        out.close();
        REQUIRE_THROWS_AS(load_zoo(path), IoError);
    }
    std::remove(path.c_str());
}

TEST_CASE("zero weights score exactly 1/C on the balanced test split") {
    const ArchitectureDescriptor arch{ArchFamily::mlp, {8}};
    const auto task = make_task(TaskKind::blob, 0, 5, 42);
    const auto layout = arch_layout(arch, task.num_classes);
    std::vector<double> zeros(static_cast<size_t>(layout.total_length()), 0.0);
    REQUIRE(eval_accuracy(arch, zeros, task, 20) == 1.0 / task.num_classes);
}

TEST_CASE("stored accuracy is reproduced through the evaluation path") {
    auto cfg = small_cfg();
    cfg.epochs = 5;
    cfg.keep_last = 1;
    const ArchitectureDescriptor arch{ArchFamily::tiny_cnn, {4, 8}};
    const auto task = make_task(TaskKind::blob, 1, 4, 42);
    const auto zoo = build_zoo({arch}, {task}, cfg);
    REQUIRE(eval_accuracy(zoo[0].arch, zoo[0].flat.values, zoo[0].task, cfg.test_per_class) == zoo[0].test_accuracy);
}

TEST_CASE("architecture descriptions render canonically and parse back") {
    const ArchitectureDescriptor mlp{ArchFamily::mlp, {32, 16}};
    REQUIRE(arch_description(mlp) == "architecture: MLP, hidden: [32, 16]");
    REQUIRE(parse_arch(arch_description(mlp)) == mlp);

    const ArchitectureDescriptor cnn{ArchFamily::tiny_cnn, {6, 12}};
    REQUIRE(arch_description(cnn) == "architecture: TinyCNN, channels: [6, 12]");
    REQUIRE(parse_arch(arch_description(cnn)) == cnn);

    REQUIRE_THROWS_AS(parse_arch("architecture: ResNet, layers: [3, 3, 3]"), std::invalid_argument);
}
