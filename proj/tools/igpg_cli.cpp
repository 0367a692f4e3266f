// Command-line front end for the weight-generation pipeline:
//   zoo-build, tokenizer-train, prior-train, generate, eval, run-experiment

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "igpg/igpg.hpp"

namespace {

using namespace igpg;

ExperimentConfig load_experiment(const std::string &config_path) {
    return ExperimentConfig::from(Config::load(config_path));
}

SamplingStrategy parse_strategy(const std::string &text) {
    if (text == "greedy") return SamplingStrategy::greedy();
    if (text.rfind("topk:", 0) == 0) {
        const std::string rest = text.substr(5);
        int k = 0;
        double temperature = 1.0;
        unsigned long long seed = 0;
        const int n = std::sscanf(rest.c_str(), "%d,%lf,%llu", &k, &temperature, &seed);
        if (n < 2) throw std::invalid_argument("strategy: expected topk:<k>,<temperature>[,<seed>]");
        return SamplingStrategy::topk(k, temperature, seed);
    }
    throw std::invalid_argument("strategy: expected 'greedy' or 'topk:k,t[,seed]'");
}

int cmd_zoo_build(const std::string &config_path, const std::string &out_path) {
    const ExperimentConfig e = load_experiment(config_path);
    const auto zoo = build_zoo(e.archs, e.tasks, e.zoo);
    save_zoo(zoo, out_path);
    std::printf("wrote %zu records to %s\n", zoo.size(), out_path.c_str());
    return 0;
}

int cmd_tokenizer_train(const std::string &zoo_path, const std::string &config_path, const std::string &out_path) {
    const ExperimentConfig e = load_experiment(config_path);
    const auto zoo = load_zoo(zoo_path);
    Rng rng(Rng::mix(e.seed, 0x7671ULL));
    VqVaeModel vq = make_vqvae(e.vq, rng);
    ChunkCorpus corpus;
    for (const auto &rec : zoo) {
        if (e.aggregation == VectorizeMode::architecture_wise) {
            corpus.add_vector(rec.flat.values, e.vq.chunk_size);
        } else {
            for (const auto &piece : vectorize_layerwise(unflatten(rec.flat), rec.flat.layout)) {
                corpus.add_vector(piece, e.vq.chunk_size);
            }
        }
    }
    VqTrainConfig tcfg = e.vq_train;
    tcfg.verbose = true;
    const auto stats = train_vqvae(vq, corpus, tcfg);
    save_vqvae(vq, out_path);
    std::printf("tokenizer trained on %zu chunks, final reconstruction %.3e -> %s\n", corpus.chunks.size(),
                stats.final_reconstruction, out_path.c_str());
    return 0;
}

int cmd_prior_train(const std::string &zoo_path, const std::string &tokenizer_path, const std::string &config_path,
                    const std::string &out_path) {
    const ExperimentConfig e = load_experiment(config_path);
    const auto zoo = load_zoo(zoo_path);
    const VqVaeModel vq = load_vqvae(tokenizer_path);
    PriorConfig pcfg = e.prior;
    pcfg.vocab = vq.cfg.codebook_size;
    Rng rng(Rng::mix(e.seed, 0x7072ULL));
    PriorModel prior = make_prior(pcfg, rng);
    std::vector<PriorTrainItem> items;
    for (const auto &rec : zoo) {
        PriorTrainItem item;
        item.ctx = make_context_for(e, prior, rec.task, rec.arch);
        item.tokens = e.aggregation == VectorizeMode::architecture_wise
                          ? tokenize_vector(vq, rec.flat.values)
                          : tokenize_vector_layerwise(vq, unflatten(rec.flat), rec.flat.layout);
        items.push_back(std::move(item));
    }
    PriorTrainConfig tcfg = e.prior_train;
    tcfg.verbose = true;
    const auto stats = train_prior(prior, items, tcfg);
    save_prior(prior, out_path);
    std::printf("prior trained on %zu sequences, final nll %.4f -> %s\n", items.size(), stats.final_nll,
                out_path.c_str());
    return 0;
}

int cmd_generate(const std::string &tokenizer_path, const std::string &prior_path, const std::string &arch_text,
                 const std::string &task_id, const std::string &strategy_text, const std::string &out_path,
                 const std::string &config_path) {
    const VqVaeModel vq = load_vqvae(tokenizer_path);
    const PriorModel prior = load_prior(prior_path);
    const ArchitectureDescriptor arch = parse_arch(arch_text);
    const SamplingStrategy strategy = parse_strategy(strategy_text);

    int num_classes = 10;
    uint64_t base_seed = 42;
    int samples_per_class = 5;
    int context_window = prior.cfg.n_max / 2;
    std::string conditioning = "embedding";
    if (!config_path.empty()) {
        const ExperimentConfig e = load_experiment(config_path);
        num_classes = e.num_classes;
        base_seed = e.seed;
        samples_per_class = e.samples_per_class;
        context_window = e.context_window;
        conditioning = e.conditioning;
    }
    TaskDescriptor task = parse_task(task_id, num_classes, 0);
    int variant = 0;
    const size_t digits = task_id.find_first_of("0123456789");
    if (digits != std::string::npos) variant = std::stoi(task_id.substr(digits));
    task = make_task(task.kind, variant, num_classes, base_seed);

    const auto layout = arch_layout(arch, num_classes);
    const auto plan = plan_generation(layout.total_length(), vq.cfg.chunk_size, vq.cfg.tokens_per_chunk,
                                      prior.cfg.n_max, context_window);
    ConditioningContext ctx;
    if (conditioning == "prompt") {
        ctx.prompt_ids = arch_token_ids(render_prompt(arch, plan.total_tokens), prior.cfg.arch_vocab);
        ctx.arch_ids = arch_token_ids(arch_description(arch), prior.cfg.arch_vocab);
        ctx.dataset_embedding.assign(static_cast<size_t>(prior.cfg.d_model), 0.0);
    } else {
        ctx = make_context(prior, task, arch, samples_per_class);
    }
    const auto values = generate_params(ctx, plan, vq, prior, strategy);
    const double accuracy = eval_zero_shot(arch, values, task, 20);

    ZooRecord rec;
    rec.arch = arch;
    rec.task = task;
    rec.epoch = 0;
    rec.flat.values = values;
    rec.flat.layout = layout;
    rec.test_accuracy = accuracy;
    save_zoo({rec}, out_path);
    std::printf("generated %lld params (%s, %s), zero-shot accuracy %.4f -> %s\n",
                static_cast<long long>(layout.total_length()), arch_description(arch).c_str(), task.id.c_str(),
                accuracy, out_path.c_str());
    return 0;
}

int cmd_eval(const std::string &config_path, const std::string &weights_path) {
    const ExperimentConfig e = load_experiment(config_path);
    const auto records = load_zoo(weights_path);
    for (const auto &rec : records) {
        const double acc = eval_zero_shot(rec.arch, rec.flat.values, rec.task, e.zoo.test_per_class);
        std::printf("%s | %s | epoch %d | accuracy %.4f\n", arch_description(rec.arch).c_str(), rec.task.id.c_str(),
                    rec.epoch, acc);
    }
    return 0;
}

int cmd_run_experiment(const std::string &config_path, const std::string &out_dir) {
    const auto result = run_experiment(Config::load(config_path), out_dir);
    for (const auto &line : result.stage_log) std::printf("%s\n", line.c_str());
    std::printf("report: %s\n", result.report_path.c_str());
    return result.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"token-based neural network weight generation pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_path, zoo_path, tokenizer_path, prior_path;
    std::string arch_text, task_id, strategy_text = "greedy", weights_path, out_dir;

    auto *zoo_build = app.add_subcommand("zoo-build", "train classifiers and persist a model zoo");
    zoo_build->add_option("--config", config_path)->required();
    zoo_build->add_option("--out", out_path)->required();

    auto *tok_train = app.add_subcommand("tokenizer-train", "train the chunk tokenizer on a zoo");
    tok_train->add_option("--zoo", zoo_path)->required();
    tok_train->add_option("--config", config_path)->required();
    tok_train->add_option("--out", out_path)->required();

    auto *prior_train = app.add_subcommand("prior-train", "train the autoregressive prior on encoded zoo tokens");
    prior_train->add_option("--zoo", zoo_path)->required();
    prior_train->add_option("--tokenizer", tokenizer_path)->required();
    prior_train->add_option("--config", config_path)->required();
    prior_train->add_option("--out", out_path)->required();

    auto *generate = app.add_subcommand("generate", "sample weights for an architecture/task pair");
    generate->add_option("--tokenizer", tokenizer_path)->required();
    generate->add_option("--prior", prior_path)->required();
    generate->add_option("--arch", arch_text)->required();
    generate->add_option("--task", task_id)->required();
    generate->add_option("--strategy", strategy_text, "greedy or topk:k,t[,seed]");
    generate->add_option("--out", out_path)->required();
    generate->add_option("--config", config_path, "experiment config for task/conditioning parameters");

    auto *eval = app.add_subcommand("eval", "evaluate saved weights on their tasks");
    eval->add_option("--config", config_path)->required();
    eval->add_option("--weights", weights_path)->required();

    auto *run = app.add_subcommand("run-experiment", "full pipeline plus report files");
    run->add_option("--config", config_path)->required();
    run->add_option("--out", out_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (zoo_build->parsed()) return cmd_zoo_build(config_path, out_path);
        if (tok_train->parsed()) return cmd_tokenizer_train(zoo_path, config_path, out_path);
        if (prior_train->parsed()) return cmd_prior_train(zoo_path, tokenizer_path, config_path, out_path);
        if (generate->parsed()) {
            return cmd_generate(tokenizer_path, prior_path, arch_text, task_id, strategy_text, out_path, config_path);
        }
        if (eval->parsed()) return cmd_eval(config_path, weights_path);
        if (run->parsed()) return cmd_run_experiment(config_path, out_dir);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
