// Command-line experiment runner: dataset generation, training grids,
// evaluation, ablations, Fisher dependency analysis and table regeneration.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mltc/experiment.hpp"

namespace fs = std::filesystem;
using namespace mltc;

namespace {

int generate_data_cmd(const std::string& preset, const std::string& out,
                      std::uint64_t seed, int num_docs) {
    DatasetSpec spec = dataset_preset(preset);
    spec.seed = seed;
    if (num_docs > 0) {
        spec.num_docs = num_docs;
    }
    const Dataset ds = generate(spec);
    fs::create_directories(out);
    save_jsonl(ds, (fs::path(out) / "data.jsonl").string());
    save_labels_tsv((fs::path(out) / "labels.tsv").string(), ds.labels_l1, ds.labels_l2);
    ds.tokenizer.save_tsv((fs::path(out) / "tokens.tsv").string());
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(corpus_hash(ds)));
    std::cout << "wrote " << ds.docs.size() << " documents to " << out << " (corpus hash " << hex
              << ")\n";
    return 0;
}

ExperimentConfig load_config(const std::string& config_path, const std::string& out_override,
                             const std::string& seed_override) {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : ExperimentConfig::parse_file(config_path);
    if (!out_override.empty()) {
        cfg.out_dir = out_override;
    }
    if (!seed_override.empty()) {
        cfg.seeds.clear();
        std::istringstream iss(seed_override);
        std::string item;
        while (std::getline(iss, item, ',')) {
            cfg.seeds.push_back(std::stoull(item));
        }
    }
    return cfg;
}

int evaluate_cmd(const std::string& checkpoint_path, const std::string& config_path,
                 const std::string& split_name, const std::string& out_path) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    std::string method_str = "encoder_head", scheme_str = "original";
    int level = 1;
    for (const auto& [key, value] : ckpt.meta) {
        if (key == "method") method_str = value;
        if (key == "scheme") scheme_str = value;
        if (key == "level") level = std::stoi(value);
    }
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : ExperimentConfig::parse_file(config_path);
    cfg.level = level;
    cfg.scheme = scheme_str;
    DataBundle bundle = load_or_generate(cfg);
    if (bundle.dataset.tokenizer.size() != ckpt.cfg.vocab_size) {
        throw DataError("checkpoint was trained with vocabulary size " +
                        std::to_string(ckpt.cfg.vocab_size) + " but the dataset has " +
                        std::to_string(bundle.dataset.tokenizer.size()));
    }
    auto vocab = std::make_shared<const LabelVocabulary>(
        level, descriptor_scheme_from_string(scheme_str), bundle.dataset.labels(level));
    auto tokenizer = std::make_shared<const Tokenizer>(bundle.dataset.tokenizer);
    Model model = build_model(ckpt.cfg, MethodKind::parse(method_str), vocab, tokenizer, 0);
    model.params = ckpt.params;

    const std::vector<int>& ids = split_name == "train"  ? bundle.split.train
                                  : split_name == "dev" ? bundle.split.dev
                                                         : bundle.split.test;
    std::vector<LabelSet> gold, predicted;
    std::vector<Generation> generations;
    for (int id : ids) {
        const Document& doc = bundle.dataset.docs[static_cast<std::size_t>(id)];
        gold.push_back(gold_labels(doc, level));
        if (model.method.is_generative()) {
            Generation gen = seq2seq_generate(model, doc.tokens, model.method.decoding);
            predicted.push_back(gen.parsed.labels);
            generations.push_back(std::move(gen));
        } else {
            predicted.push_back(predict(model, doc.tokens, cfg.threshold));
        }
    }
    const MetricsReport report = evaluate_sets(gold, predicted, model.num_labels());
    std::printf("%s split: micro-F1 %.4f, macro-F1 %.4f over %zu documents\n",
                split_name.c_str(), report.micro, report.macro, gold.size());
    if (model.method.is_generative()) {
        const NovelLabelReport novel = novel_label_report(generations);
        std::printf("novel labels: %ld of %ld fragments (%.2f%%)\n", novel.novel, novel.total,
                    novel.rate_percent());
        for (const std::string& f : novel.fragments) {
            std::printf("  novel: '%s'\n", f.c_str());
        }
        if (!out_path.empty()) {
            std::ofstream os(out_path, std::ios::binary);
            for (std::size_t i = 0; i < generations.size(); ++i) {
                os << "{\"doc_id\":" << ids[i] << ",\"text\":\"" << generations[i].text
                   << "\",\"log_prob\":" << generations[i].log_prob << "}\n";
            }
        }
    }
    return 0;
}

int fisher_cmd(const std::string& config_path, const std::string& dataset, int level,
               double alpha) {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : ExperimentConfig::parse_file(config_path);
    if (!dataset.empty()) {
        cfg.dataset = dataset;
    }
    cfg.level = level;
    DataBundle bundle = load_or_generate(cfg);
    std::vector<LabelSet> gold;
    gold.reserve(bundle.dataset.docs.size());
    for (const Document& doc : bundle.dataset.docs) {
        gold.push_back(gold_labels(doc, level));
    }
    const int num_labels = static_cast<int>(bundle.dataset.labels(level).size());
    const double rate = significant_pair_rate(gold, num_labels, alpha);
    std::printf("%s L%d: %.1f%% of label pairs significant at p < %g (%d labels, %zu docs)\n",
                bundle.name.c_str(), level, rate, alpha, num_labels, gold.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-label classification toolkit"};
    app.require_subcommand(0, 1);
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "print the default config and exit");

    std::string config_path, out_dir, seed_list;

    auto* gen = app.add_subcommand("generate-data", "write a synthetic dataset as JSONL");
    std::string gen_preset = "uklex";
    std::uint64_t gen_seed = 7;
    int gen_docs = 0;
    gen->add_option("--preset", gen_preset, "dataset preset name");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--docs", gen_docs, "override document count");
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "train a method x seed grid from a config");
    train_cmd->add_option("--config", config_path, "experiment config file");
    train_cmd->add_option("--out", out_dir, "output directory override");
    train_cmd->add_option("--seed", seed_list, "comma-separated seed override");

    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
    std::string ckpt_path, split_name = "test", gen_out;
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    eval_cmd->add_option("--config", config_path, "experiment config (for the dataset)");
    eval_cmd->add_option("--split", split_name, "train | dev | test");
    eval_cmd->add_option("--generations-out", gen_out, "write raw generations JSONL here");

    auto* ablate_cmd = app.add_subcommand("ablate", "run a decoder ablation grid");
    std::string ablation_kind = "attention";
    ablate_cmd->add_option("--config", config_path, "experiment config file");
    ablate_cmd->add_option("--kind", ablation_kind, "attention | depth");
    ablate_cmd->add_option("--out", out_dir, "output directory override");
    ablate_cmd->add_option("--seed", seed_list, "comma-separated seed override");

    auto* fisher_app = app.add_subcommand("fisher", "label-dependency analysis on gold labels");
    std::string fisher_dataset;
    int fisher_level = 2;
    double fisher_alpha = 0.001;
    fisher_app->add_option("--config", config_path, "experiment config (for the dataset)");
    fisher_app->add_option("--dataset", fisher_dataset, "preset name or dataset directory");
    fisher_app->add_option("--level", fisher_level, "label level (1 or 2)");
    fisher_app->add_option("--alpha", fisher_alpha, "significance threshold");

    auto* report_cmd = app.add_subcommand("report", "rebuild tables from stored run metrics");
    report_cmd->add_option("--runs", out_dir, "experiment output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_defaults) {
            std::cout << ExperimentConfig::defaults_text();
            return 0;
        }
        if (gen->parsed()) {
            return generate_data_cmd(gen_preset, out_dir, gen_seed, gen_docs);
        }
        if (train_cmd->parsed()) {
            const ExperimentConfig cfg = load_config(config_path, out_dir, seed_list);
            run_experiment(cfg, std::cout);
            std::cout << "results written to " << cfg.out_dir << "\n";
            return 0;
        }
        if (eval_cmd->parsed()) {
            return evaluate_cmd(ckpt_path, config_path, split_name, gen_out);
        }
        if (ablate_cmd->parsed()) {
            ExperimentConfig cfg = load_config(config_path, out_dir, seed_list);
            cfg.ablation = ablation_kind;
            run_experiment(cfg, std::cout);
            std::cout << "ablation table written to " << cfg.out_dir << "\n";
            return 0;
        }
        if (fisher_app->parsed()) {
            return fisher_cmd(config_path, fisher_dataset, fisher_level, fisher_alpha);
        }
        if (report_cmd->parsed()) {
            const ResultTable table = report_from_directory(out_dir);
            std::cout << table.text();
            return 0;
        }
        std::cout << app.help();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SpecError& e) {
        std::cerr << "dataset spec error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingDivergence& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
