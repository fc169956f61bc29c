#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mltc/data_synth.hpp"
#include "mltc/methods.hpp"
#include "mltc/training.hpp"

namespace mltc {

// Declarative experiment description, parsed from a key = value file. All
// defaults are embedded here and printable via --print-defaults.
struct ExperimentConfig {
    std::string dataset = "uklex";  // preset name, or a directory with data.jsonl
    int level = 1;
    std::vector<std::string> methods = {"encoder_head", "lwan:1", "seq2seq:beam4",
                                        "t5enc:causal"};
    std::string size = "small";
    std::string scheme = "auto";  // auto picks simplified (L1) / pseudo (L2), original for seq2seq
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
    double learning_rate = 1e-4;
    int max_epochs = 50;
    int patience = 3;
    int batch_size = 8;
    double threshold = 0.5;
    double dropout = 0.1;
    int max_gen_len = 64;
    std::array<double, 3> fractions = {0.7, 0.15, 0.15};
    std::string split_mode = "chronological";  // or "random"
    std::string ablation;                      // "", "attention", "depth"
    std::uint64_t data_seed = 7;
    std::optional<int> num_docs;  // synthetic preset overrides
    std::optional<int> doc_len_min;
    std::optional<int> doc_len_max;
    std::string out_dir = "runs";

    static ExperimentConfig parse_file(const std::string& path);
    static ExperimentConfig parse_text(const std::string& text);
    static std::string defaults_text();

    // Canonical semantic serialization: stable across cosmetic reordering of
    // the config file; excludes the output directory.
    std::string canonical() const;
    std::uint64_t config_hash() const;

    void validate() const;  // full validation before any training
};

std::uint64_t fnv1a64(const std::string& bytes);

struct DataBundle {
    Dataset dataset;
    Split split;
    std::string name;  // preset name or directory basename
    std::uint64_t corpus_hash = 0;
};

DataBundle load_or_generate(const ExperimentConfig& cfg);
std::uint64_t corpus_hash(const Dataset& ds);

// One table row source: a finished (method x seed) training run.
struct RunMetrics {
    std::string row_label;
    std::string method;  // canonical method string
    std::uint64_t seed = 0;
    double dev_micro = 0.0, dev_macro = 0.0;
    double test_micro = 0.0, test_macro = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
    double novel_rate = -1.0;  // seq2seq only, percent
};

struct ResultTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const;
    std::string text() const;  // aligned plain text
};

// Groups runs by row label (first-seen order), aggregating seeds as
// "mean ± std" percentages.
ResultTable aggregate_table(const std::vector<RunMetrics>& runs);

// Five-row attention ablation / depth-grid table. All runs must share the
// same seed set; an empty run list is an error.
ResultTable ablation_report(const std::vector<RunMetrics>& runs);

struct NovelLabelReport {
    long novel = 0;
    long total = 0;
    std::vector<std::string> fragments;  // distinct novel strings, sorted

    double rate_percent() const { return total == 0 ? 0.0 : 100.0 * novel / total; }
};

NovelLabelReport novel_label_report(const std::vector<Generation>& generations);

// Runs the full method x seed grid described by the config; writes per-run
// directories, aggregated CSV/TXT tables and a manifest. Returns the runs.
std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg, std::ostream& log);

// Rebuilds tables from the per-seed metrics.json files under a run directory.
ResultTable report_from_directory(const std::string& out_dir);

}  // namespace mltc
