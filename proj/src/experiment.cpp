#include "mltc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace mltc {

// ---- config parsing -----------------------------------------------------------

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream iss(s);
    while (std::getline(iss, item, ',')) {
        item = trim_copy(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
    }
}

long parse_long(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + value + "' is not an integer");
    }
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream iss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(iss, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim_copy(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim_copy(line.substr(0, eq));
        const std::string value = trim_copy(line.substr(eq + 1));
        if (key == "dataset") {
            cfg.dataset = value;
        } else if (key == "level") {
            cfg.level = static_cast<int>(parse_long(key, value));
        } else if (key == "methods") {
            cfg.methods = split_list(value);
        } else if (key == "size") {
            cfg.size = value;
        } else if (key == "scheme") {
            cfg.scheme = value;
        } else if (key == "seeds") {
            cfg.seeds.clear();
            for (const std::string& s : split_list(value)) {
                cfg.seeds.push_back(static_cast<std::uint64_t>(parse_long(key, s)));
            }
        } else if (key == "learning_rate") {
            cfg.learning_rate = parse_double(key, value);
        } else if (key == "max_epochs") {
            cfg.max_epochs = static_cast<int>(parse_long(key, value));
        } else if (key == "patience") {
            cfg.patience = static_cast<int>(parse_long(key, value));
        } else if (key == "batch_size") {
            cfg.batch_size = static_cast<int>(parse_long(key, value));
        } else if (key == "threshold") {
            cfg.threshold = parse_double(key, value);
        } else if (key == "dropout") {
            cfg.dropout = parse_double(key, value);
        } else if (key == "max_gen_len") {
            cfg.max_gen_len = static_cast<int>(parse_long(key, value));
        } else if (key == "fractions") {
            const auto parts = split_list(value);
            if (parts.size() != 3) {
                throw ConfigError("fractions needs exactly three comma-separated values");
            }
            for (int i = 0; i < 3; ++i) {
                cfg.fractions[static_cast<std::size_t>(i)] = parse_double(key, parts[static_cast<std::size_t>(i)]);
            }
        } else if (key == "split_mode") {
            cfg.split_mode = value;
        } else if (key == "ablation") {
            cfg.ablation = value;
        } else if (key == "data_seed") {
            cfg.data_seed = static_cast<std::uint64_t>(parse_long(key, value));
        } else if (key == "num_docs") {
            cfg.num_docs = static_cast<int>(parse_long(key, value));
        } else if (key == "doc_len_min") {
            cfg.doc_len_min = static_cast<int>(parse_long(key, value));
        } else if (key == "doc_len_max") {
            cfg.doc_len_max = static_cast<int>(parse_long(key, value));
        } else if (key == "out") {
            cfg.out_dir = value;
        } else {
            throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(lineno) +
                              ")");
        }
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_text(buf.str());
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream os;
    os << "ablation=" << ablation << '\n';
    os << "batch_size=" << batch_size << '\n';
    os << "data_seed=" << data_seed << '\n';
    os << "dataset=" << dataset << '\n';
    if (doc_len_max) os << "doc_len_max=" << *doc_len_max << '\n';
    if (doc_len_min) os << "doc_len_min=" << *doc_len_min << '\n';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", dropout);
    os << "dropout=" << buf << '\n';
    for (double f : fractions) {
        std::snprintf(buf, sizeof(buf), "%.17g", f);
        os << "fraction=" << buf << '\n';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", learning_rate);
    os << "learning_rate=" << buf << '\n';
    os << "level=" << level << '\n';
    os << "max_epochs=" << max_epochs << '\n';
    os << "max_gen_len=" << max_gen_len << '\n';
    for (const std::string& m : methods) {
        os << "method=" << MethodKind::parse(m).canonical() << '\n';
    }
    if (num_docs) os << "num_docs=" << *num_docs << '\n';
    os << "patience=" << patience << '\n';
    os << "scheme=" << scheme << '\n';
    for (std::uint64_t s : seeds) {
        os << "seed=" << s << '\n';
    }
    os << "size=" << size << '\n';
    os << "split_mode=" << split_mode << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g", threshold);
    os << "threshold=" << buf << '\n';
    return os.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a64(canonical()); }

std::string ExperimentConfig::defaults_text() {
    const ExperimentConfig cfg;
    std::ostringstream os;
    os << "# experiment configuration defaults\n";
    os << "dataset = " << cfg.dataset << "          # preset (";
    bool first = true;
    for (const std::string& name : dataset_preset_names()) {
        os << (first ? "" : "|") << name;
        first = false;
    }
    os << ") or a directory with data.jsonl, labels.tsv, tokens.tsv\n";
    os << "level = " << cfg.level << "\n";
    os << "methods = ";
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
        os << (i ? ", " : "") << cfg.methods[i];
    }
    os << "\nsize = " << cfg.size << "             # small | base | large\n";
    os << "scheme = " << cfg.scheme << "           # auto | original | simplified | numeric | pseudo\n";
    os << "seeds = 1, 2, 3, 4\n";
    os << "learning_rate = 0.0001     # fixed after one warm-up epoch\n";
    os << "max_epochs = " << cfg.max_epochs << "\n";
    os << "patience = " << cfg.patience << "\n";
    os << "batch_size = " << cfg.batch_size << "\n";
    os << "threshold = " << cfg.threshold << "\n";
    os << "dropout = " << cfg.dropout << "\n";
    os << "max_gen_len = " << cfg.max_gen_len << "\n";
    os << "fractions = 0.7, 0.15, 0.15\n";
    os << "split_mode = " << cfg.split_mode << "   # chronological | random\n";
    os << "ablation =                 # empty | attention | depth\n";
    os << "data_seed = " << cfg.data_seed << "\n";
    os << "# num_docs, doc_len_min, doc_len_max override synthetic presets\n";
    os << "out = " << cfg.out_dir << "\n";
    return os.str();
}

void ExperimentConfig::validate() const {
    if (level != 1 && level != 2) {
        throw ConfigError("level must be 1 or 2");
    }
    if (methods.empty()) {
        throw ConfigError("methods list is empty");
    }
    for (const std::string& m : methods) {
        const MethodKind kind = MethodKind::parse(m);
        const std::string effective = scheme == "auto" ? std::string() : scheme;
        if (!effective.empty()) {
            const DescriptorScheme s = descriptor_scheme_from_string(effective);
            if (kind.family == MethodKind::Family::T5Enc && s != DescriptorScheme::Simplified &&
                s != DescriptorScheme::Pseudo) {
                throw ConfigError("method " + kind.canonical() +
                                  " requires single-token descriptors; scheme '" + effective +
                                  "' is not simplified or pseudo");
            }
            if (kind.family == MethodKind::Family::Seq2Seq && s == DescriptorScheme::Pseudo) {
                throw ConfigError("method seq2seq cannot use the pseudo descriptor scheme");
            }
        }
    }
    if (seeds.empty()) {
        throw ConfigError("seeds list is empty");
    }
    ModelConfig::size_preset(size);  // throws on unknown size
    if (scheme != "auto") {
        descriptor_scheme_from_string(scheme);
    }
    if (split_mode != "chronological" && split_mode != "random") {
        throw ConfigError("split_mode must be chronological or random");
    }
    if (!ablation.empty() && ablation != "attention" && ablation != "depth") {
        throw ConfigError("ablation must be empty, 'attention' or 'depth'");
    }
    const double fsum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(fsum - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1");
    }
    TrainConfig tc;
    tc.learning_rate = learning_rate;
    tc.max_epochs = max_epochs;
    tc.patience = patience;
    tc.batch_size = batch_size;
    tc.threshold = threshold;
    tc.validate();
    if (dropout < 0.0 || dropout >= 1.0) {
        throw ConfigError("dropout must be in [0,1)");
    }
    if (max_gen_len < 1) {
        throw ConfigError("max_gen_len must be >= 1");
    }
}

// ---- data ---------------------------------------------------------------------

std::uint64_t corpus_hash(const Dataset& ds) {
    std::ostringstream os;
    for (const Document& doc : ds.docs) {
        os << doc.id << '|' << doc.timestamp << '|';
        for (int t : doc.tokens) {
            os << t << ',';
        }
        os << '|';
        for (int l : doc.labels_l1) {
            os << l << ',';
        }
        os << '|';
        for (int l : doc.labels_l2) {
            os << l << ',';
        }
        os << '\n';
    }
    return fnv1a64(os.str());
}

DataBundle load_or_generate(const ExperimentConfig& cfg) {
    DataBundle bundle;
    const bool is_preset = [&] {
        for (const std::string& name : dataset_preset_names()) {
            if (name == cfg.dataset) {
                return true;
            }
        }
        return false;
    }();
    if (is_preset) {
        DatasetSpec spec = dataset_preset(cfg.dataset);
        spec.seed = cfg.data_seed;
        if (cfg.num_docs) spec.num_docs = *cfg.num_docs;
        if (cfg.doc_len_min) spec.doc_len_min = *cfg.doc_len_min;
        if (cfg.doc_len_max) spec.doc_len_max = *cfg.doc_len_max;
        bundle.dataset = generate(spec);
        bundle.name = cfg.dataset;
    } else {
        const fs::path dir(cfg.dataset);
        if (!fs::is_directory(dir)) {
            throw ConfigError("dataset '" + cfg.dataset +
                              "' is neither a preset nor a directory");
        }
        std::vector<Label> l1, l2;
        load_labels_tsv((dir / "labels.tsv").string(), l1, l2);
        Tokenizer tok = Tokenizer::load_tsv((dir / "tokens.tsv").string());
        bundle.dataset = load_jsonl((dir / "data.jsonl").string(), std::move(l1), std::move(l2),
                                    std::move(tok));
        bundle.name = dir.filename().string();
    }
    if (cfg.level == 2 && bundle.dataset.labels_l2.empty()) {
        throw ConfigError("level 2 requested but the dataset has no level-2 labels");
    }
    bundle.split = split_chronological(
        bundle.dataset, cfg.fractions,
        cfg.split_mode == "random" ? SplitMode::Random : SplitMode::Chronological,
        cfg.data_seed);
    bundle.corpus_hash = corpus_hash(bundle.dataset);
    return bundle;
}

// ---- tables -------------------------------------------------------------------

namespace {

std::string format_cell(const std::vector<double>& values) {
    SeedStats stats = aggregate_seeds(values);
    stats.mean *= 100.0;
    stats.stddev *= 100.0;
    return format_mean_std(stats);
}

struct RowGroup {
    std::string label;
    std::vector<double> test_micro, test_macro, dev_micro, dev_macro;
    std::vector<std::uint64_t> seeds;
};

std::vector<RowGroup> group_rows(const std::vector<RunMetrics>& runs) {
    std::vector<RowGroup> groups;
    for (const RunMetrics& run : runs) {
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const RowGroup& g) { return g.label == run.row_label; });
        if (it == groups.end()) {
            groups.push_back(RowGroup{run.row_label, {}, {}, {}, {}, {}});
            it = groups.end() - 1;
        }
        it->test_micro.push_back(run.test_micro);
        it->test_macro.push_back(run.test_macro);
        it->dev_micro.push_back(run.dev_micro);
        it->dev_macro.push_back(run.dev_macro);
        it->seeds.push_back(run.seed);
    }
    return groups;
}

}  // namespace

ResultTable aggregate_table(const std::vector<RunMetrics>& runs) {
    if (runs.empty()) {
        throw ContractError("no runs to tabulate");
    }
    ResultTable table;
    table.header = {"Method", "test µ-F1", "test m-F1", "dev µ-F1", "dev m-F1"};
    for (const RowGroup& g : group_rows(runs)) {
        table.rows.push_back({g.label, format_cell(g.test_micro), format_cell(g.test_macro),
                              format_cell(g.dev_micro), format_cell(g.dev_macro)});
    }
    return table;
}

ResultTable ablation_report(const std::vector<RunMetrics>& runs) {
    if (runs.empty()) {
        throw ContractError("ablation report: empty run list");
    }
    const std::vector<RowGroup> groups = group_rows(runs);
    std::vector<std::uint64_t> reference = groups.front().seeds;
    std::sort(reference.begin(), reference.end());
    for (const RowGroup& g : groups) {
        std::vector<std::uint64_t> seeds = g.seeds;
        std::sort(seeds.begin(), seeds.end());
        if (seeds != reference) {
            throw ContractError("ablation report: row '" + g.label +
                                "' has a mismatched seed set");
        }
    }
    return aggregate_table(runs);
}

std::string ResultTable::csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) {
        os << (i ? "," : "") << header[i];
    }
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            os << (i ? "," : "") << row[i];
        }
        os << '\n';
    }
    return os.str();
}

std::string ResultTable::text() const {
    std::vector<std::size_t> widths(header.size(), 0);
    auto measure = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            // column width in characters; the metric cells contain a
            // multi-byte ± sign, count code points not bytes
            std::size_t chars = 0;
            for (unsigned char c : row[i]) {
                chars += (c & 0xc0) != 0x80;
            }
            widths[i] = std::max(widths[i], chars);
        }
    };
    measure(header);
    for (const auto& row : rows) {
        measure(row);
    }
    std::ostringstream os;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::size_t chars = 0;
            for (unsigned char c : row[i]) {
                chars += (c & 0xc0) != 0x80;
            }
            os << row[i];
            if (i + 1 < row.size()) {
                os << std::string(widths[i] - chars + 2, ' ');
            }
        }
        os << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (std::size_t w : widths) {
        total += w + 2;
    }
    os << std::string(total > 2 ? total - 2 : total, '-') << '\n';
    for (const auto& row : rows) {
        emit(row);
    }
    return os.str();
}

NovelLabelReport novel_label_report(const std::vector<Generation>& generations) {
    NovelLabelReport report;
    std::set<std::string> distinct;
    for (const Generation& gen : generations) {
        report.total += gen.parsed.total_fragments;
        report.novel += static_cast<long>(gen.parsed.novel.size());
        for (const std::string& f : gen.parsed.novel) {
            distinct.insert(f);
        }
    }
    report.fragments.assign(distinct.begin(), distinct.end());
    return report;
}

// ---- experiment runner -----------------------------------------------------------

namespace {

struct RunSpec {
    std::string row_label;
    MethodKind method;
    int decoder_layers = -1;  // -1 keeps the preset depth
};

std::vector<RunSpec> expand_runs(const ExperimentConfig& cfg) {
    std::vector<RunSpec> specs;
    if (cfg.ablation == "attention") {
        for (const char* m : {"encoder_head", "t5enc_single_step", "t5enc:causal", "t5enc:none",
                              "t5enc:full"}) {
            const MethodKind kind = MethodKind::parse(m);
            specs.push_back(RunSpec{kind.display_name(), kind, -1});
        }
    } else if (cfg.ablation == "depth") {
        for (int depth : {1, 4, 6, 12}) {
            const MethodKind kind = MethodKind::parse("t5enc:causal");
            specs.push_back(RunSpec{"T5Enc (N=" + std::to_string(depth) + ")", kind, depth});
        }
    } else {
        for (const std::string& m : cfg.methods) {
            const MethodKind kind = MethodKind::parse(m);
            specs.push_back(RunSpec{kind.display_name(), kind, -1});
        }
    }
    return specs;
}

DescriptorScheme scheme_for(const ExperimentConfig& cfg, const MethodKind& method) {
    if (cfg.scheme != "auto") {
        return descriptor_scheme_from_string(cfg.scheme);
    }
    switch (method.family) {
        case MethodKind::Family::Seq2Seq:
            return DescriptorScheme::Original;
        case MethodKind::Family::T5Enc:
            return cfg.level == 1 ? DescriptorScheme::Simplified : DescriptorScheme::Pseudo;
        default:
            return DescriptorScheme::Original;
    }
}

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c == ':' || c == ' ' || c == '/') {
            c = '-';
        }
    }
    return out;
}

}  // namespace

std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    DataBundle bundle = load_or_generate(cfg);
    const std::vector<RunSpec> specs = expand_runs(cfg);

    // validate every cell before training anything
    for (const RunSpec& spec : specs) {
        const DescriptorScheme scheme = scheme_for(cfg, spec.method);
        if (spec.method.family == MethodKind::Family::T5Enc &&
            scheme != DescriptorScheme::Simplified && scheme != DescriptorScheme::Pseudo) {
            throw ConfigError("method " + spec.method.canonical() +
                              " requires simplified or pseudo descriptors");
        }
        if (spec.method.family == MethodKind::Family::Seq2Seq &&
            scheme == DescriptorScheme::Pseudo) {
            throw ConfigError("seq2seq cannot use pseudo descriptors");
        }
        if (const auto note = spec.method.parity_note()) {
            log << "note: " << *note << "\n";
        }
    }

    fs::create_directories(cfg.out_dir);
    TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.max_epochs = cfg.max_epochs;
    tc.patience = cfg.patience;
    tc.batch_size = cfg.batch_size;
    tc.threshold = cfg.threshold;

    std::vector<RunMetrics> runs;
    std::vector<std::string> run_dirs;
    for (const RunSpec& spec : specs) {
        for (std::uint64_t seed : cfg.seeds) {
            ModelConfig mc = ModelConfig::size_preset(cfg.size);
            mc.dropout = cfg.dropout;
            if (spec.decoder_layers > 0) {
                mc.decoder_layers = spec.decoder_layers;
            }
            const DescriptorScheme scheme = scheme_for(cfg, spec.method);
            auto vocab = std::make_shared<const LabelVocabulary>(
                cfg.level, scheme, bundle.dataset.labels(cfg.level));
            auto tokenizer = std::make_shared<const Tokenizer>(bundle.dataset.tokenizer);
            MethodKind method = spec.method;
            method.decoding.max_len = cfg.max_gen_len;
            Model model = build_model(mc, method, vocab, tokenizer, seed);
            tc.seed = seed;

            const std::string run_name = bundle.name + "_l" + std::to_string(cfg.level) + "_" +
                                         sanitize(spec.decoder_layers > 0
                                                      ? spec.method.canonical() + "-d" +
                                                            std::to_string(spec.decoder_layers)
                                                      : spec.method.canonical()) +
                                         "_" + cfg.size + "_seed" + std::to_string(seed);
            const fs::path run_dir = fs::path(cfg.out_dir) / run_name;
            fs::create_directories(run_dir);
            log << "run " << run_name << ": training...\n";
            const TrainResult tr = train(model, bundle.dataset, bundle.split, tc);

            RunMetrics rm;
            rm.row_label = spec.row_label;
            rm.method = spec.method.canonical();
            rm.seed = seed;
            rm.dev_micro = tr.best_dev_micro;
            rm.dev_macro = tr.best_dev_macro;
            rm.best_epoch = tr.best_epoch;
            rm.epochs_run = tr.epochs_run;

            // test-split evaluation with the best checkpoint
            std::vector<LabelSet> gold, predicted;
            std::vector<Generation> generations;
            for (int id : bundle.split.test) {
                const Document& doc = bundle.dataset.docs[static_cast<std::size_t>(id)];
                gold.push_back(gold_labels(doc, cfg.level));
                if (model.method.is_generative()) {
                    Generation gen = seq2seq_generate(model, doc.tokens, model.method.decoding);
                    predicted.push_back(gen.parsed.labels);
                    generations.push_back(std::move(gen));
                } else {
                    predicted.push_back(predict(model, doc.tokens, cfg.threshold));
                }
            }
            const MetricsReport test = evaluate_sets(gold, predicted, model.num_labels());
            rm.test_micro = test.micro;
            rm.test_macro = test.macro;

            save_history_jsonl(tr.history, (run_dir / "history.jsonl").string());
            save_checkpoint((run_dir / "checkpoint.bin").string(), model.cfg, model.params,
                            {{"method", model.method.canonical()},
                             {"level", std::to_string(cfg.level)},
                             {"scheme", to_string(scheme)},
                             {"dataset", bundle.name},
                             {"seed", std::to_string(seed)}});

            nlohmann::ordered_json mj;
            mj["method"] = spec.method.canonical();
            mj["row_label"] = spec.row_label;
            mj["seed"] = seed;
            mj["dev_micro"] = rm.dev_micro;
            mj["dev_macro"] = rm.dev_macro;
            mj["test_micro"] = rm.test_micro;
            mj["test_macro"] = rm.test_macro;
            mj["best_epoch"] = rm.best_epoch;
            mj["epochs_run"] = rm.epochs_run;
            if (model.method.is_generative()) {
                const NovelLabelReport novel = novel_label_report(generations);
                rm.novel_rate = novel.rate_percent();
                mj["novel_rate_percent"] = rm.novel_rate;
                mj["novel_fragments"] = novel.fragments;
                std::ofstream gos(run_dir / "generations.jsonl", std::ios::binary);
                for (std::size_t i = 0; i < generations.size(); ++i) {
                    nlohmann::ordered_json gj;
                    gj["doc_id"] = bundle.split.test[i];
                    gj["text"] = generations[i].text;
                    gj["log_prob"] = generations[i].log_prob;
                    gj["novel"] = generations[i].parsed.novel;
                    gj["valid"] = static_cast<long>(generations[i].parsed.labels.size());
                    gos << gj.dump() << '\n';
                }
            }
            std::ofstream mos(run_dir / "metrics.json", std::ios::binary);
            mos << mj.dump(2) << '\n';
            runs.push_back(rm);
            run_dirs.push_back(run_name);
            log << "run " << run_name << ": dev µ-F1 " << rm.dev_micro << ", test µ-F1 "
                << rm.test_micro << "\n";
        }
    }

    const ResultTable table = cfg.ablation.empty() ? aggregate_table(runs) : ablation_report(runs);
    {
        std::ofstream os(fs::path(cfg.out_dir) / "results.csv", std::ios::binary);
        os << table.csv();
    }
    {
        std::ofstream os(fs::path(cfg.out_dir) / "results.txt", std::ios::binary);
        os << table.text();
    }
    {
        char hex[32];
        nlohmann::ordered_json manifest;
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(cfg.config_hash()));
        manifest["config_hash"] = hex;
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(bundle.corpus_hash));
        manifest["corpus_hash"] = hex;
        manifest["dataset"] = bundle.name;
        manifest["level"] = cfg.level;
        manifest["size"] = cfg.size;
        manifest["runs"] = run_dirs;
        std::ofstream os(fs::path(cfg.out_dir) / "manifest.json", std::ios::binary);
        os << manifest.dump(2) << '\n';
    }
    return runs;
}

ResultTable report_from_directory(const std::string& out_dir) {
    const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
    std::ifstream is(manifest_path);
    if (!is) {
        throw DataError("no manifest.json under " + out_dir);
    }
    nlohmann::json manifest;
    is >> manifest;
    std::vector<RunMetrics> runs;
    for (const auto& name : manifest.at("runs")) {
        const fs::path mp = fs::path(out_dir) / name.get<std::string>() / "metrics.json";
        std::ifstream ms(mp);
        if (!ms) {
            throw DataError("missing metrics file: " + mp.string());
        }
        nlohmann::json mj;
        ms >> mj;
        RunMetrics rm;
        rm.row_label = mj.at("row_label").get<std::string>();
        rm.method = mj.at("method").get<std::string>();
        rm.seed = mj.at("seed").get<std::uint64_t>();
        rm.dev_micro = mj.at("dev_micro").get<double>();
        rm.dev_macro = mj.at("dev_macro").get<double>();
        rm.test_micro = mj.at("test_micro").get<double>();
        rm.test_macro = mj.at("test_macro").get<double>();
        rm.best_epoch = mj.at("best_epoch").get<int>();
        rm.epochs_run = mj.at("epochs_run").get<int>();
        runs.push_back(rm);
    }
    return aggregate_table(runs);
}

}  // namespace mltc
