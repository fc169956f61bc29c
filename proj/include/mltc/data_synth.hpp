#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mltc/labelspace.hpp"

namespace mltc {

struct Document {
    int id = 0;
    std::vector<int> tokens;
    LabelSet labels_l1;
    LabelSet labels_l2;
    std::int64_t timestamp = 0;
};

struct DependencySpec {
    int level = 1;
    int label_a = 0;
    int label_b = 0;
    double lift = 1.0;
};

struct DatasetSpec {
    int num_docs = 1000;
    int num_labels_l1 = 8;
    int num_labels_l2 = 0;  // 0 disables level 2
    double mean_labels_l1 = 1.5;
    double mean_labels_l2 = 0.0;
    double zipf_exponent = 1.1;
    std::vector<DependencySpec> dependencies;
    int doc_len_min = 40;
    int doc_len_max = 200;
    std::uint64_t seed = 1;
};

struct Dataset {
    std::vector<Document> docs;
    std::vector<Label> labels_l1;
    std::vector<Label> labels_l2;
    Tokenizer tokenizer;

    const std::vector<Label>& labels(int level) const {
        return level == 1 ? labels_l1 : labels_l2;
    }
};

struct Split {
    std::vector<int> train, dev, test;
};

enum class SplitMode { Chronological, Random };

// Deterministic synthetic corpus: Zipf label imbalance calibrated to the
// requested labels-per-document after conditioning on non-empty level-1 sets,
// planted pairwise lifts, level-2 labels biased by their parent's activity,
// and per-label signature tokens mixed into noise text.
Dataset generate(const DatasetSpec& spec);

Split split_chronological(const Dataset& ds, const std::array<double, 3>& fractions,
                          SplitMode mode = SplitMode::Chronological, std::uint64_t seed = 0);

void save_jsonl(const Dataset& ds, const std::string& path);
Dataset load_jsonl(const std::string& path, std::vector<Label> labels_l1,
                   std::vector<Label> labels_l2, Tokenizer tokenizer);

// Named dataset presets parameterized after the corpus statistics table
// (label counts and labels-per-document per level); all desk-scale.
DatasetSpec dataset_preset(const std::string& name);
std::vector<std::string> dataset_preset_names();

}  // namespace mltc
