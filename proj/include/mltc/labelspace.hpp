#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mltc/errors.hpp"

namespace mltc {

// Word-level tokenizer over whitespace. Reserved ids: 0 pad/start, 1 eos,
// 2 unk, 3 comma. The comma is split off words so target strings like
// "EU, finance" tokenize to [EU] [,] [finance]. Pseudo label tokens are
// appended after all natural words and never produced from plain text.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kEos = 1;
    static constexpr int kUnk = 2;
    static constexpr int kComma = 3;

    Tokenizer();

    int add_word(const std::string& word);    // idempotent; rejects pseudo-space words
    int add_pseudo(const std::string& word);  // reserved id >= natural_size()
    int lookup(const std::string& word) const;  // kUnk when absent
    bool has(const std::string& word) const;
    bool is_pseudo_id(int id) const { return id >= natural_size_ && natural_size_ > 0; }

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;  // words joined by spaces
    const std::string& word(int id) const;

    int size() const { return static_cast<int>(words_.size()); }
    // One past the last natural-text id; pseudo ids start here.
    int natural_size() const { return natural_size_ > 0 ? natural_size_ : size(); }
    void freeze_natural() { natural_size_ = size(); }

    void save_tsv(const std::string& path) const;
    static Tokenizer load_tsv(const std::string& path);

private:
    int add_entry(const std::string& word);
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
    int natural_size_ = 0;  // 0 while unfrozen
};

enum class DescriptorScheme { Original, Simplified, Numeric, Pseudo };

std::string to_string(DescriptorScheme scheme);
DescriptorScheme descriptor_scheme_from_string(const std::string& s);

struct Label {
    int id = 0;
    int level = 1;
    std::string original;
    std::string simplified;  // single whitespace-free token
    std::string pseudo;      // reserved special token, e.g. <label_1>
};

using LabelSet = std::set<int>;

struct ParseResult {
    LabelSet labels;
    std::vector<std::string> novel;  // non-empty fragments matching no descriptor
    int total_fragments = 0;
};

// Labels of one granularity level under one descriptor scheme. Immutable
// after construction; descriptor lookup is exact-match.
class LabelVocabulary {
public:
    LabelVocabulary(int level, DescriptorScheme scheme, std::vector<Label> labels);

    int level() const { return level_; }
    DescriptorScheme scheme() const { return scheme_; }
    int size() const { return static_cast<int>(labels_.size()); }
    const std::vector<Label>& labels() const { return labels_; }
    const Label& label(int id) const;

    // Descriptor of a label under the active scheme (Numeric: decimal id+1).
    const std::string& descriptor(int id) const;
    std::optional<int> find_descriptor(const std::string& descriptor) const;

    // Token id of a single-token descriptor (Simplified or Pseudo schemes).
    int descriptor_token(int id, const Tokenizer& tok) const;

    // Registers all pseudo descriptors with the tokenizer.
    static void register_pseudo_tokens(const std::vector<Label>& labels, Tokenizer& tok);

private:
    int level_;
    DescriptorScheme scheme_;
    std::vector<Label> labels_;
    std::vector<std::string> descriptors_;  // id -> active-scheme descriptor
    std::unordered_map<std::string, int> by_descriptor_;
};

// Comma-and-space separated descriptors, sorted byte-wise ascending.
std::string format_target(const LabelSet& labels, const LabelVocabulary& vocab);

// Splits on commas, trims whitespace, keeps exact descriptor matches,
// deduplicates; invalid fragments are returned for novel-label telemetry.
ParseResult parse_prediction(const std::string& text, const LabelVocabulary& vocab);

// Label table TSV: id, level, original, simplified, pseudo.
void save_labels_tsv(const std::string& path, const std::vector<Label>& l1,
                     const std::vector<Label>& l2);
void load_labels_tsv(const std::string& path, std::vector<Label>& l1, std::vector<Label>& l2);

// Construction-time validation shared by the synthesizer and the TSV loader.
void validate_labels(const std::vector<Label>& labels, int level);

}  // namespace mltc
