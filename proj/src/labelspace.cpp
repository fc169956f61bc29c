#include "mltc/labelspace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mltc {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) {
        ++b;
    }
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) {
        --e;
    }
    return s.substr(b, e - b);
}

bool looks_pseudo(const std::string& w) { return w.size() >= 2 && w.front() == '<' && w.back() == '>'; }

}  // namespace

// ---- Tokenizer -----------------------------------------------------------

Tokenizer::Tokenizer() {
    add_entry("<pad>");
    add_entry("</s>");
    add_entry("<unk>");
    add_entry(",");
}

int Tokenizer::add_entry(const std::string& word) {
    auto it = index_.find(word);
    if (it != index_.end()) {
        return it->second;
    }
    const int id = static_cast<int>(words_.size());
    words_.push_back(word);
    index_[word] = id;
    return id;
}

int Tokenizer::add_word(const std::string& word) {
    if (word.empty()) {
        throw DataError("tokenizer: empty word");
    }
    if (word.find_first_of(" \t\n") != std::string::npos) {
        throw DataError("tokenizer: word contains whitespace: '" + word + "'");
    }
    if (natural_size_ > 0) {
        throw ContractError("tokenizer: natural vocabulary is frozen");
    }
    return add_entry(word);
}

int Tokenizer::add_pseudo(const std::string& word) {
    if (!looks_pseudo(word)) {
        throw DataError("tokenizer: pseudo token must look like <...>: '" + word + "'");
    }
    if (natural_size_ == 0) {
        freeze_natural();
    }
    return add_entry(word);
}

int Tokenizer::lookup(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
}

bool Tokenizer::has(const std::string& word) const { return index_.count(word) > 0; }

std::vector<int> Tokenizer::encode(const std::string& text) const {
    std::vector<int> ids;
    std::istringstream iss(text);
    std::string raw;
    while (iss >> raw) {
        // peel leading/trailing commas into their own tokens
        std::size_t b = 0, e = raw.size();
        int lead = 0, tail = 0;
        while (b < e && raw[b] == ',') {
            ++b;
            ++lead;
        }
        while (e > b && raw[e - 1] == ',') {
            --e;
            ++tail;
        }
        for (int i = 0; i < lead; ++i) {
            ids.push_back(kComma);
        }
        if (e > b) {
            const std::string word = raw.substr(b, e - b);
            const int id = lookup(word);
            // natural text never yields pseudo ids
            ids.push_back(is_pseudo_id(id) ? kUnk : id);
        }
        for (int i = 0; i < tail; ++i) {
            ids.push_back(kComma);
        }
    }
    return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kPad || id == kEos) {
            continue;
        }
        if (id == kComma) {
            out += ',';  // attaches to the previous word
            continue;
        }
        if (!out.empty()) {
            out += ' ';
        }
        out += word(id);
    }
    return out;
}

const std::string& Tokenizer::word(int id) const {
    if (id < 0 || id >= size()) {
        throw ShapeError("tokenizer: id " + std::to_string(id) + " out of range");
    }
    return words_[static_cast<std::size_t>(id)];
}

void Tokenizer::save_tsv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) {
        throw DataError("cannot write tokenizer file: " + path);
    }
    os << "#natural\t" << natural_size() << "\n";
    for (int i = 0; i < size(); ++i) {
        os << i << '\t' << words_[static_cast<std::size_t>(i)] << '\n';
    }
}

Tokenizer Tokenizer::load_tsv(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot open tokenizer file: " + path);
    }
    std::string line;
    if (!std::getline(is, line) || line.rfind("#natural\t", 0) != 0) {
        throw DataError("tokenizer file missing #natural header: " + path);
    }
    const int natural = std::stoi(line.substr(9));
    Tokenizer tok;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("tokenizer file line " + std::to_string(lineno) + ": missing tab");
        }
        const int id = std::stoi(line.substr(0, tab));
        const std::string word = line.substr(tab + 1);
        if (id < 4) {
            continue;  // reserved entries are implicit
        }
        const int got = id < natural ? tok.add_word(word) : tok.add_pseudo(word);
        if (got != id) {
            throw DataError("tokenizer file line " + std::to_string(lineno) +
                            ": non-contiguous id " + std::to_string(id));
        }
    }
    if (tok.natural_size_ == 0) {
        tok.freeze_natural();
    }
    return tok;
}

// ---- schemes / labels ---------------------------------------------------------

std::string to_string(DescriptorScheme scheme) {
    switch (scheme) {
        case DescriptorScheme::Original: return "original";
        case DescriptorScheme::Simplified: return "simplified";
        case DescriptorScheme::Numeric: return "numeric";
        case DescriptorScheme::Pseudo: return "pseudo";
    }
    return "original";
}

DescriptorScheme descriptor_scheme_from_string(const std::string& s) {
    if (s == "original") return DescriptorScheme::Original;
    if (s == "simplified") return DescriptorScheme::Simplified;
    if (s == "numeric") return DescriptorScheme::Numeric;
    if (s == "pseudo") return DescriptorScheme::Pseudo;
    throw ConfigError("unknown descriptor scheme '" + s + "'");
}

void validate_labels(const std::vector<Label>& labels, int level) {
    std::set<std::string> originals, simplifieds, pseudos;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const Label& l = labels[i];
        if (l.id != static_cast<int>(i)) {
            throw DataError("label ids must be contiguous from 0 within a level");
        }
        if (l.level != level) {
            throw DataError("label '" + l.original + "' has level " + std::to_string(l.level) +
                            ", expected " + std::to_string(level));
        }
        if (l.original.empty() || l.simplified.empty() || l.pseudo.empty()) {
            throw DataError("label " + std::to_string(l.id) + " has an empty descriptor form");
        }
        // comma-bearing descriptors would be ambiguous under comma-delimited parsing
        if (l.original.find(',') != std::string::npos) {
            throw DataError("label descriptor contains a comma: '" + l.original +
                            "' (provide a simplified alias instead)");
        }
        if (l.simplified.find_first_of(" \t,") != std::string::npos) {
            throw DataError("simplified descriptor must be a single token: '" + l.simplified +
                            "'");
        }
        if (!looks_pseudo(l.pseudo)) {
            throw DataError("pseudo descriptor must look like <...>: '" + l.pseudo + "'");
        }
        if (!originals.insert(l.original).second || !simplifieds.insert(l.simplified).second ||
            !pseudos.insert(l.pseudo).second) {
            throw DataError("duplicate descriptor within level " + std::to_string(level) +
                            " for label " + std::to_string(l.id));
        }
    }
}

LabelVocabulary::LabelVocabulary(int level, DescriptorScheme scheme, std::vector<Label> labels)
    : level_(level), scheme_(scheme), labels_(std::move(labels)) {
    if (labels_.empty()) {
        throw DataError("label vocabulary is empty");
    }
    if (level != 1 && level != 2) {
        throw DataError("label level must be 1 or 2");
    }
    validate_labels(labels_, level);
    descriptors_.reserve(labels_.size());
    for (const Label& l : labels_) {
        switch (scheme_) {
            case DescriptorScheme::Original: descriptors_.push_back(l.original); break;
            case DescriptorScheme::Simplified: descriptors_.push_back(l.simplified); break;
            case DescriptorScheme::Numeric: descriptors_.push_back(std::to_string(l.id + 1)); break;
            case DescriptorScheme::Pseudo: descriptors_.push_back(l.pseudo); break;
        }
        if (!by_descriptor_.emplace(descriptors_.back(), l.id).second) {
            throw DataError("duplicate descriptor '" + descriptors_.back() + "' under scheme " +
                            to_string(scheme_));
        }
    }
}

const Label& LabelVocabulary::label(int id) const {
    if (id < 0 || id >= size()) {
        throw DataError("label id " + std::to_string(id) + " is not in the level-" +
                        std::to_string(level_) + " vocabulary");
    }
    return labels_[static_cast<std::size_t>(id)];
}

const std::string& LabelVocabulary::descriptor(int id) const {
    label(id);
    return descriptors_[static_cast<std::size_t>(id)];
}

std::optional<int> LabelVocabulary::find_descriptor(const std::string& descriptor) const {
    auto it = by_descriptor_.find(descriptor);
    if (it == by_descriptor_.end()) {
        return std::nullopt;
    }
    return it->second;
}

int LabelVocabulary::descriptor_token(int id, const Tokenizer& tok) const {
    if (scheme_ != DescriptorScheme::Simplified && scheme_ != DescriptorScheme::Pseudo) {
        throw ConfigError("single-token descriptors require the simplified or pseudo scheme, "
                          "active scheme is " +
                          to_string(scheme_));
    }
    const std::string& d = descriptor(id);
    if (!tok.has(d)) {
        throw ConfigError("descriptor '" + d + "' of label '" + label(id).original +
                          "' is not a single vocabulary token");
    }
    return tok.lookup(d);
}

void LabelVocabulary::register_pseudo_tokens(const std::vector<Label>& labels, Tokenizer& tok) {
    for (const Label& l : labels) {
        tok.add_pseudo(l.pseudo);
    }
}

// ---- target formatting / parsing ---------------------------------------------

std::string format_target(const LabelSet& labels, const LabelVocabulary& vocab) {
    std::vector<std::string> descriptors;
    descriptors.reserve(labels.size());
    for (int id : labels) {
        descriptors.push_back(vocab.descriptor(id));  // throws on unknown ids
    }
    std::sort(descriptors.begin(), descriptors.end());  // byte-wise ascending
    std::string out;
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += descriptors[i];
    }
    return out;
}

ParseResult parse_prediction(const std::string& text, const LabelVocabulary& vocab) {
    ParseResult result;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::size_t end = comma == std::string::npos ? text.size() : comma;
        const std::string fragment = trim(text.substr(start, end - start));
        if (!fragment.empty()) {
            ++result.total_fragments;
            if (auto id = vocab.find_descriptor(fragment)) {
                result.labels.insert(*id);
            } else {
                result.novel.push_back(fragment);
            }
        }
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return result;
}

// ---- label table io -----------------------------------------------------------

void save_labels_tsv(const std::string& path, const std::vector<Label>& l1,
                     const std::vector<Label>& l2) {
    std::ofstream os(path);
    if (!os) {
        throw DataError("cannot write label file: " + path);
    }
    for (const auto* group : {&l1, &l2}) {
        for (const Label& l : *group) {
            os << l.id << '\t' << l.level << '\t' << l.original << '\t' << l.simplified << '\t'
               << l.pseudo << '\n';
        }
    }
}

void load_labels_tsv(const std::string& path, std::vector<Label>& l1, std::vector<Label>& l2) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot open label file: " + path);
    }
    l1.clear();
    l2.clear();
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::size_t pos = 0;
        for (int f = 0; f < 4; ++f) {
            const auto tab = line.find('\t', pos);
            if (tab == std::string::npos) {
                throw DataError("label file line " + std::to_string(lineno) +
                                ": expected 5 tab-separated fields");
            }
            fields.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        fields.push_back(line.substr(pos));
        Label l;
        try {
            l.id = std::stoi(fields[0]);
            l.level = std::stoi(fields[1]);
        } catch (const std::exception&) {
            throw DataError("label file line " + std::to_string(lineno) + ": bad id or level");
        }
        l.original = fields[2];
        l.simplified = fields[3];
        l.pseudo = fields[4];
        if (l.level == 1) {
            l1.push_back(l);
        } else if (l.level == 2) {
            l2.push_back(l);
        } else {
            throw DataError("label file line " + std::to_string(lineno) + ": level must be 1 or 2");
        }
    }
    validate_labels(l1, 1);
    validate_labels(l2, 2);
}

}  // namespace mltc
