#include "mltc/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

#include <json.hpp>

#include "mltc/rng.hpp"

namespace mltc {

namespace {

constexpr int kSigsPerLabel = 3;
constexpr int kGuaranteedSigs = 2;  // per active label, document length permitting
constexpr double kSigRate = 0.35;
constexpr int kNoiseWords = 160;
constexpr double kChildOffFactor = 0.15;  // P(l2 | parent off) / P(l2 | parent on)
constexpr double kMaxProb = 0.995;

// ---- deterministic label naming -------------------------------------------

const char* kSyllablesL1[16] = {"ba", "ce", "di", "fo", "gu", "ha", "ki", "lo",
                                "mu", "ne", "po", "ra", "su", "ta", "vi", "zo"};
const char* kSyllablesL2[16] = {"bra", "cre", "dro", "fra", "gro", "hra", "kri", "lor",
                                "mur", "nor", "pri", "rok", "sur", "tir", "vor", "zur"};

std::string syllable_word(int index, int level) {
    const char** table = level == 1 ? kSyllablesL1 : kSyllablesL2;
    std::string w = table[index % 16];
    w += table[(index / 16) % 16];
    if (index >= 256) {
        w += table[(index / 256) % 16];
    }
    return w;
}

std::string capitalize(std::string w) {
    if (!w.empty()) {
        w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    }
    return w;
}

std::vector<Label> make_labels(int count, int level, int pseudo_base) {
    std::vector<Label> labels;
    labels.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Label l;
        l.id = i;
        l.level = level;
        l.simplified = syllable_word(i, level);
        l.original = capitalize(l.simplified);
        if (i % 3 == 2) {  // some multi-word originals, as in real taxonomies
            l.original += " " + capitalize(syllable_word((i * 7 + 3) % 256, level));
        }
        l.pseudo = "<label_" + std::to_string(pseudo_base + i + 1) + ">";
        labels.push_back(std::move(l));
    }
    return labels;
}

// ---- calibration helpers ---------------------------------------------------

std::vector<double> zipf_weights(int count, double exponent) {
    std::vector<double> w(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        w[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -exponent);
    }
    return w;
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double target) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double prob_empty(const std::vector<double>& p) {
    double q = 1.0;
    for (double v : p) {
        q *= 1.0 - v;
    }
    return q;
}

// Mixture that realizes a joint probability above the independent product
// while preserving both marginals: with probability pi force both labels on,
// otherwise draw independently with reduced probabilities.
struct PairMixture {
    double pi = 0.0;
    double pa_rest = 0.0;
    double pb_rest = 0.0;
};

PairMixture solve_pair_mixture(double pa, double pb, double joint_target,
                               const std::string& what) {
    const double pmin = std::min(pa, pb);
    if (joint_target < pa * pb - 1e-12 || joint_target > pmin * 0.999) {
        throw SpecError("dependency " + what + " is infeasible: required joint probability " +
                        std::to_string(joint_target) + " outside [" + std::to_string(pa * pb) +
                        ", " + std::to_string(pmin) + ")");
    }
    auto joint = [pa, pb](double pi) {
        return pi + (pa - pi) * (pb - pi) / (1.0 - pi);
    };
    const double pi = bisect(joint, 0.0, pmin * 0.999, joint_target);
    return PairMixture{pi, (pa - pi) / (1.0 - pi), (pb - pi) / (1.0 - pi)};
}

struct PairPlan {
    int a = 0, b = 0;
    PairMixture mix;
};

}  // namespace

// ---- generate -------------------------------------------------------------------

Dataset generate(const DatasetSpec& spec) {
    // -- validation
    if (spec.num_docs < 1) throw SpecError("num_docs must be positive");
    if (spec.num_labels_l1 < 1) throw SpecError("num_labels_l1 must be positive");
    if (spec.num_labels_l2 < 0) throw SpecError("num_labels_l2 must be non-negative");
    if (spec.zipf_exponent < 0.0) throw SpecError("zipf_exponent must be >= 0");
    if (spec.doc_len_min < 1 || spec.doc_len_max < spec.doc_len_min) {
        throw SpecError("document length range is invalid");
    }
    if (spec.mean_labels_l1 < 1.0 || spec.mean_labels_l1 > spec.num_labels_l1) {
        throw SpecError("mean_labels_l1 must lie in [1, num_labels_l1]");
    }
    if (spec.num_labels_l2 == 0) {
        if (spec.mean_labels_l2 != 0.0) {
            throw SpecError("mean_labels_l2 must be 0 when there are no level-2 labels");
        }
    } else if (spec.mean_labels_l2 <= 0.0 || spec.mean_labels_l2 > spec.num_labels_l2) {
        throw SpecError("mean_labels_l2 must lie in (0, num_labels_l2]");
    }
    std::vector<DependencySpec> deps_l1, deps_l2;
    {
        std::vector<std::set<int>> used(3);
        for (const DependencySpec& d : spec.dependencies) {
            if (d.level != 1 && d.level != 2) throw SpecError("dependency level must be 1 or 2");
            const int count = d.level == 1 ? spec.num_labels_l1 : spec.num_labels_l2;
            if (d.label_a < 0 || d.label_a >= count || d.label_b < 0 || d.label_b >= count ||
                d.label_a == d.label_b) {
                throw SpecError("dependency references invalid labels (" +
                                std::to_string(d.label_a) + "," + std::to_string(d.label_b) +
                                ") at level " + std::to_string(d.level));
            }
            if (!(d.lift > 1.0)) throw SpecError("dependency lift must exceed 1");
            auto& seen = used[static_cast<std::size_t>(d.level)];
            if (!seen.insert(d.label_a).second || !seen.insert(d.label_b).second) {
                throw SpecError("a label may participate in at most one dependency pair");
            }
            (d.level == 1 ? deps_l1 : deps_l2).push_back(d);
        }
    }

    Dataset ds;
    ds.labels_l1 = make_labels(spec.num_labels_l1, 1, 0);
    ds.labels_l2 = make_labels(spec.num_labels_l2, 2, spec.num_labels_l1);

    // -- tokenizer: noise words, probe token, signatures, descriptor words
    Tokenizer& tok = ds.tokenizer;
    tok.add_word("label");
    for (int i = 0; i < kNoiseWords; ++i) {
        tok.add_word("w" + std::to_string(i));
    }
    std::vector<std::vector<int>> sig_l1(static_cast<std::size_t>(spec.num_labels_l1));
    std::vector<std::vector<int>> sig_l2(static_cast<std::size_t>(spec.num_labels_l2));
    auto add_label_words = [&tok](const std::vector<Label>& labels,
                                  std::vector<std::vector<int>>& sigs) {
        for (const Label& l : labels) {
            for (int k = 0; k < kSigsPerLabel; ++k) {
                sigs[static_cast<std::size_t>(l.id)].push_back(
                    tok.add_word(l.simplified + "_" + std::to_string(k)));
            }
            tok.add_word(l.simplified);
            std::istringstream words(l.original);
            std::string w;
            while (words >> w) {
                tok.add_word(w);
            }
            tok.add_word(std::to_string(l.id + 1));
        }
    };
    add_label_words(ds.labels_l1, sig_l1);
    add_label_words(ds.labels_l2, sig_l2);
    tok.freeze_natural();
    LabelVocabulary::register_pseudo_tokens(ds.labels_l1, tok);
    LabelVocabulary::register_pseudo_tokens(ds.labels_l2, tok);

    // -- level-1 marginals: scale Zipf weights so the mean conditioned on a
    // non-empty label set hits the target
    const std::vector<double> w1 = zipf_weights(spec.num_labels_l1, spec.zipf_exponent);
    const double w1_total = std::accumulate(w1.begin(), w1.end(), 0.0);
    std::vector<double> p1(w1.size());
    if (spec.num_labels_l1 == 1) {
        p1[0] = 1.0;
    } else {
        auto conditional_mean = [&](double s) {
            double mean = 0.0, empty = 1.0;
            for (double w : w1) {
                const double p = std::min(s * w, kMaxProb);
                mean += p;
                empty *= 1.0 - p;
            }
            return mean / (1.0 - empty);
        };
        const double s_hi = kMaxProb / w1[0];
        if (conditional_mean(s_hi) < spec.mean_labels_l1) {
            throw SpecError("mean_labels_l1 is unreachable with this Zipf exponent");
        }
        const double s = bisect(conditional_mean, 1e-12, s_hi, spec.mean_labels_l1);
        for (std::size_t i = 0; i < w1.size(); ++i) {
            p1[i] = std::min(s * w1[i], kMaxProb);
        }
    }
    const double p_empty = spec.num_labels_l1 == 1 ? 0.0 : prob_empty(p1);
    if (p_empty > 0.98) {
        throw SpecError("level-1 configuration is degenerate (almost all draws empty)");
    }

    // -- level-1 planted pairs: target the post-conditioning lift
    std::vector<PairPlan> plan_l1;
    std::vector<int> pair_of_l1(static_cast<std::size_t>(spec.num_labels_l1), -1);
    for (const DependencySpec& d : deps_l1) {
        const double joint =
            d.lift * p1[static_cast<std::size_t>(d.label_a)] *
            p1[static_cast<std::size_t>(d.label_b)] / (1.0 - p_empty);
        PairPlan plan;
        plan.a = d.label_a;
        plan.b = d.label_b;
        plan.mix = solve_pair_mixture(p1[static_cast<std::size_t>(d.label_a)],
                                      p1[static_cast<std::size_t>(d.label_b)], joint,
                                      "L1 (" + std::to_string(d.label_a) + "," +
                                          std::to_string(d.label_b) + ")");
        pair_of_l1[static_cast<std::size_t>(d.label_a)] =
            static_cast<int>(plan_l1.size());
        pair_of_l1[static_cast<std::size_t>(d.label_b)] = static_cast<int>(plan_l1.size());
        plan_l1.push_back(plan);
    }

    // -- level-2: parents, conditionals, planted pairs
    std::vector<int> parent(static_cast<std::size_t>(spec.num_labels_l2));
    for (int j = 0; j < spec.num_labels_l2; ++j) {
        parent[static_cast<std::size_t>(j)] = j % spec.num_labels_l1;
    }
    for (const DependencySpec& d : deps_l2) {
        // planted level-2 pairs share a parent
        parent[static_cast<std::size_t>(d.label_b)] = parent[static_cast<std::size_t>(d.label_a)];
    }
    std::vector<double> p1_eff(p1);  // level-1 marginals after the non-empty conditioning
    for (double& v : p1_eff) {
        v = std::min(v / (1.0 - p_empty), 1.0);
    }
    std::vector<double> q_on(static_cast<std::size_t>(spec.num_labels_l2), 0.0);
    std::vector<double> m2(static_cast<std::size_t>(spec.num_labels_l2), 0.0);
    if (spec.num_labels_l2 > 0) {
        const std::vector<double> w2 = zipf_weights(spec.num_labels_l2, spec.zipf_exponent);
        const double w2_total = std::accumulate(w2.begin(), w2.end(), 0.0);
        for (int j = 0; j < spec.num_labels_l2; ++j) {
            m2[static_cast<std::size_t>(j)] =
                spec.mean_labels_l2 * w2[static_cast<std::size_t>(j)] / w2_total;
            const double pp = p1_eff[static_cast<std::size_t>(parent[static_cast<std::size_t>(j)])];
            const double denom = pp + kChildOffFactor * (1.0 - pp);
            q_on[static_cast<std::size_t>(j)] = m2[static_cast<std::size_t>(j)] / denom;
            if (q_on[static_cast<std::size_t>(j)] > kMaxProb) {
                throw SpecError("mean_labels_l2 is unreachable: level-2 label " +
                                std::to_string(j) + " would need conditional probability " +
                                std::to_string(q_on[static_cast<std::size_t>(j)]));
            }
        }
    }
    std::vector<PairPlan> plan_l2;
    std::vector<int> pair_of_l2(static_cast<std::size_t>(spec.num_labels_l2), -1);
    for (const DependencySpec& d : deps_l2) {
        const std::size_t a = static_cast<std::size_t>(d.label_a);
        const std::size_t b = static_cast<std::size_t>(d.label_b);
        const double pp = p1_eff[static_cast<std::size_t>(parent[a])];
        const double target_joint = d.lift * m2[a] * m2[b];
        const double off_joint =
            (1.0 - pp) * kChildOffFactor * kChildOffFactor * q_on[a] * q_on[b];
        const double on_joint = (target_joint - off_joint) / pp;
        PairPlan plan;
        plan.a = d.label_a;
        plan.b = d.label_b;
        plan.mix = solve_pair_mixture(q_on[a], q_on[b], on_joint,
                                      "L2 (" + std::to_string(d.label_a) + "," +
                                          std::to_string(d.label_b) + ")");
        pair_of_l2[a] = static_cast<int>(plan_l2.size());
        pair_of_l2[b] = static_cast<int>(plan_l2.size());
        plan_l2.push_back(plan);
    }

    // -- sampling
    Rng rng(spec.seed);
    ds.docs.reserve(static_cast<std::size_t>(spec.num_docs));
    for (int doc_id = 0; doc_id < spec.num_docs; ++doc_id) {
        Document doc;
        doc.id = doc_id;
        doc.timestamp = static_cast<std::int64_t>(rng.below(
            static_cast<std::uint64_t>(spec.num_docs) * 4));

        // level-1 set, redrawn until non-empty
        std::vector<std::uint8_t> active1(static_cast<std::size_t>(spec.num_labels_l1));
        for (int attempt = 0;; ++attempt) {
            if (attempt > 100000) {
                throw SpecError("level-1 sampling failed to produce a non-empty set");
            }
            std::vector<std::uint8_t> fired(plan_l1.size(), 0);
            for (std::size_t k = 0; k < plan_l1.size(); ++k) {
                fired[k] = rng.bernoulli(plan_l1[k].mix.pi) ? 1 : 0;
            }
            bool any = false;
            for (int i = 0; i < spec.num_labels_l1; ++i) {
                const int k = pair_of_l1[static_cast<std::size_t>(i)];
                bool on;
                if (k >= 0 && fired[static_cast<std::size_t>(k)]) {
                    on = true;
                } else if (k >= 0) {
                    const PairPlan& pp = plan_l1[static_cast<std::size_t>(k)];
                    on = rng.bernoulli(i == pp.a ? pp.mix.pa_rest : pp.mix.pb_rest);
                } else {
                    on = rng.bernoulli(p1[static_cast<std::size_t>(i)]);
                }
                active1[static_cast<std::size_t>(i)] = on ? 1 : 0;
                any = any || on;
            }
            if (any) {
                break;
            }
        }
        for (int i = 0; i < spec.num_labels_l1; ++i) {
            if (active1[static_cast<std::size_t>(i)]) {
                doc.labels_l1.insert(i);
            }
        }

        // level-2 set conditioned on parent activity
        std::vector<std::uint8_t> active2(static_cast<std::size_t>(spec.num_labels_l2), 0);
        std::vector<std::uint8_t> fired2(plan_l2.size(), 0);
        std::vector<std::uint8_t> decided(static_cast<std::size_t>(spec.num_labels_l2), 0);
        for (std::size_t k = 0; k < plan_l2.size(); ++k) {
            const PairPlan& pp = plan_l2[k];
            const bool parent_on =
                active1[static_cast<std::size_t>(parent[static_cast<std::size_t>(pp.a)])] != 0;
            if (parent_on) {
                fired2[k] = rng.bernoulli(pp.mix.pi) ? 1 : 0;
                if (fired2[k]) {
                    active2[static_cast<std::size_t>(pp.a)] = 1;
                    active2[static_cast<std::size_t>(pp.b)] = 1;
                    decided[static_cast<std::size_t>(pp.a)] = 1;
                    decided[static_cast<std::size_t>(pp.b)] = 1;
                }
            }
        }
        for (int j = 0; j < spec.num_labels_l2; ++j) {
            if (decided[static_cast<std::size_t>(j)]) {
                continue;
            }
            const bool parent_on =
                active1[static_cast<std::size_t>(parent[static_cast<std::size_t>(j)])] != 0;
            const int k = pair_of_l2[static_cast<std::size_t>(j)];
            double prob;
            if (parent_on && k >= 0) {
                const PairPlan& pp = plan_l2[static_cast<std::size_t>(k)];
                prob = j == pp.a ? pp.mix.pa_rest : pp.mix.pb_rest;
            } else if (parent_on) {
                prob = q_on[static_cast<std::size_t>(j)];
            } else {
                prob = kChildOffFactor * q_on[static_cast<std::size_t>(j)];
            }
            if (rng.bernoulli(prob)) {
                active2[static_cast<std::size_t>(j)] = 1;
            }
        }
        for (int j = 0; j < spec.num_labels_l2; ++j) {
            if (active2[static_cast<std::size_t>(j)]) {
                doc.labels_l2.insert(j);
            }
        }

        // token emission: every active label contributes a guaranteed minimum
        // of signature tokens, the rest mixes signature and noise words
        std::vector<const std::vector<int>*> emitters;
        for (int i : doc.labels_l1) {
            emitters.push_back(&sig_l1[static_cast<std::size_t>(i)]);
        }
        for (int j : doc.labels_l2) {
            emitters.push_back(&sig_l2[static_cast<std::size_t>(j)]);
        }
        const int len = rng.range_int(spec.doc_len_min, spec.doc_len_max);
        doc.tokens.reserve(static_cast<std::size_t>(len));
        const int guaranteed =
            std::min(len / 2, kGuaranteedSigs * static_cast<int>(emitters.size()));
        for (int t = 0; t < guaranteed; ++t) {
            const auto& sigs = *emitters[static_cast<std::size_t>(t) % emitters.size()];
            doc.tokens.push_back(sigs[rng.below(sigs.size())]);
        }
        const int noise_base = tok.lookup("w0");
        for (int t = guaranteed; t < len; ++t) {
            if (rng.bernoulli(kSigRate)) {
                const auto& sigs = *emitters[rng.below(emitters.size())];
                doc.tokens.push_back(sigs[rng.below(sigs.size())]);
            } else {
                doc.tokens.push_back(noise_base + static_cast<int>(rng.below(kNoiseWords)));
            }
        }
        rng.shuffle(doc.tokens);
        ds.docs.push_back(std::move(doc));
    }
    return ds;
}

// ---- splits -----------------------------------------------------------------------

Split split_chronological(const Dataset& ds, const std::array<double, 3>& fractions,
                          SplitMode mode, std::uint64_t seed) {
    const double total = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(total - 1.0) > 1e-9) {
        throw ContractError("split fractions must sum to 1");
    }
    const int n = static_cast<int>(ds.docs.size());
    if (n < 3) {
        throw DataError("fewer documents than splits");
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    if (mode == SplitMode::Chronological) {
        std::sort(order.begin(), order.end(), [&ds](int a, int b) {
            const auto& da = ds.docs[static_cast<std::size_t>(a)];
            const auto& db = ds.docs[static_cast<std::size_t>(b)];
            if (da.timestamp != db.timestamp) {
                return da.timestamp < db.timestamp;
            }
            return da.id < db.id;
        });
    } else {
        Rng rng(seed);
        rng.shuffle(order);
    }
    const int c1 = static_cast<int>(std::llround(n * fractions[0]));
    const int c2 = static_cast<int>(std::llround(n * (fractions[0] + fractions[1])));
    if (c1 < 1 || c2 <= c1 || c2 >= n) {
        throw DataError("split fractions leave an empty split for " + std::to_string(n) +
                        " documents");
    }
    Split split;
    split.train.assign(order.begin(), order.begin() + c1);
    split.dev.assign(order.begin() + c1, order.begin() + c2);
    split.test.assign(order.begin() + c2, order.end());
    return split;
}

// ---- jsonl ------------------------------------------------------------------------

void save_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw DataError("cannot write dataset: " + path);
    }
    for (const Document& doc : ds.docs) {
        nlohmann::ordered_json j;
        j["id"] = doc.id;
        j["tokens"] = doc.tokens;
        auto descriptor_list = [](const LabelSet& set, const std::vector<Label>& labels) {
            std::vector<std::string> out;
            out.reserve(set.size());
            for (int id : set) {
                out.push_back(labels[static_cast<std::size_t>(id)].original);
            }
            std::sort(out.begin(), out.end());
            return out;
        };
        j["labels_l1"] = descriptor_list(doc.labels_l1, ds.labels_l1);
        if (!ds.labels_l2.empty()) {
            j["labels_l2"] = descriptor_list(doc.labels_l2, ds.labels_l2);
        }
        j["timestamp"] = doc.timestamp;
        os << j.dump() << '\n';
    }
}

Dataset load_jsonl(const std::string& path, std::vector<Label> labels_l1,
                   std::vector<Label> labels_l2, Tokenizer tokenizer) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot open dataset: " + path);
    }
    Dataset ds;
    ds.labels_l1 = std::move(labels_l1);
    ds.labels_l2 = std::move(labels_l2);
    ds.tokenizer = std::move(tokenizer);
    std::unordered_map<std::string, int> by_original_l1, by_original_l2;
    for (const Label& l : ds.labels_l1) {
        by_original_l1[l.original] = l.id;
    }
    for (const Label& l : ds.labels_l2) {
        by_original_l2[l.original] = l.id;
    }
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": malformed JSON (" + e.what() +
                            ")");
        }
        Document doc;
        doc.id = j.contains("id") ? j.at("id").get<int>() : static_cast<int>(ds.docs.size());
        const bool has_tokens = j.contains("tokens");
        const bool has_text = j.contains("text");
        if (has_tokens == has_text) {
            throw DataError("line " + std::to_string(lineno) +
                            ": record must have exactly one of 'tokens' or 'text'");
        }
        if (has_tokens) {
            doc.tokens = j.at("tokens").get<std::vector<int>>();
        } else {
            doc.tokens = ds.tokenizer.encode(j.at("text").get<std::string>());
        }
        if (doc.tokens.empty()) {
            throw DataError("line " + std::to_string(lineno) + ": document has no tokens");
        }
        if (!j.contains("labels_l1")) {
            throw DataError("line " + std::to_string(lineno) + ": missing 'labels_l1'");
        }
        auto read_labels = [lineno](const nlohmann::json& arr,
                                    const std::unordered_map<std::string, int>& lookup,
                                    int level) {
            LabelSet set;
            for (const auto& v : arr) {
                const std::string name = v.get<std::string>();
                auto it = lookup.find(name);
                if (it == lookup.end()) {
                    throw DataError("line " + std::to_string(lineno) + ": unknown level-" +
                                    std::to_string(level) + " label '" + name + "'");
                }
                set.insert(it->second);
            }
            return set;
        };
        doc.labels_l1 = read_labels(j.at("labels_l1"), by_original_l1, 1);
        if (doc.labels_l1.empty()) {
            throw DataError("line " + std::to_string(lineno) + ": empty 'labels_l1'");
        }
        if (j.contains("labels_l2")) {
            doc.labels_l2 = read_labels(j.at("labels_l2"), by_original_l2, 2);
        }
        doc.timestamp = j.contains("timestamp") ? j.at("timestamp").get<std::int64_t>()
                                                : static_cast<std::int64_t>(lineno - 1);
        ds.docs.push_back(std::move(doc));
    }
    return ds;
}

// ---- presets ----------------------------------------------------------------------

DatasetSpec dataset_preset(const std::string& name) {
    DatasetSpec spec;
    if (name == "uklex") {
        spec.num_docs = 4000;
        spec.num_labels_l1 = 18;
        spec.mean_labels_l1 = 1.2;
        spec.num_labels_l2 = 69;
        spec.mean_labels_l2 = 1.5;
        spec.zipf_exponent = 1.1;
        spec.doc_len_min = 40;
        spec.doc_len_max = 120;
    } else if (name == "eurlex") {
        spec.num_docs = 4000;
        spec.num_labels_l1 = 21;
        spec.mean_labels_l1 = 3.2;
        spec.num_labels_l2 = 127;
        spec.mean_labels_l2 = 4.5;
        spec.zipf_exponent = 0.9;
        spec.doc_len_min = 40;
        spec.doc_len_max = 120;
    } else if (name == "bioasq") {
        spec.num_docs = 4000;
        spec.num_labels_l1 = 16;
        spec.mean_labels_l1 = 5.6;
        spec.num_labels_l2 = 116;
        spec.mean_labels_l2 = 8.9;
        spec.zipf_exponent = 0.5;
        spec.doc_len_min = 40;
        spec.doc_len_max = 120;
    } else if (name == "mimic") {
        spec.num_docs = 4000;
        spec.num_labels_l1 = 19;
        spec.mean_labels_l1 = 6.0;
        spec.num_labels_l2 = 184;
        spec.mean_labels_l2 = 10.1;
        spec.zipf_exponent = 0.4;
        spec.doc_len_min = 40;
        spec.doc_len_max = 120;
    } else if (name == "dep_l2") {
        // planted-dependency preset used by the trend comparisons
        spec.num_docs = 10000;
        spec.num_labels_l1 = 12;
        spec.mean_labels_l1 = 2.0;
        spec.num_labels_l2 = 60;
        spec.mean_labels_l2 = 2.2;
        spec.zipf_exponent = 1.1;
        spec.doc_len_min = 30;
        spec.doc_len_max = 60;
        for (int k = 0; k < 15; ++k) {
            spec.dependencies.push_back(DependencySpec{2, 10 + 2 * k, 11 + 2 * k, 6.0});
        }
    } else if (name == "separable8") {
        // small easily separable task for overfit checks
        spec.num_docs = 200;
        spec.num_labels_l1 = 8;
        spec.mean_labels_l1 = 1.4;
        spec.num_labels_l2 = 0;
        spec.mean_labels_l2 = 0.0;
        spec.zipf_exponent = 0.3;
        spec.doc_len_min = 40;
        spec.doc_len_max = 64;
    } else {
        throw ConfigError("unknown dataset preset '" + name + "'");
    }
    return spec;
}

std::vector<std::string> dataset_preset_names() {
    return {"uklex", "eurlex", "bioasq", "mimic", "dep_l2", "separable8"};
}

}  // namespace mltc
