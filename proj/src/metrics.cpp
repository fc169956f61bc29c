#include "mltc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mltc/errors.hpp"

namespace mltc {

double f1_score(long tp, long fp, long fn) {
    const long denom = 2 * tp + fp + fn;
    if (denom == 0) {
        return 0.0;
    }
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double micro_f1(const std::vector<LabelCounts>& per_label) {
    long tp = 0, fp = 0, fn = 0;
    for (const LabelCounts& c : per_label) {
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
    }
    return f1_score(tp, fp, fn);
}

double macro_f1(const std::vector<LabelCounts>& per_label) {
    if (per_label.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const LabelCounts& c : per_label) {
        total += f1_score(c.tp, c.fp, c.fn);
    }
    return total / static_cast<double>(per_label.size());
}

std::vector<LabelCounts> count_predictions(const std::vector<LabelSet>& gold,
                                           const std::vector<LabelSet>& predicted,
                                           int num_labels) {
    if (gold.size() != predicted.size()) {
        throw ContractError("count_predictions: gold and predicted sizes differ");
    }
    std::vector<LabelCounts> counts(static_cast<std::size_t>(num_labels));
    for (std::size_t i = 0; i < gold.size(); ++i) {
        for (int l : predicted[i]) {
            if (l < 0 || l >= num_labels) {
                throw ShapeError("predicted label " + std::to_string(l) + " out of range");
            }
            if (gold[i].count(l)) {
                ++counts[static_cast<std::size_t>(l)].tp;
            } else {
                ++counts[static_cast<std::size_t>(l)].fp;
            }
        }
        for (int l : gold[i]) {
            if (l < 0 || l >= num_labels) {
                throw ShapeError("gold label " + std::to_string(l) + " out of range");
            }
            if (!predicted[i].count(l)) {
                ++counts[static_cast<std::size_t>(l)].fn;
            }
        }
    }
    return counts;
}

MetricsReport evaluate_sets(const std::vector<LabelSet>& gold,
                            const std::vector<LabelSet>& predicted, int num_labels) {
    MetricsReport report;
    report.per_label = count_predictions(gold, predicted, num_labels);
    report.micro = micro_f1(report.per_label);
    report.macro = macro_f1(report.per_label);
    return report;
}

// ---- Fisher ----------------------------------------------------------------

FisherCalculator::FisherCalculator(long max_n) {
    log_fact_.resize(static_cast<std::size_t>(std::max(max_n, 1l)) + 1, 0.0);
    for (std::size_t k = 2; k < log_fact_.size(); ++k) {
        log_fact_[k] = log_fact_[k - 1] + std::log(static_cast<double>(k));
    }
}

double FisherCalculator::p_value(const ContingencyTable& t) const {
    if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0) {
        throw ContractError("contingency counts must be non-negative");
    }
    const long r1 = t.a + t.b;
    const long r2 = t.c + t.d;
    const long c1 = t.a + t.c;
    const long n = r1 + r2;
    if (n == 0 || r1 == 0 || r2 == 0 || c1 == 0 || c1 == n) {
        return 1.0;  // degenerate margins admit a single table
    }
    if (static_cast<std::size_t>(n) >= log_fact_.size()) {
        throw ContractError("FisherCalculator built for smaller corpus size");
    }
    auto lchoose = [this](long nn, long kk) {
        return log_fact_[static_cast<std::size_t>(nn)] - log_fact_[static_cast<std::size_t>(kk)] -
               log_fact_[static_cast<std::size_t>(nn - kk)];
    };
    const double log_denom = lchoose(n, c1);
    auto log_prob = [&](long x) { return lchoose(r1, x) + lchoose(r2, c1 - x) - log_denom; };
    const long lo = std::max(0l, c1 - r2);
    const long hi = std::min(r1, c1);
    const double log_obs = log_prob(t.a);
    const double cutoff = log_obs + std::log1p(1e-7);
    double max_term = -1e308;
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(hi - lo + 1));
    for (long x = lo; x <= hi; ++x) {
        const double lp = log_prob(x);
        if (lp <= cutoff) {
            terms.push_back(lp);
            max_term = std::max(max_term, lp);
        }
    }
    double sum = 0.0;
    for (double lp : terms) {
        sum += std::exp(lp - max_term);
    }
    const double p = std::exp(max_term) * sum;
    return std::min(p, 1.0);
}

double fisher_exact_p(const ContingencyTable& t) {
    FisherCalculator calc(t.a + t.b + t.c + t.d);
    return calc.p_value(t);
}

double significant_pair_rate(const std::vector<LabelSet>& gold_sets, int num_labels,
                             double alpha) {
    if (num_labels < 2) {
        throw ContractError("significant_pair_rate needs at least two labels");
    }
    const long n = static_cast<long>(gold_sets.size());
    // per-label membership bitmaps
    std::vector<std::vector<std::uint8_t>> present(
        static_cast<std::size_t>(num_labels),
        std::vector<std::uint8_t>(gold_sets.size(), 0));
    for (std::size_t d = 0; d < gold_sets.size(); ++d) {
        for (int l : gold_sets[d]) {
            if (l >= 0 && l < num_labels) {
                present[static_cast<std::size_t>(l)][d] = 1;
            }
        }
    }
    FisherCalculator calc(n);
    const int num_pairs = num_labels * (num_labels - 1) / 2;
    std::vector<std::uint8_t> significant(static_cast<std::size_t>(num_pairs), 0);
#pragma omp parallel for schedule(dynamic)
    for (int pair = 0; pair < num_pairs; ++pair) {
        // unrank the pair index
        int i = 0;
        int rest = pair;
        int row = num_labels - 1;
        while (rest >= row) {
            rest -= row;
            --row;
            ++i;
        }
        const int j = i + 1 + rest;
        ContingencyTable t;
        const auto& pi = present[static_cast<std::size_t>(i)];
        const auto& pj = present[static_cast<std::size_t>(j)];
        for (std::size_t d = 0; d < pi.size(); ++d) {
            if (pi[d] && pj[d]) {
                ++t.a;
            } else if (pi[d]) {
                ++t.b;
            } else if (pj[d]) {
                ++t.c;
            } else {
                ++t.d;
            }
        }
        significant[static_cast<std::size_t>(pair)] = calc.p_value(t) < alpha ? 1 : 0;
    }
    long count = 0;
    for (std::uint8_t s : significant) {
        count += s;
    }
    return 100.0 * static_cast<double>(count) / static_cast<double>(num_pairs);
}

// ---- aggregation ------------------------------------------------------------

SeedStats aggregate_seeds(const std::vector<double>& per_seed) {
    if (per_seed.empty()) {
        throw ContractError("aggregate_seeds: no values");
    }
    SeedStats stats;
    for (double v : per_seed) {
        stats.mean += v;
    }
    stats.mean /= static_cast<double>(per_seed.size());
    double ss = 0.0;
    for (double v : per_seed) {
        ss += (v - stats.mean) * (v - stats.mean);
    }
    stats.stddev = std::sqrt(ss / static_cast<double>(per_seed.size()));
    return stats;
}

std::string format_mean_std(const SeedStats& stats) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f ± %.1f", stats.mean, stats.stddev);
    return buf;
}

}  // namespace mltc
