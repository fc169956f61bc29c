#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mltc/labelspace.hpp"

namespace mltc {

struct LabelCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

// F1 with the 0/0 := 0 convention.
double f1_score(long tp, long fp, long fn);

// F1 of globally pooled counts.
double micro_f1(const std::vector<LabelCounts>& per_label);

// Unweighted mean of per-label F1; an untouched label contributes 0.
double macro_f1(const std::vector<LabelCounts>& per_label);

std::vector<LabelCounts> count_predictions(const std::vector<LabelSet>& gold,
                                           const std::vector<LabelSet>& predicted,
                                           int num_labels);

struct MetricsReport {
    double micro = 0.0;
    double macro = 0.0;
    std::vector<LabelCounts> per_label;
};

MetricsReport evaluate_sets(const std::vector<LabelSet>& gold,
                            const std::vector<LabelSet>& predicted, int num_labels);

// a: both present, b: first only, c: second only, d: both absent.
struct ContingencyTable {
    long a = 0;
    long b = 0;
    long c = 0;
    long d = 0;
};

// Two-sided Fisher exact p-value: the sum of hypergeometric probabilities of
// all tables with the observed margins whose point probability does not
// exceed the observed one (with 1e-7 relative slack). Log-space evaluation
// with cumulative log-factorials. Degenerate margins give p = 1.
double fisher_exact_p(const ContingencyTable& t);

// Precomputed log-factorial table for repeated tests over one corpus size.
class FisherCalculator {
public:
    explicit FisherCalculator(long max_n);
    double p_value(const ContingencyTable& t) const;

private:
    std::vector<double> log_fact_;
};

// Percentage of unordered label pairs whose gold co-occurrence is significant
// at `alpha` over the given documents' gold sets.
double significant_pair_rate(const std::vector<LabelSet>& gold_sets, int num_labels,
                             double alpha = 0.001);

struct SeedStats {
    double mean = 0.0;
    double stddev = 0.0;  // population std (divide by n)
};

SeedStats aggregate_seeds(const std::vector<double>& per_seed);

// "81.0 ± 0.7" style, one decimal.
std::string format_mean_std(const SeedStats& stats);

}  // namespace mltc
