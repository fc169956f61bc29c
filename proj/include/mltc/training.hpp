#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mltc/data_synth.hpp"
#include "mltc/methods.hpp"
#include "mltc/metrics.hpp"

namespace mltc {

struct TrainConfig {
    double learning_rate = 1e-4;  // fixed after a one-epoch linear warm-up
    int max_epochs = 50;
    int patience = 3;  // evaluations without improvement tolerated
    int batch_size = 8;
    double threshold = 0.5;  // sigmoid decision threshold for head methods
    std::uint64_t seed = 1;

    void validate() const;
};

// Adafactor with factored second moments for matrices and full second
// moments for vectors; no momentum, decay 1 - t^-0.8, eps 1e-30, update
// clipping at RMS 1.
class Adafactor {
public:
    explicit Adafactor(const ParamStore& params);

    // grads[i] aligns with params.entries()[i]; empty slots mean zero.
    void step(ParamStore& params, const std::vector<std::vector<double>>& grads, double lr);

    long steps_taken() const { return t_; }

    static constexpr double kEps1 = 1e-30;
    static constexpr double kClip = 1.0;

private:
    struct State {
        std::vector<double> row;   // factored, matrices only
        std::vector<double> col;
        std::vector<double> full;  // vectors and scalars
    };
    std::vector<State> states_;
    long t_ = 0;
};

struct EvalResult {
    double micro = 0.0;
    double macro = 0.0;
};

struct HistoryRow {
    long step = 0;
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    bool has_eval = false;
    double dev_micro = 0.0;
    double dev_macro = 0.0;
};

struct TrainResult {
    double best_dev_micro = 0.0;
    double best_dev_macro = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
    std::vector<HistoryRow> history;
};

// Optional evaluation override, used by tests to inject metric sequences.
using EvalFn = std::function<EvalResult(const Model& model, int epoch)>;

LabelSet gold_labels(const Document& doc, int level);

EvalResult evaluate_split(const Model& model, const Dataset& data,
                          const std::vector<int>& doc_ids, double threshold);

// Trains with per-epoch dev evaluation and early stopping on dev micro-F1;
// the model is left holding the best checkpoint's parameters.
TrainResult train(Model& model, const Dataset& data, const Split& split, const TrainConfig& cfg,
                  const EvalFn& eval_override = nullptr);

void save_history_jsonl(const std::vector<HistoryRow>& history, const std::string& path);

}  // namespace mltc
