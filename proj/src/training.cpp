#include "mltc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace mltc {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (threshold <= 0.0 || threshold >= 1.0) throw ConfigError("threshold must be in (0,1)");
}

// ---- Adafactor ---------------------------------------------------------------

Adafactor::Adafactor(const ParamStore& params) {
    states_.resize(params.entries().size());
    for (std::size_t i = 0; i < states_.size(); ++i) {
        const ParamEntry& e = params.entries()[i];
        if (e.shape.size() == 2) {
            states_[i].row.assign(static_cast<std::size_t>(e.shape[0]), 0.0);
            states_[i].col.assign(static_cast<std::size_t>(e.shape[1]), 0.0);
        } else {
            states_[i].full.assign(e.values.size(), 0.0);
        }
    }
}

void Adafactor::step(ParamStore& params, const std::vector<std::vector<double>>& grads,
                     double lr) {
    if (grads.size() != params.entries().size()) {
        throw ContractError("adafactor: gradient list does not match parameter list");
    }
    ++t_;
    const double beta = 1.0 - std::pow(static_cast<double>(t_), -0.8);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].empty()) {
            continue;
        }
        ParamEntry& e = params.entries()[i];
        const std::vector<double>& g = grads[i];
        if (g.size() != e.values.size()) {
            throw ContractError("adafactor: gradient size mismatch for " + e.name);
        }
        State& st = states_[i];
        std::vector<double> update(g.size());
        if (e.shape.size() == 2) {
            const int m = e.shape[0], n = e.shape[1];
            std::vector<double> row_sum(static_cast<std::size_t>(m), 0.0);
            std::vector<double> col_sum(static_cast<std::size_t>(n), 0.0);
            for (int r = 0; r < m; ++r) {
                for (int c = 0; c < n; ++c) {
                    const double g2 = g[static_cast<std::size_t>(r) * n + c] *
                                          g[static_cast<std::size_t>(r) * n + c] +
                                      kEps1;
                    row_sum[static_cast<std::size_t>(r)] += g2;
                    col_sum[static_cast<std::size_t>(c)] += g2;
                }
            }
            double total = 0.0;
            for (int r = 0; r < m; ++r) {
                st.row[static_cast<std::size_t>(r)] =
                    beta * st.row[static_cast<std::size_t>(r)] +
                    (1.0 - beta) * row_sum[static_cast<std::size_t>(r)];
                total += st.row[static_cast<std::size_t>(r)];
            }
            for (int c = 0; c < n; ++c) {
                st.col[static_cast<std::size_t>(c)] =
                    beta * st.col[static_cast<std::size_t>(c)] +
                    (1.0 - beta) * col_sum[static_cast<std::size_t>(c)];
            }
            for (int r = 0; r < m; ++r) {
                const double row_scaled = st.row[static_cast<std::size_t>(r)] / total;
                for (int c = 0; c < n; ++c) {
                    const double v = row_scaled * st.col[static_cast<std::size_t>(c)];
                    update[static_cast<std::size_t>(r) * n + c] =
                        g[static_cast<std::size_t>(r) * n + c] / std::sqrt(v);
                }
            }
        } else {
            for (std::size_t k = 0; k < g.size(); ++k) {
                st.full[k] = beta * st.full[k] + (1.0 - beta) * (g[k] * g[k] + kEps1);
                update[k] = g[k] / std::sqrt(st.full[k]);
            }
        }
        double ms = 0.0;
        for (double u : update) {
            ms += u * u;
        }
        const double rms = std::sqrt(ms / static_cast<double>(update.size()));
        const double denom = std::max(1.0, rms / kClip);
        for (std::size_t k = 0; k < update.size(); ++k) {
            e.values[k] -= lr * update[k] / denom;
        }
    }
}

// ---- evaluation -----------------------------------------------------------------

LabelSet gold_labels(const Document& doc, int level) {
    return level == 1 ? doc.labels_l1 : doc.labels_l2;
}

EvalResult evaluate_split(const Model& model, const Dataset& data,
                          const std::vector<int>& doc_ids, double threshold) {
    std::vector<LabelSet> gold, predicted;
    gold.reserve(doc_ids.size());
    predicted.reserve(doc_ids.size());
    for (int id : doc_ids) {
        const Document& doc = data.docs[static_cast<std::size_t>(id)];
        gold.push_back(gold_labels(doc, model.vocab->level()));
        predicted.push_back(predict(model, doc.tokens, threshold));
    }
    const MetricsReport report = evaluate_sets(gold, predicted, model.num_labels());
    return EvalResult{report.micro, report.macro};
}

// ---- training loop ------------------------------------------------------------------

namespace {

std::vector<std::vector<double>> snapshot_params(const ParamStore& params) {
    std::vector<std::vector<double>> copy;
    copy.reserve(params.entries().size());
    for (const ParamEntry& e : params.entries()) {
        copy.push_back(e.values);
    }
    return copy;
}

void restore_params(ParamStore& params, const std::vector<std::vector<double>>& snapshot) {
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        params.entries()[i].values = snapshot[i];
    }
}

}  // namespace

TrainResult train(Model& model, const Dataset& data, const Split& split, const TrainConfig& cfg,
                  const EvalFn& eval_override) {
    cfg.validate();
    if (split.train.empty() || split.dev.empty()) {
        throw ContractError("train: dataset must provide train and dev splits");
    }
    const int level = model.vocab->level();
    Rng rng(cfg.seed);
    Adafactor optimizer(model.params);
    const long steps_per_epoch =
        (static_cast<long>(split.train.size()) + cfg.batch_size - 1) / cfg.batch_size;

    TrainResult result;
    std::vector<std::vector<double>> best_snapshot = snapshot_params(model.params);
    double best_micro = -1.0;
    int evals_since_best = 0;
    long step = 0;

    std::vector<int> order(split.train.begin(), split.train.end());
    std::unordered_map<std::string, std::size_t> entry_index;
    for (std::size_t i = 0; i < model.params.entries().size(); ++i) {
        entry_index[model.params.entries()[i].name] = i;
    }

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const int batch_docs = static_cast<int>(end - start);
            ++step;
            const double lr = step <= steps_per_epoch
                                  ? cfg.learning_rate * static_cast<double>(step) /
                                        static_cast<double>(steps_per_epoch)
                                  : cfg.learning_rate;

            std::vector<std::vector<double>> grad_acc(model.params.entries().size());
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const Document& doc = data.docs[static_cast<std::size_t>(order[k])];
                Tape tape;
                const Tensor loss = method_loss(model, doc.tokens, gold_labels(doc, level),
                                                &tape, /*training=*/true, &rng);
                batch_loss += loss.scalar();
                const Gradients grads = tape.backward(loss);
                for (const auto& [name, node] : tape.named_leaves()) {
                    const std::vector<double>& g = grads.at_node(node);
                    auto& acc = grad_acc[entry_index.at(name)];
                    if (acc.empty()) {
                        acc.assign(g.size(), 0.0);
                    }
                    for (std::size_t j = 0; j < g.size(); ++j) {
                        acc[j] += g[j];
                    }
                }
            }
            batch_loss /= batch_docs;
            double grad_norm_sq = 0.0;
            for (auto& g : grad_acc) {
                for (double& v : g) {
                    v /= batch_docs;
                    grad_norm_sq += v * v;
                }
            }
            const double grad_norm = std::sqrt(grad_norm_sq);
            if (!std::isfinite(batch_loss) || !std::isfinite(grad_norm)) {
                throw TrainingDivergence("non-finite loss at step " + std::to_string(step) +
                                             " (epoch " + std::to_string(epoch) + ", lr " +
                                             std::to_string(lr) + ", grad norm " +
                                             std::to_string(grad_norm) + ")",
                                         step, lr, grad_norm);
            }
            optimizer.step(model.params, grad_acc, lr);
            result.history.push_back(HistoryRow{step, epoch, lr, batch_loss, false, 0.0, 0.0});
        }

        const EvalResult dev = eval_override
                                   ? eval_override(model, epoch)
                                   : evaluate_split(model, data, split.dev, cfg.threshold);
        HistoryRow& row = result.history.back();
        row.has_eval = true;
        row.dev_micro = dev.micro;
        row.dev_macro = dev.macro;
        result.epochs_run = epoch;

        if (dev.micro > best_micro) {
            best_micro = dev.micro;
            result.best_dev_micro = dev.micro;
            result.best_dev_macro = dev.macro;
            result.best_epoch = epoch;
            best_snapshot = snapshot_params(model.params);
            evals_since_best = 0;
        } else {
            ++evals_since_best;
            if (evals_since_best > cfg.patience) {
                break;
            }
        }
    }
    restore_params(model.params, best_snapshot);
    return result;
}

void save_history_jsonl(const std::vector<HistoryRow>& history, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw DataError("cannot write history: " + path);
    }
    char buf[256];
    for (const HistoryRow& row : history) {
        if (row.has_eval) {
            std::snprintf(buf, sizeof(buf),
                          "{\"step\":%ld,\"epoch\":%d,\"lr\":%.17g,\"train_loss\":%.17g,"
                          "\"dev_micro\":%.17g,\"dev_macro\":%.17g}",
                          row.step, row.epoch, row.lr, row.train_loss, row.dev_micro,
                          row.dev_macro);
        } else {
            std::snprintf(buf, sizeof(buf),
                          "{\"step\":%ld,\"epoch\":%d,\"lr\":%.17g,\"train_loss\":%.17g}",
                          row.step, row.epoch, row.lr, row.train_loss);
        }
        os << buf << '\n';
    }
}

}  // namespace mltc
