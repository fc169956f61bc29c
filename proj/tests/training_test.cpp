#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mltc/training.hpp"
#include "model_util.hpp"
#include "test_util.hpp"

using namespace mltc;
using namespace mltc::testutil;

namespace {

ParamStore single_param(const std::string& name, std::vector<int> shape,
                        const std::vector<double>& values) {
    ParamStore store;
    store.add(name, std::move(shape)).values = values;
    return store;
}

}  // namespace

TEST_CASE("adafactor: zero gradient leaves parameters unchanged") {
    Rng rng(3);
    const auto init = random_values(12, rng);
    ParamStore store = single_param("w", {3, 4}, init);
    Adafactor opt(store);
    opt.step(store, {std::vector<double>(12, 0.0)}, 1e-2);
    opt.step(store, {{}}, 1e-2);  // absent gradient slot
    for (std::size_t i = 0; i < init.size(); ++i) {
        CHECK(store.entry("w").values[i] == init[i]);
    }
}

TEST_CASE("adafactor rank-1 gradients match the unfactored oracle within 1e-9") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const int m = rng.range_int(2, 8), n = rng.range_int(2, 8);
        const auto init = random_values(static_cast<std::size_t>(m) * n, rng);
        const auto u = random_values(static_cast<std::size_t>(m), rng);
        const auto v = random_values(static_cast<std::size_t>(n), rng);
        std::vector<double> g(static_cast<std::size_t>(m) * n);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                g[static_cast<std::size_t>(i) * n + j] =
                    u[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)];
            }
        }
        const double lr = 1e-2;
        ParamStore store = single_param("w", {m, n}, init);
        Adafactor opt(store);
        opt.step(store, {g}, lr);

        // unfactored second-moment oracle, first step: V = g^2 + eps1
        std::vector<double> update(g.size());
        double ms = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            update[i] = g[i] / std::sqrt(g[i] * g[i] + Adafactor::kEps1);
            ms += update[i] * update[i];
        }
        const double denom = std::max(1.0, std::sqrt(ms / static_cast<double>(g.size())));
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double expected = init[i] - lr * update[i] / denom;
            CHECK(std::abs(store.entry("w").values[i] - expected) < 1e-9);
        }
    }
}

TEST_CASE("adafactor multi-step rank-1 sequence stays factored-exact") {
    Rng rng(6);
    const int m = 4, n = 6;
    const auto init = random_values(m * n, rng);
    const auto u = random_values(m, rng);
    const auto v = random_values(n, rng);
    ParamStore store = single_param("w", {m, n}, init);
    Adafactor opt(store);
    std::vector<double> oracle_v(static_cast<std::size_t>(m) * n, 0.0);
    std::vector<double> oracle_w = init;
    const double lr = 5e-3;
    for (int t = 1; t <= 5; ++t) {
        const double c = rng.gaussian(0.0, 2.0);
        std::vector<double> g(static_cast<std::size_t>(m) * n);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                g[static_cast<std::size_t>(i) * n + j] =
                    c * u[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)];
            }
        }
        opt.step(store, {g}, lr);
        const double beta = 1.0 - std::pow(static_cast<double>(t), -0.8);
        std::vector<double> update(g.size());
        double ms = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            oracle_v[i] = beta * oracle_v[i] + (1.0 - beta) * (g[i] * g[i] + Adafactor::kEps1);
            update[i] = g[i] / std::sqrt(oracle_v[i]);
            ms += update[i] * update[i];
        }
        const double denom = std::max(1.0, std::sqrt(ms / static_cast<double>(g.size())));
        for (std::size_t i = 0; i < g.size(); ++i) {
            oracle_w[i] -= lr * update[i] / denom;
            CHECK(std::abs(store.entry("w").values[i] - oracle_w[i]) < 1e-9);
        }
    }
}

TEST_CASE("adafactor constant gradient converges to lr-sized signed steps") {
    Rng rng(7);
    std::vector<double> g = random_values(10, rng, 2.0);
    for (double& x : g) {
        if (std::abs(x) < 0.1) {
            x = 0.5;  // keep coordinates well away from zero
        }
    }
    ParamStore store = single_param("w", {10}, std::vector<double>(10, 0.0));
    Adafactor opt(store);
    const double lr = 1e-3;
    std::vector<double> prev = store.entry("w").values;
    for (int t = 1; t <= 600; ++t) {
        prev = store.entry("w").values;
        opt.step(store, {g}, lr);
    }
    // V_t -> g^2, so each per-coordinate step approaches lr * sign(g)
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double step = store.entry("w").values[i] - prev[i];
        CHECK(step == doctest::Approx(-lr * (g[i] > 0 ? 1.0 : -1.0)).epsilon(0.02));
    }
}

TEST_CASE("early stopping keeps the best checkpoint (injected metrics)") {
    DatasetSpec spec = dataset_preset("separable8");
    spec.num_docs = 24;
    spec.seed = 9;
    const Dataset ds = generate(spec);
    const Split split = split_chronological(ds, {0.5, 0.25, 0.25});
    Model model = make_model(ds, "encoder_head", 1, DescriptorScheme::Original, 1);

    TrainConfig cfg;
    cfg.max_epochs = 50;
    cfg.patience = 1;
    cfg.batch_size = 4;
    cfg.seed = 1;

    std::vector<std::vector<std::vector<double>>> snapshots;  // params at each eval
    const std::vector<double> injected = {0.9, 0.8, 0.7, 0.6, 0.5};
    const TrainResult result =
        train(model, ds, split, cfg, [&](const Model& m, int epoch) {
            std::vector<std::vector<double>> snap;
            for (const ParamEntry& e : m.params.entries()) {
                snap.push_back(e.values);
            }
            snapshots.push_back(std::move(snap));
            return EvalResult{injected[static_cast<std::size_t>(epoch - 1)], 0.0};
        });

    // patience 1 with a strictly decreasing metric from eval 2 stops at eval 3
    CHECK(result.epochs_run == 3);
    CHECK(result.best_epoch == 1);
    CHECK(result.best_dev_micro == 0.9);
    // the returned parameters are the eval-1 checkpoint
    REQUIRE(snapshots.size() == 3);
    for (std::size_t i = 0; i < model.params.entries().size(); ++i) {
        CHECK(model.params.entries()[i].values == snapshots[0][i]);
    }
}

TEST_CASE("warm-up ramps linearly over the first epoch") {
    DatasetSpec spec = dataset_preset("separable8");
    spec.num_docs = 40;
    spec.seed = 10;
    const Dataset ds = generate(spec);
    const Split split = split_chronological(ds, {0.5, 0.25, 0.25});
    Model model = make_model(ds, "encoder_head", 1, DescriptorScheme::Original, 2);

    TrainConfig cfg;
    cfg.learning_rate = 1e-4;
    cfg.max_epochs = 3;
    cfg.batch_size = 5;  // 20 train docs -> 4 steps per epoch
    cfg.seed = 1;
    const TrainResult result =
        train(model, ds, split, cfg, [](const Model&, int) { return EvalResult{0.5, 0.5}; });

    const long steps_per_epoch = 4;
    for (const HistoryRow& row : result.history) {
        const double expected = row.step <= steps_per_epoch
                                    ? cfg.learning_rate * static_cast<double>(row.step) /
                                          static_cast<double>(steps_per_epoch)
                                    : cfg.learning_rate;
        CHECK(std::abs(row.lr - expected) < 1e-12);
    }
    CHECK(result.history.size() == 12);  // 3 epochs x 4 steps
}

TEST_CASE("training is bit-deterministic in the seed") {
    DatasetSpec spec = dataset_preset("separable8");
    spec.num_docs = 30;
    spec.seed = 12;
    const Dataset ds = generate(spec);
    const Split split = split_chronological(ds, {0.5, 0.25, 0.25});
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = 77;

    Model m1 = make_model(ds, "lwan:1", 1, DescriptorScheme::Original, 5);
    Model m2 = make_model(ds, "lwan:1", 1, DescriptorScheme::Original, 5);
    const TrainResult r1 = train(m1, ds, split, cfg);
    const TrainResult r2 = train(m2, ds, split, cfg);
    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].train_loss == r2.history[i].train_loss);  // bit-identical
        CHECK(r1.history[i].lr == r2.history[i].lr);
    }
    for (std::size_t i = 0; i < m1.params.entries().size(); ++i) {
        CHECK(m1.params.entries()[i].values == m2.params.entries()[i].values);
    }
}

TEST_CASE("non-finite loss aborts with diagnostics") {
    DatasetSpec spec = dataset_preset("separable8");
    spec.num_docs = 24;
    spec.seed = 13;
    const Dataset ds = generate(spec);
    const Split split = split_chronological(ds, {0.5, 0.25, 0.25});
    Model model = make_model(ds, "encoder_head", 1, DescriptorScheme::Original, 3);
    model.params.entry("head.w").values[0] = std::nan("");

    TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.seed = 1;
    try {
        train(model, ds, split, cfg);
        FAIL("expected TrainingDivergence");
    } catch (const TrainingDivergence& e) {
        CHECK(e.step == 1);
        CHECK(e.lr > 0.0);
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("encoder_head memorizes 50 separable docs to training micro-F1 1.0") {
    DatasetSpec spec = dataset_preset("separable8");
    spec.num_docs = 50;
    spec.seed = 15;
    const Dataset ds = generate(spec);
    Split split;
    for (int i = 0; i < 50; ++i) {
        split.train.push_back(i);
    }
    split.dev = split.train;  // dev metric doubles as the memorization probe
    split.test = split.train;
    Model model = make_model(ds, "encoder_head", 1, DescriptorScheme::Original, 6);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.max_epochs = 80;
    cfg.patience = 80;
    cfg.batch_size = 8;
    cfg.seed = 3;
    train(model, ds, split, cfg);
    const EvalResult on_train = evaluate_split(model, ds, split.train, 0.5);
    CHECK(on_train.micro == 1.0);
}

TEST_CASE("encoder_head overfits a small separable task") {
    DatasetSpec spec = dataset_preset("separable8");
    spec.num_docs = 80;
    spec.num_labels_l1 = 4;
    spec.seed = 14;
    const Dataset ds = generate(spec);
    const Split split = split_chronological(ds, {0.6, 0.2, 0.2});
    Model model = make_model(ds, "encoder_head", 1, DescriptorScheme::Original, 4);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.max_epochs = 40;
    cfg.patience = 40;
    cfg.batch_size = 4;
    cfg.seed = 2;
    const TrainResult result = train(model, ds, split, cfg);
    MESSAGE("best dev micro-F1: ", result.best_dev_micro, " at epoch ", result.best_epoch);
    CHECK(result.best_dev_micro >= 0.9);
}
