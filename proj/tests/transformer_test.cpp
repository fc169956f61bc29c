#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "mltc/transformer.hpp"
#include "test_util.hpp"

using namespace mltc;
using namespace mltc::testutil;

namespace {

ModelConfig tiny_config(int vocab = 50) {
    ModelConfig cfg = ModelConfig::size_preset("small");
    cfg.vocab_size = vocab;
    cfg.dropout = 0.0;
    return cfg;
}

ParamStore make_params(const ModelConfig& cfg, bool dec, bool dec_self, std::uint64_t seed) {
    ParamStore store;
    Rng rng(seed);
    init_transformer_params(store, cfg, dec, dec_self, rng);
    return store;
}

EncoderOutput run_encode(const ParamStore& store, const ModelConfig& cfg,
                         const std::vector<int>& tokens) {
    ParamBinder binder(store, nullptr);
    ForwardCtx ctx{cfg, binder, false, nullptr};
    return encode(tokens, ctx);
}

Tensor run_decode(const ParamStore& store, const ModelConfig& cfg,
                  const std::vector<int>& dec_tokens, const EncoderOutput& enc,
                  AttentionScheme scheme) {
    ParamBinder binder(store, nullptr);
    ForwardCtx ctx{cfg, binder, false, nullptr};
    return decode(dec_tokens, enc, scheme, ctx);
}

double max_row_diff(const Tensor& a, const Tensor& b, int row_a, int row_b) {
    const int d = a.dim(1);
    double worst = 0.0;
    for (int j = 0; j < d; ++j) {
        worst = std::max(worst, std::abs(a.at(row_a * d + j) - b.at(row_b * d + j)));
    }
    return worst;
}

}  // namespace

TEST_CASE("attention core contracts") {
    Rng rng(3);

    SUBCASE("single key returns the value row exactly") {
        const Tensor q = random_tensor({1, 8}, rng);
        const Tensor k = random_tensor({1, 8}, rng);
        const Tensor v = random_tensor({1, 8}, rng);
        for (int heads : {1, 2, 4}) {
            const Tensor out = attention(q, k, v, AttnMask::all(1, 1), nullptr, heads);
            for (int j = 0; j < 8; ++j) {
                CHECK(out.at(j) == v.at(j));
            }
        }
    }

    SUBCASE("masked key never influences the output") {
        const Tensor q = random_tensor({3, 8}, rng);
        const Tensor k = random_tensor({4, 8}, rng);
        Tensor v = random_tensor({4, 8}, rng);
        AttnMask mask = AttnMask::all(3, 4);
        for (int i = 0; i < 3; ++i) {
            mask.allow[static_cast<std::size_t>(i) * 4 + 2] = 0;  // block key 2 everywhere
        }
        const Tensor out1 = attention(q, k, v, mask, nullptr, 2);
        std::vector<double> vv = v.values();
        for (int j = 0; j < 8; ++j) {
            vv[2 * 8 + j] += rng.gaussian(0.0, 10.0);  // perturb the blocked row
        }
        const Tensor out2 = attention(q, k, Tensor({4, 8}, vv), mask, nullptr, 2);
        for (std::int64_t i = 0; i < out1.size(); ++i) {
            CHECK(out1.at(i) == doctest::Approx(out2.at(i)).epsilon(1e-12));
        }
    }

    SUBCASE("uniform queries and keys average the unmasked value rows") {
        const Tensor q = Tensor::full({2, 8}, 0.7);
        const Tensor k = Tensor::full({5, 8}, -0.3);
        const Tensor v = random_tensor({5, 8}, rng);
        AttnMask mask = AttnMask::all(2, 5);
        mask.allow[0 * 5 + 4] = 0;  // row 0 sees keys 0..3
        const Tensor out = attention(q, k, v, mask, nullptr, 1);
        for (int j = 0; j < 8; ++j) {
            double mean4 = 0.0, mean5 = 0.0;
            for (int r = 0; r < 5; ++r) {
                mean5 += v.at(r * 8 + j);
                if (r < 4) {
                    mean4 += v.at(r * 8 + j);
                }
            }
            CHECK(out.at(j) == doctest::Approx(mean4 / 4.0).epsilon(1e-9));
            CHECK(out.at(8 + j) == doctest::Approx(mean5 / 5.0).epsilon(1e-9));
        }
    }

    SUBCASE("fully masked query row is a contract error") {
        const Tensor q = random_tensor({2, 4}, rng);
        const Tensor k = random_tensor({3, 4}, rng);
        const Tensor v = random_tensor({3, 4}, rng);
        AttnMask mask = AttnMask::all(2, 3);
        for (int j = 0; j < 3; ++j) {
            mask.allow[1 * 3 + j] = 0;
        }
        CHECK_THROWS_AS(attention(q, k, v, mask, nullptr, 1), ContractError);
    }
}

TEST_CASE("relative position buckets") {
    CHECK(relative_bucket(0, true, 32, 128) == 0);
    CHECK(relative_bucket(0, false, 32, 128) == 0);
    // direction is distinguished bidirectionally
    CHECK(relative_bucket(3, true, 32, 128) != relative_bucket(-3, true, 32, 128));
    // causal bucketing collapses future positions
    CHECK(relative_bucket(5, false, 32, 128) == 0);
    for (int rel = -300; rel <= 300; rel += 7) {
        const int b = relative_bucket(rel, true, 32, 128);
        CHECK(b >= 0);
        CHECK(b < 32);
        const int u = relative_bucket(rel, false, 32, 128);
        CHECK(u >= 0);
        CHECK(u < 32);
    }
}

TEST_CASE("encode shapes and padding behaviour") {
    ModelConfig cfg = tiny_config();
    const ParamStore store = make_params(cfg, false, false, 11);

    SUBCASE("single token gives a 1 x d_model output") {
        const EncoderOutput out = run_encode(store, cfg, {7});
        CHECK(out.hidden.shape() == std::vector<int>{1, cfg.d_model});
    }

    SUBCASE("empty input is a contract error") {
        CHECK_THROWS_AS(run_encode(store, cfg, {}), ContractError);
    }

    SUBCASE("appended padding leaves non-pad states unchanged") {
        const std::vector<int> tokens = {5, 9, 14, 3, 1};
        const EncoderOutput plain = run_encode(store, cfg, tokens);
        std::vector<int> padded = tokens;
        padded.insert(padded.end(), {0, 0, 0});
        const EncoderOutput with_pad = run_encode(store, cfg, padded);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            CHECK(max_row_diff(plain.hidden, with_pad.hidden, static_cast<int>(i),
                               static_cast<int>(i)) < 1e-9);
        }
    }

    SUBCASE("bidirectional attention spreads single-token changes") {
        std::vector<int> tokens = {5, 9, 14, 3, 1};
        const EncoderOutput base = run_encode(store, cfg, tokens);
        tokens[2] = 33;
        const EncoderOutput changed = run_encode(store, cfg, tokens);
        int other_positions_changed = 0;
        for (int i = 0; i < 5; ++i) {
            if (i != 2 && max_row_diff(base.hidden, changed.hidden, i, i) > 1e-12) {
                ++other_positions_changed;
            }
        }
        CHECK(other_positions_changed >= 1);
    }

    SUBCASE("inputs beyond max_seq_len are truncated") {
        ModelConfig short_cfg = cfg;
        short_cfg.max_seq_len = 4;
        const ParamStore short_store = make_params(short_cfg, false, false, 11);
        const EncoderOutput out = run_encode(short_store, short_cfg, {5, 9, 14, 3, 1, 7, 7});
        CHECK(out.hidden.dim(0) == 4);
    }
}

TEST_CASE("decoder attention schemes") {
    ModelConfig cfg = tiny_config();
    Rng probe_rng(5);

    SUBCASE("causal: position 0 ignores later decoder tokens") {
        const ParamStore store = make_params(cfg, true, true, 19);
        for (int trial = 0; trial < 20; ++trial) {
            const EncoderOutput enc = run_encode(store, cfg, {5, 9, 14});
            std::vector<int> dec = {4, 8, 15, 16};
            const Tensor base = run_decode(store, cfg, dec, enc, AttentionScheme::Causal);
            dec[1 + static_cast<int>(probe_rng.below(3))] = probe_rng.range_int(4, 40);
            const Tensor changed = run_decode(store, cfg, dec, enc, AttentionScheme::Causal);
            CHECK(max_row_diff(base, changed, 0, 0) < 1e-9);
        }
    }

    SUBCASE("none: every position ignores every other decoder token") {
        const ParamStore store = make_params(cfg, true, false, 23);
        for (int trial = 0; trial < 20; ++trial) {
            const EncoderOutput enc = run_encode(store, cfg, {5, 9, 14});
            std::vector<int> dec = {4, 8, 15, 16};
            const Tensor base = run_decode(store, cfg, dec, enc, AttentionScheme::None);
            const int keep = static_cast<int>(probe_rng.below(4));
            for (int i = 0; i < 4; ++i) {
                if (i != keep) {
                    dec[static_cast<std::size_t>(i)] = probe_rng.range_int(4, 40);
                }
            }
            const Tensor changed = run_decode(store, cfg, dec, enc, AttentionScheme::None);
            CHECK(max_row_diff(base, changed, keep, keep) < 1e-12);
        }
    }

    SUBCASE("full without relative bias: permutation equivariance") {
        ModelConfig nobias_cfg = cfg;
        nobias_cfg.decoder_relative_bias = false;
        const ParamStore store = make_params(nobias_cfg, true, true, 29);
        for (int trial = 0; trial < 20; ++trial) {
            const EncoderOutput enc = run_encode(store, nobias_cfg, {5, 9, 14});
            std::vector<int> dec = {4, 8, 15, 16, 21};
            std::vector<int> perm = {0, 1, 2, 3, 4};
            probe_rng.shuffle(perm);
            std::vector<int> permuted(dec.size());
            for (std::size_t i = 0; i < dec.size(); ++i) {
                permuted[i] = dec[static_cast<std::size_t>(perm[i])];
            }
            const Tensor base = run_decode(store, nobias_cfg, dec, enc, AttentionScheme::Full);
            const Tensor shuffled =
                run_decode(store, nobias_cfg, permuted, enc, AttentionScheme::Full);
            for (std::size_t i = 0; i < dec.size(); ++i) {
                CHECK(max_row_diff(shuffled, base, static_cast<int>(i), perm[i]) < 1e-9);
            }
        }
    }

    SUBCASE("decode without decoder layers is a contract error") {
        ModelConfig enc_only = cfg;
        enc_only.decoder_layers = 0;
        const ParamStore store = make_params(enc_only, false, false, 31);
        const EncoderOutput enc = run_encode(store, enc_only, {5, 9});
        CHECK_THROWS_AS(run_decode(store, enc_only, {4}, enc, AttentionScheme::Causal),
                        ContractError);
    }
}

TEST_CASE("masking soundness holds across the layer/head grid") {
    Rng probe_rng(61);
    for (int layers : {1, 2}) {
        for (int heads : {1, 2, 4}) {
            ModelConfig cfg = tiny_config();
            cfg.encoder_layers = layers;
            cfg.decoder_layers = layers;
            cfg.num_heads = heads;
            const ParamStore store =
                make_params(cfg, true, true, 900 + static_cast<std::uint64_t>(layers * 10 + heads));
            const EncoderOutput enc = run_encode(store, cfg, {5, 9, 14, 22});

            // causal probe
            std::vector<int> dec = {4, 8, 15, 16};
            const Tensor base = run_decode(store, cfg, dec, enc, AttentionScheme::Causal);
            dec[3] = probe_rng.range_int(4, 40);
            const Tensor changed = run_decode(store, cfg, dec, enc, AttentionScheme::Causal);
            for (int i = 0; i < 3; ++i) {
                CHECK(max_row_diff(base, changed, i, i) < 1e-9);
            }

            // padding probe
            const EncoderOutput padded = run_encode(store, cfg, {5, 9, 14, 22, 0, 0});
            for (int i = 0; i < 4; ++i) {
                CHECK(max_row_diff(enc.hidden, padded.hidden, i, i) < 1e-9);
            }
        }
    }
}

TEST_CASE("output shapes across random configurations") {
    Rng rng(37);
    for (int trial = 0; trial < 12; ++trial) {
        ModelConfig cfg;
        cfg.num_heads = 1 << rng.range_int(0, 2);
        cfg.d_model = cfg.num_heads * rng.range_int(2, 6);
        cfg.d_ff = rng.range_int(4, 24);
        cfg.encoder_layers = rng.range_int(1, 3);
        cfg.decoder_layers = rng.range_int(1, 3);
        cfg.vocab_size = 30;
        cfg.dropout = 0.0;
        const ParamStore store = make_params(cfg, true, true, rng.next_u64());
        const int n = rng.range_int(1, 9);
        const int m = rng.range_int(1, 9);
        std::vector<int> tokens, dec;
        for (int i = 0; i < n; ++i) {
            tokens.push_back(rng.range_int(4, 29));
        }
        for (int i = 0; i < m; ++i) {
            dec.push_back(rng.range_int(4, 29));
        }
        const EncoderOutput enc = run_encode(store, cfg, tokens);
        CHECK(enc.hidden.shape() == std::vector<int>{n, cfg.d_model});
        const Tensor out = run_decode(store, cfg, dec, enc, AttentionScheme::Causal);
        CHECK(out.shape() == std::vector<int>{m, cfg.d_model});
    }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    ModelConfig cfg = tiny_config();
    cfg.dropout = 0.1;
    const ParamStore store = make_params(cfg, true, true, 41);
    const std::string path =
        (std::filesystem::temp_directory_path() / "mltc_ckpt_test.bin").string();
    save_checkpoint(path, cfg, store, {{"method", "t5enc:causal"}, {"level", "2"}});
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.cfg.vocab_size == cfg.vocab_size);
    CHECK(loaded.cfg.d_model == cfg.d_model);
    CHECK(loaded.cfg.dropout == cfg.dropout);
    CHECK(loaded.meta.size() == 2);
    CHECK(loaded.params.entries().size() == store.entries().size());
    for (std::size_t i = 0; i < store.entries().size(); ++i) {
        const ParamEntry& a = store.entries()[i];
        const ParamEntry& b = loaded.params.entries()[i];
        CHECK(a.name == b.name);
        CHECK(a.shape == b.shape);
        for (std::size_t j = 0; j < a.values.size(); ++j) {
            CHECK(a.values[j] == b.values[j]);  // bit-exact
        }
    }
    // identical forward outputs
    const EncoderOutput e1 = run_encode(store, cfg, {5, 9, 14});
    const EncoderOutput e2 = run_encode(loaded.params, loaded.cfg, {5, 9, 14});
    for (std::int64_t i = 0; i < e1.hidden.size(); ++i) {
        CHECK(e1.hidden.at(i) == e2.hidden.at(i));
    }
    std::filesystem::remove(path);
}
