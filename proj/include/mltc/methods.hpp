#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mltc/data_synth.hpp"
#include "mltc/labelspace.hpp"
#include "mltc/transformer.hpp"

namespace mltc {

struct Decoding {
    enum class Kind { Greedy, Beam };
    Kind kind = Kind::Beam;
    int beam_width = 4;
    int max_len = 64;
};

// One of the classification methods: two encoder-only (Encoder+Head, LWAN)
// and three decoder-based (Seq2Seq, T5Enc with a self-attention scheme, and
// the single-step T5Enc ablation).
struct MethodKind {
    enum class Family { EncoderHead, Lwan, Seq2Seq, T5Enc, T5EncSingleStep };

    Family family = Family::EncoderHead;
    int lwan_heads = 1;
    Decoding decoding;                                  // Seq2Seq only
    AttentionScheme scheme = AttentionScheme::Causal;   // T5Enc only

    static MethodKind parse(const std::string& text);
    std::string canonical() const;     // round-trips through parse
    std::string display_name() const;  // table row label

    bool uses_decoder() const {
        return family == Family::Seq2Seq || family == Family::T5Enc ||
               family == Family::T5EncSingleStep;
    }
    bool is_generative() const { return family == Family::Seq2Seq; }
    bool decoder_self_attention() const {
        return uses_decoder() && !(family == Family::T5Enc && scheme == AttentionScheme::None);
    }
    // Head-count grid studied in the reference experiments.
    std::optional<std::string> parity_note() const;
};

// A ready-to-run model: architecture config, method, label vocabulary for the
// active level, tokenizer, and all parameters.
struct Model {
    ModelConfig cfg;
    MethodKind method;
    std::shared_ptr<const LabelVocabulary> vocab;
    std::shared_ptr<const Tokenizer> tokenizer;
    ParamStore params;
    std::vector<int> descriptor_tokens;  // T5Enc decoder input, one per label
    int probe_token = -1;                // single-step decoder input

    int num_labels() const { return vocab->size(); }
};

Model build_model(ModelConfig cfg, const MethodKind& method,
                  std::shared_ptr<const LabelVocabulary> vocab,
                  std::shared_ptr<const Tokenizer> tokenizer, std::uint64_t seed);

// Truncates to max_seq_len - 1 and guarantees a trailing end-of-sequence
// token.
std::vector<int> prepare_input(const Model& model, const std::vector<int>& tokens);

// ---- forward passes ----------------------------------------------------------
// All return [L] label logits. `tape` enables gradient recording; dropout is
// applied only when `training` with a non-null rng.

Tensor encoder_head_forward(const Model& model, const std::vector<int>& tokens,
                            Tape* tape = nullptr, bool training = false, Rng* rng = nullptr);
Tensor lwan_forward(const Model& model, const std::vector<int>& tokens, Tape* tape = nullptr,
                    bool training = false, Rng* rng = nullptr);
Tensor t5enc_forward(const Model& model, const std::vector<int>& tokens, Tape* tape = nullptr,
                     bool training = false, Rng* rng = nullptr);
Tensor t5enc_single_step_forward(const Model& model, const std::vector<int>& tokens,
                                 Tape* tape = nullptr, bool training = false, Rng* rng = nullptr);

// Dispatch over the four head-producing methods (not Seq2Seq).
Tensor method_logits(const Model& model, const std::vector<int>& tokens, Tape* tape = nullptr,
                     bool training = false, Rng* rng = nullptr);

// Teacher-forced loss on the canonical target string for the gold set.
Tensor seq2seq_loss(const Model& model, const std::vector<int>& tokens, const LabelSet& gold,
                    Tape* tape = nullptr, bool training = false, Rng* rng = nullptr);

// Per-method training loss (BCE over label logits, or the Seq2Seq loss).
Tensor method_loss(const Model& model, const std::vector<int>& tokens, const LabelSet& gold,
                   Tape* tape = nullptr, bool training = false, Rng* rng = nullptr);

// ---- generation ----------------------------------------------------------------

struct Generation {
    std::vector<int> token_ids;  // emitted ids, without the final eos
    std::string text;
    double log_prob = 0.0;  // sum of emitted token log-probabilities
    ParseResult parsed;
};

Generation seq2seq_generate(const Model& model, const std::vector<int>& tokens,
                            const Decoding& decoding);

// Next-token log-probabilities given `prefix` (which starts with the pad
// start token). Exposed so tests can recompute hypothesis scores.
std::vector<double> decoder_next_logprobs(const Model& model, const EncoderOutput& enc,
                                          const std::vector<int>& prefix);

EncoderOutput encode_document(const Model& model, const std::vector<int>& tokens);

// Predicted label set: sigmoid(logit) > threshold for head methods, parsed
// generation for Seq2Seq.
LabelSet predict(const Model& model, const std::vector<int>& tokens, double threshold = 0.5);

}  // namespace mltc
