#include "mltc/methods.hpp"

#include <algorithm>
#include <cmath>

namespace mltc {

// ---- MethodKind ------------------------------------------------------------

MethodKind MethodKind::parse(const std::string& text) {
    MethodKind m;
    std::string head = text, arg;
    if (const auto colon = text.find(':'); colon != std::string::npos) {
        head = text.substr(0, colon);
        arg = text.substr(colon + 1);
    }
    if (head == "encoder_head") {
        m.family = Family::EncoderHead;
        if (!arg.empty()) {
            throw ConfigError("encoder_head takes no option");
        }
    } else if (head == "lwan") {
        m.family = Family::Lwan;
        m.lwan_heads = arg.empty() ? 1 : std::stoi(arg);
        if (m.lwan_heads < 1) {
            throw ConfigError("lwan head count must be positive");
        }
    } else if (head == "seq2seq") {
        m.family = Family::Seq2Seq;
        if (arg.empty() || arg == "beam" || arg == "beam4") {
            m.decoding.kind = Decoding::Kind::Beam;
            m.decoding.beam_width = 4;
        } else if (arg == "greedy") {
            m.decoding.kind = Decoding::Kind::Greedy;
        } else if (arg.rfind("beam", 0) == 0) {
            m.decoding.kind = Decoding::Kind::Beam;
            m.decoding.beam_width = std::stoi(arg.substr(4));
            if (m.decoding.beam_width < 1) {
                throw ConfigError("beam width must be positive");
            }
        } else {
            throw ConfigError("unknown seq2seq decoding '" + arg + "'");
        }
    } else if (head == "t5enc") {
        m.family = Family::T5Enc;
        m.scheme = arg.empty() ? AttentionScheme::Causal : attention_scheme_from_string(arg);
    } else if (head == "t5enc_single_step") {
        m.family = Family::T5EncSingleStep;
        if (!arg.empty()) {
            throw ConfigError("t5enc_single_step takes no option");
        }
    } else {
        throw ConfigError("unknown method '" + text + "'");
    }
    return m;
}

std::string MethodKind::canonical() const {
    switch (family) {
        case Family::EncoderHead: return "encoder_head";
        case Family::Lwan: return "lwan:" + std::to_string(lwan_heads);
        case Family::Seq2Seq:
            return decoding.kind == Decoding::Kind::Greedy
                       ? "seq2seq:greedy"
                       : "seq2seq:beam" + std::to_string(decoding.beam_width);
        case Family::T5Enc: return "t5enc:" + to_string(scheme);
        case Family::T5EncSingleStep: return "t5enc_single_step";
    }
    return "encoder_head";
}

std::string MethodKind::display_name() const {
    switch (family) {
        case Family::EncoderHead: return "Encoder+Head";
        case Family::Lwan: return lwan_heads == 1 ? "LWAN" : "LWAN (" + std::to_string(lwan_heads) + " heads)";
        case Family::Seq2Seq: return "Seq2Seq";
        case Family::T5Enc:
            switch (scheme) {
                case AttentionScheme::Causal: return "T5Enc";
                case AttentionScheme::None: return "T5Enc (no attention)";
                case AttentionScheme::Full: return "T5Enc (full attention)";
            }
            return "T5Enc";
        case Family::T5EncSingleStep: return "Single-step T5Enc";
    }
    return "?";
}

std::optional<std::string> MethodKind::parity_note() const {
    if (family == Family::Lwan && lwan_heads != 1 && lwan_heads != 4 && lwan_heads != 6 &&
        lwan_heads != 12) {
        return "lwan head count " + std::to_string(lwan_heads) +
               " is outside the studied grid {1,4,6,12}";
    }
    return std::nullopt;
}

// ---- model construction ---------------------------------------------------------

Model build_model(ModelConfig cfg, const MethodKind& method,
                  std::shared_ptr<const LabelVocabulary> vocab,
                  std::shared_ptr<const Tokenizer> tokenizer, std::uint64_t seed) {
    cfg.vocab_size = tokenizer->size();
    cfg.validate();
    Model model;
    model.method = method;
    model.vocab = std::move(vocab);
    model.tokenizer = std::move(tokenizer);

    const DescriptorScheme scheme = model.vocab->scheme();
    switch (method.family) {
        case MethodKind::Family::T5Enc:
            if (scheme != DescriptorScheme::Simplified && scheme != DescriptorScheme::Pseudo) {
                throw ConfigError("t5enc requires single-token descriptors "
                                  "(simplified or pseudo scheme), got " +
                                  to_string(scheme));
            }
            break;
        case MethodKind::Family::Seq2Seq:
            if (scheme == DescriptorScheme::Pseudo) {
                throw ConfigError("seq2seq descriptors must be original, simplified or numeric");
            }
            break;
        default: break;
    }
    if (method.family == MethodKind::Family::Lwan && cfg.d_model % method.lwan_heads != 0) {
        throw ConfigError("d_model " + std::to_string(cfg.d_model) +
                          " not divisible by lwan head count " +
                          std::to_string(method.lwan_heads));
    }
    if (method.uses_decoder() && cfg.decoder_layers < 1) {
        throw ConfigError("method " + method.canonical() + " needs decoder_layers >= 1");
    }

    Rng rng(Rng::splitmix64(seed += 0x9e3779b97f4a7c15ull));
    init_transformer_params(model.params, cfg, method.uses_decoder(),
                            method.decoder_self_attention(), rng);

    const int L = model.vocab->size();
    const int d = cfg.d_model;
    auto gaussian_param = [&](const std::string& name, std::vector<int> shape, double stddev) {
        auto& e = model.params.add(name, std::move(shape));
        for (double& v : e.values) {
            v = rng.gaussian(0.0, stddev);
        }
    };
    const double head_std = 1.0 / std::sqrt(static_cast<double>(d));
    switch (method.family) {
        case MethodKind::Family::EncoderHead:
        case MethodKind::Family::T5EncSingleStep:
            gaussian_param("head.w", {L, d}, head_std);
            model.params.add("head.b", {L});
            break;
        case MethodKind::Family::Lwan:
            gaussian_param("lwan.q", {L, d}, head_std);
            gaussian_param("lwan.out", {L, d}, head_std);
            model.params.add("lwan.b", {L});
            break;
        case MethodKind::Family::T5Enc:
            gaussian_param("t5enc.out", {L, d}, head_std);
            model.params.add("t5enc.b", {L});
            break;
        case MethodKind::Family::Seq2Seq:
            if (!cfg.tie_embeddings) {
                gaussian_param("lm.w", {d, cfg.vocab_size}, head_std);
            }
            break;
    }

    if (method.family == MethodKind::Family::T5Enc) {
        model.descriptor_tokens.reserve(static_cast<std::size_t>(L));
        for (int l = 0; l < L; ++l) {
            model.descriptor_tokens.push_back(model.vocab->descriptor_token(l, *model.tokenizer));
        }
    }
    if (method.family == MethodKind::Family::T5EncSingleStep) {
        if (!model.tokenizer->has("label")) {
            throw ConfigError("single-step t5enc needs a 'label' probe token in the vocabulary");
        }
        model.probe_token = model.tokenizer->lookup("label");
    }
    model.cfg = cfg;
    return model;
}

namespace {

// Index of the last non-pad token, or -1 for an all-pad sequence.
int last_content_index(const std::vector<int>& ids) {
    for (int i = static_cast<int>(ids.size()) - 1; i >= 0; --i) {
        if (ids[static_cast<std::size_t>(i)] != Tokenizer::kPad) {
            return i;
        }
    }
    return -1;
}

}  // namespace

std::vector<int> prepare_input(const Model& model, const std::vector<int>& tokens) {
    std::vector<int> ids = tokens;
    if (static_cast<int>(ids.size()) >= model.cfg.max_seq_len) {
        ids.resize(static_cast<std::size_t>(model.cfg.max_seq_len - 1));
    }
    const int last = last_content_index(ids);
    if (last < 0) {
        ids.insert(ids.begin(), Tokenizer::kEos);
    } else if (ids[static_cast<std::size_t>(last)] != Tokenizer::kEos) {
        // the end-of-sequence marker goes after the content, before any padding
        ids.insert(ids.begin() + last + 1, Tokenizer::kEos);
    }
    return ids;
}

// ---- forwards -------------------------------------------------------------------

namespace {

struct Pass {
    ParamBinder binder;
    ForwardCtx ctx;

    Pass(const Model& model, Tape* tape, bool training, Rng* rng)
        : binder(model.params, tape),
          ctx{model.cfg, binder, training && model.cfg.dropout > 0.0 && rng != nullptr, rng} {}
};

// Per-label heads: logit_l = <hidden_l, w_l> + b_l.
Tensor labelwise_heads(const Tensor& hidden, const Tensor& w, const Tensor& b) {
    return add(row_sums(mul(hidden, w)), b);
}

// Shared representation fed to L independent heads: logits = h W^T + b.
Tensor shared_heads(const Tensor& h, const Tensor& w, const Tensor& b, int num_labels) {
    return add(reshape(matmul(h, transpose(w)), {num_labels}), b);
}

Tensor lm_logits(const Model& model, Pass& pass, const Tensor& decoded) {
    if (model.cfg.tie_embeddings) {
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model.cfg.d_model));
        return matmul(scale(decoded, inv_sqrt_d), transpose(pass.binder("embed")));
    }
    return matmul(decoded, pass.binder("lm.w"));
}

}  // namespace

Tensor encoder_head_forward(const Model& model, const std::vector<int>& tokens, Tape* tape,
                            bool training, Rng* rng) {
    const std::vector<int> ids = prepare_input(model, tokens);
    const int eos_pos = last_content_index(ids);
    if (eos_pos < 0 || ids[static_cast<std::size_t>(eos_pos)] != Tokenizer::kEos) {
        throw ContractError("encoder_head: input does not end with the end-of-sequence token");
    }
    Pass pass(model, tape, training, rng);
    EncoderOutput enc = encode(ids, pass.ctx);
    Tensor doc = slice_rows(enc.hidden, eos_pos, 1);  // </s> state
    return shared_heads(doc, pass.binder("head.w"), pass.binder("head.b"), model.num_labels());
}

Tensor lwan_forward(const Model& model, const std::vector<int>& tokens, Tape* tape,
                    bool training, Rng* rng) {
    const std::vector<int> ids = prepare_input(model, tokens);
    Pass pass(model, tape, training, rng);
    EncoderOutput enc = encode(ids, pass.ctx);
    const int L = model.num_labels();
    // one attention query per label over the token states
    const AttnMask mask = AttnMask::from_key_mask(L, enc.attention_mask);
    Tensor reps = attention(pass.binder("lwan.q"), enc.hidden, enc.hidden, mask, nullptr,
                            model.method.lwan_heads);
    return labelwise_heads(reps, pass.binder("lwan.out"), pass.binder("lwan.b"));
}

Tensor t5enc_forward(const Model& model, const std::vector<int>& tokens, Tape* tape,
                     bool training, Rng* rng) {
    const std::vector<int> ids = prepare_input(model, tokens);
    Pass pass(model, tape, training, rng);
    EncoderOutput enc = encode(ids, pass.ctx);
    Tensor hidden = decode(model.descriptor_tokens, enc, model.method.scheme, pass.ctx);
    return labelwise_heads(hidden, pass.binder("t5enc.out"), pass.binder("t5enc.b"));
}

Tensor t5enc_single_step_forward(const Model& model, const std::vector<int>& tokens, Tape* tape,
                                 bool training, Rng* rng) {
    const std::vector<int> ids = prepare_input(model, tokens);
    Pass pass(model, tape, training, rng);
    EncoderOutput enc = encode(ids, pass.ctx);
    Tensor hidden = decode({model.probe_token}, enc, AttentionScheme::Causal, pass.ctx);
    return shared_heads(hidden, pass.binder("head.w"), pass.binder("head.b"),
                        model.num_labels());
}

Tensor method_logits(const Model& model, const std::vector<int>& tokens, Tape* tape,
                     bool training, Rng* rng) {
    switch (model.method.family) {
        case MethodKind::Family::EncoderHead:
            return encoder_head_forward(model, tokens, tape, training, rng);
        case MethodKind::Family::Lwan:
            return lwan_forward(model, tokens, tape, training, rng);
        case MethodKind::Family::T5Enc:
            return t5enc_forward(model, tokens, tape, training, rng);
        case MethodKind::Family::T5EncSingleStep:
            return t5enc_single_step_forward(model, tokens, tape, training, rng);
        case MethodKind::Family::Seq2Seq:
            throw ContractError("seq2seq produces generations, not label logits");
    }
    throw ContractError("unreachable method family");
}

Tensor seq2seq_loss(const Model& model, const std::vector<int>& tokens, const LabelSet& gold,
                    Tape* tape, bool training, Rng* rng) {
    if (model.method.family != MethodKind::Family::Seq2Seq) {
        throw ContractError("seq2seq_loss called on method " + model.method.canonical());
    }
    const std::string target = format_target(gold, *model.vocab);
    std::vector<int> target_ids = model.tokenizer->encode(target);
    for (int id : target_ids) {
        if (id == Tokenizer::kUnk) {
            throw DataError("gold label descriptor is not tokenizable: '" + target + "'");
        }
    }
    target_ids.push_back(Tokenizer::kEos);
    std::vector<int> decoder_input;
    decoder_input.reserve(target_ids.size());
    decoder_input.push_back(Tokenizer::kPad);  // start token
    decoder_input.insert(decoder_input.end(), target_ids.begin(), target_ids.end() - 1);

    const std::vector<int> ids = prepare_input(model, tokens);
    Pass pass(model, tape, training, rng);
    EncoderOutput enc = encode(ids, pass.ctx);
    Tensor hidden = decode(decoder_input, enc, AttentionScheme::Causal, pass.ctx);
    return cross_entropy_vocab(lm_logits(model, pass, hidden), target_ids);
}

Tensor method_loss(const Model& model, const std::vector<int>& tokens, const LabelSet& gold,
                   Tape* tape, bool training, Rng* rng) {
    if (model.method.family == MethodKind::Family::Seq2Seq) {
        return seq2seq_loss(model, tokens, gold, tape, training, rng);
    }
    std::vector<double> targets(static_cast<std::size_t>(model.num_labels()), 0.0);
    for (int l : gold) {
        if (l < 0 || l >= model.num_labels()) {
            throw DataError("gold label " + std::to_string(l) + " outside the vocabulary");
        }
        targets[static_cast<std::size_t>(l)] = 1.0;
    }
    return bce_with_logits(method_logits(model, tokens, tape, training, rng), targets);
}

// ---- generation -------------------------------------------------------------------

EncoderOutput encode_document(const Model& model, const std::vector<int>& tokens) {
    Pass pass(model, nullptr, false, nullptr);
    return encode(prepare_input(model, tokens), pass.ctx);
}

std::vector<double> decoder_next_logprobs(const Model& model, const EncoderOutput& enc,
                                          const std::vector<int>& prefix) {
    Pass pass(model, nullptr, false, nullptr);
    Tensor hidden = decode(prefix, enc, AttentionScheme::Causal, pass.ctx);
    Tensor last = slice_rows(hidden, static_cast<int>(prefix.size()) - 1, 1);
    const Tensor logits = lm_logits(model, pass, last);
    const std::vector<double>& z = logits.values();
    double mx = z[0];
    for (double v : z) {
        mx = std::max(mx, v);
    }
    double se = 0.0;
    for (double v : z) {
        se += std::exp(v - mx);
    }
    const double lse = mx + std::log(se);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = z[i] - lse;
    }
    return out;
}

namespace {

struct Hypothesis {
    std::vector<int> ids;  // emitted tokens, no start, no eos
    double score = 0.0;
    bool finished = false;
};

std::vector<int> with_start(const std::vector<int>& ids) {
    std::vector<int> prefix;
    prefix.reserve(ids.size() + 1);
    prefix.push_back(Tokenizer::kPad);
    prefix.insert(prefix.end(), ids.begin(), ids.end());
    return prefix;
}

Generation finish_generation(const Model& model, Hypothesis best) {
    Generation gen;
    gen.token_ids = std::move(best.ids);
    gen.log_prob = best.score;
    gen.text = model.tokenizer->decode(gen.token_ids);
    gen.parsed = parse_prediction(gen.text, *model.vocab);
    return gen;
}

Generation greedy_generate(const Model& model, const EncoderOutput& enc, int max_len) {
    Hypothesis hyp;
    for (int step = 0; step < max_len; ++step) {
        const std::vector<double> logprobs =
            decoder_next_logprobs(model, enc, with_start(hyp.ids));
        int best = 0;
        for (std::size_t i = 1; i < logprobs.size(); ++i) {
            if (logprobs[i] > logprobs[static_cast<std::size_t>(best)]) {
                best = static_cast<int>(i);  // ties keep the lower token id
            }
        }
        hyp.score += logprobs[static_cast<std::size_t>(best)];
        if (best == Tokenizer::kEos) {
            break;
        }
        hyp.ids.push_back(best);
    }
    return finish_generation(model, std::move(hyp));
}

Generation beam_generate(const Model& model, const EncoderOutput& enc, int width, int max_len) {
    struct Candidate {
        double score;
        int parent;
        int token;
    };
    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> done;
    for (int step = 0; step < max_len && !live.empty(); ++step) {
        std::vector<Candidate> candidates;
        for (std::size_t h = 0; h < live.size(); ++h) {
            const std::vector<double> logprobs =
                decoder_next_logprobs(model, enc, with_start(live[h].ids));
            for (std::size_t t = 0; t < logprobs.size(); ++t) {
                candidates.push_back(Candidate{live[h].score + logprobs[t],
                                               static_cast<int>(h), static_cast<int>(t)});
            }
        }
        // rank by score; ties broken by lower token id, then parent order
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            if (a.score != b.score) {
                return a.score > b.score;
            }
            if (a.token != b.token) {
                return a.token < b.token;
            }
            return a.parent < b.parent;
        });
        std::vector<Hypothesis> next;
        int slots = 0;
        for (const Candidate& c : candidates) {
            if (slots >= width) {
                break;
            }
            ++slots;  // finished hypotheses occupy beam slots but stop expanding
            Hypothesis hyp = live[static_cast<std::size_t>(c.parent)];
            hyp.score = c.score;
            if (c.token == Tokenizer::kEos) {
                hyp.finished = true;
                done.push_back(std::move(hyp));
                continue;
            }
            hyp.ids.push_back(c.token);
            next.push_back(std::move(hyp));
        }
        live = std::move(next);
        // token log-probabilities are <= 0, so no live hypothesis can beat an
        // already finished one with a higher score
        if (!done.empty() && !live.empty()) {
            double best_done = done[0].score;
            for (const Hypothesis& h : done) {
                best_done = std::max(best_done, h.score);
            }
            double best_live = live[0].score;
            for (const Hypothesis& h : live) {
                best_live = std::max(best_live, h.score);
            }
            if (best_done >= best_live) {
                live.clear();
            }
        }
    }
    // sequences still live at max_len count as complete without eos
    for (Hypothesis& h : live) {
        done.push_back(std::move(h));
    }
    if (done.empty()) {
        return finish_generation(model, Hypothesis{});
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < done.size(); ++i) {
        if (done[i].score > done[best].score) {
            best = i;
        }
    }
    return finish_generation(model, std::move(done[best]));
}

}  // namespace

Generation seq2seq_generate(const Model& model, const std::vector<int>& tokens,
                            const Decoding& decoding) {
    if (model.method.family != MethodKind::Family::Seq2Seq) {
        throw ContractError("seq2seq_generate called on method " + model.method.canonical());
    }
    if (decoding.max_len < 1) {
        throw ContractError("generation max_len must be >= 1");
    }
    const EncoderOutput enc = encode_document(model, tokens);
    if (decoding.kind == Decoding::Kind::Greedy) {
        return greedy_generate(model, enc, decoding.max_len);
    }
    return beam_generate(model, enc, decoding.beam_width, decoding.max_len);
}

LabelSet predict(const Model& model, const std::vector<int>& tokens, double threshold) {
    if (model.method.family == MethodKind::Family::Seq2Seq) {
        return seq2seq_generate(model, tokens, model.method.decoding).parsed.labels;
    }
    const Tensor logits = method_logits(model, tokens);
    LabelSet out;
    for (int l = 0; l < model.num_labels(); ++l) {
        const double p = 1.0 / (1.0 + std::exp(-logits.at(l)));
        if (p > threshold) {
            out.insert(l);
        }
    }
    return out;
}

}  // namespace mltc
