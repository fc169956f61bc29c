#include "mltc/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mltc/errors.hpp"

namespace mltc {

namespace {
constexpr double kMaskPenalty = -1e9;
constexpr std::uint32_t kCheckpointMagic = 0x4d4c5443;  // "MLTC"
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

std::string to_string(AttentionScheme scheme) {
    switch (scheme) {
        case AttentionScheme::Causal: return "causal";
        case AttentionScheme::None: return "none";
        case AttentionScheme::Full: return "full";
    }
    return "causal";
}

AttentionScheme attention_scheme_from_string(const std::string& s) {
    if (s == "causal") return AttentionScheme::Causal;
    if (s == "none") return AttentionScheme::None;
    if (s == "full") return AttentionScheme::Full;
    throw ConfigError("unknown attention scheme '" + s + "' (causal|none|full)");
}

void ModelConfig::validate() const {
    if (vocab_size < 1) throw ConfigError("vocab_size must be positive");
    if (d_model < 1 || num_heads < 1 || d_ff < 1) throw ConfigError("model dims must be positive");
    if (d_model % num_heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by num_heads " +
                          std::to_string(num_heads));
    if (encoder_layers < 1) throw ConfigError("encoder_layers must be >= 1");
    if (decoder_layers < 0) throw ConfigError("decoder_layers must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (num_buckets < 2) throw ConfigError("num_buckets must be >= 2");
    if (max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");
}

ModelConfig ModelConfig::size_preset(const std::string& name) {
    ModelConfig cfg;
    if (name == "small") {
        cfg.encoder_layers = 2;
        cfg.decoder_layers = 2;
        cfg.d_model = 64;
        cfg.num_heads = 4;
        cfg.d_ff = 128;
    } else if (name == "base") {
        cfg.encoder_layers = 3;
        cfg.decoder_layers = 3;
        cfg.d_model = 128;
        cfg.num_heads = 4;
        cfg.d_ff = 256;
    } else if (name == "large") {
        cfg.encoder_layers = 4;
        cfg.decoder_layers = 4;
        cfg.d_model = 256;
        cfg.num_heads = 8;
        cfg.d_ff = 512;
    } else {
        throw ConfigError("unknown size preset '" + name + "' (small|base|large)");
    }
    return cfg;
}

// ---- ParamStore -----------------------------------------------------------

ParamEntry& ParamStore::add(std::string name, std::vector<int> shape) {
    if (has(name)) {
        throw ContractError("duplicate parameter '" + name + "'");
    }
    std::int64_t n = 1;
    for (int d : shape) {
        n *= d;
    }
    index_[name] = entries_.size();
    entries_.push_back(ParamEntry{std::move(name), std::move(shape),
                                  std::vector<double>(static_cast<std::size_t>(n), 0.0)});
    return entries_.back();
}

ParamEntry& ParamStore::entry(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ContractError("unknown parameter '" + name + "'");
    }
    return entries_[it->second];
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ContractError("unknown parameter '" + name + "'");
    }
    return entries_[it->second];
}

std::int64_t ParamStore::total_size() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) {
        n += static_cast<std::int64_t>(e.values.size());
    }
    return n;
}

const Tensor& ParamBinder::operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) {
        return it->second;
    }
    const ParamEntry& e = store_.entry(name);
    Tensor t = (tape_ != nullptr) ? tape_->leaf(e.shape, e.values, e.name)
                                  : Tensor(e.shape, e.values);
    if (tape_ != nullptr) {
        nodes_[name] = t.node();
    }
    return cache_.emplace(name, std::move(t)).first->second;
}

// ---- masks ------------------------------------------------------------------

AttnMask AttnMask::all(int rows, int cols) {
    return AttnMask{rows, cols,
                    std::vector<std::uint8_t>(static_cast<std::size_t>(rows) * cols, 1)};
}

AttnMask AttnMask::causal(int n) {
    AttnMask m{n, n, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n, 0)};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            m.allow[static_cast<std::size_t>(i) * n + j] = 1;
        }
    }
    return m;
}

AttnMask AttnMask::from_key_mask(int rows, const std::vector<std::uint8_t>& key_mask) {
    const int cols = static_cast<int>(key_mask.size());
    AttnMask m{rows, cols, std::vector<std::uint8_t>(static_cast<std::size_t>(rows) * cols)};
    for (int i = 0; i < rows; ++i) {
        std::copy(key_mask.begin(), key_mask.end(),
                  m.allow.begin() + static_cast<std::size_t>(i) * cols);
    }
    return m;
}

// ---- attention ----------------------------------------------------------------

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttnMask& mask,
                 const std::vector<Tensor>* head_bias, int num_heads) {
    if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2) {
        throw ShapeError("attention: q, k, v must be matrices");
    }
    const int m = q.dim(0), n = k.dim(0), d = q.dim(1);
    if (k.dim(1) != d || v.dim(1) != d || v.dim(0) != n) {
        throw ShapeError("attention: incompatible shapes q" + Tensor::shape_str(q.shape()) +
                         " k" + Tensor::shape_str(k.shape()) + " v" +
                         Tensor::shape_str(v.shape()));
    }
    if (num_heads < 1 || d % num_heads != 0) {
        throw ShapeError("attention: width " + std::to_string(d) + " not divisible by " +
                         std::to_string(num_heads) + " heads");
    }
    if (mask.rows != m || mask.cols != n) {
        throw ShapeError("attention: mask is " + std::to_string(mask.rows) + "x" +
                         std::to_string(mask.cols) + ", expected " + std::to_string(m) + "x" +
                         std::to_string(n));
    }
    if (head_bias != nullptr && static_cast<int>(head_bias->size()) != num_heads) {
        throw ShapeError("attention: bias count does not match head count");
    }
    std::vector<double> penalties(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        bool any = false;
        for (int j = 0; j < n; ++j) {
            const bool allowed = mask.allow[static_cast<std::size_t>(i) * n + j] != 0;
            any = any || allowed;
            if (!allowed) {
                penalties[static_cast<std::size_t>(i) * n + j] = kMaskPenalty;
            }
        }
        if (!any) {
            throw ContractError("attention: query row " + std::to_string(i) +
                                " has no attendable keys");
        }
    }
    const Tensor penalty_tensor({m, n}, std::move(penalties));
    const int dh = d / num_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> outs;
    outs.reserve(static_cast<std::size_t>(num_heads));
    for (int h = 0; h < num_heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        if (head_bias != nullptr) {
            scores = add(scores, (*head_bias)[static_cast<std::size_t>(h)]);
        }
        scores = add(scores, penalty_tensor);
        outs.push_back(matmul(softmax_rows(scores), vh));
    }
    return num_heads == 1 ? outs[0] : concat_cols(outs);
}

// ---- relative position bias ---------------------------------------------------

int relative_bucket(int relative_position, bool bidirectional, int num_buckets,
                    int max_distance) {
    int bucket = 0;
    int n = num_buckets;
    int rel = relative_position;
    if (bidirectional) {
        n /= 2;
        if (rel > 0) {
            bucket += n;
        }
        rel = std::abs(rel);
    } else {
        rel = std::max(-rel, 0);
    }
    const int max_exact = n / 2;
    if (rel < max_exact) {
        return bucket + rel;
    }
    const double log_ratio = std::log(static_cast<double>(rel) / max_exact) /
                             std::log(static_cast<double>(max_distance) / max_exact);
    int large = max_exact + static_cast<int>(log_ratio * (n - max_exact));
    large = std::min(large, n - 1);
    return bucket + large;
}

std::vector<Tensor> relative_bias_matrices(const Tensor& table, int q_len, int k_len,
                                           bool bidirectional, const ModelConfig& cfg) {
    std::vector<int> buckets(static_cast<std::size_t>(q_len) * k_len);
    for (int i = 0; i < q_len; ++i) {
        for (int j = 0; j < k_len; ++j) {
            buckets[static_cast<std::size_t>(i) * k_len + j] =
                relative_bucket(j - i, bidirectional, cfg.num_buckets, cfg.max_distance);
        }
    }
    Tensor gathered = embedding(table, buckets);  // [q_len*k_len x num_heads]
    std::vector<Tensor> per_head;
    per_head.reserve(static_cast<std::size_t>(cfg.num_heads));
    for (int h = 0; h < cfg.num_heads; ++h) {
        per_head.push_back(reshape(slice_cols(gathered, h, 1), {q_len, k_len}));
    }
    return per_head;
}

// ---- parameter construction -----------------------------------------------------

namespace {

void init_gaussian(ParamEntry& e, Rng& rng, double stddev) {
    for (double& v : e.values) {
        v = rng.gaussian(0.0, stddev);
    }
}

void add_linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
    init_gaussian(store.add(name, {in, out}), rng, 1.0 / std::sqrt(static_cast<double>(in)));
}

void add_norm(ParamStore& store, const std::string& name, int d) {
    auto& e = store.add(name, {d});
    std::fill(e.values.begin(), e.values.end(), 1.0);
}

void add_attention_block(ParamStore& store, const std::string& prefix, int d, Rng& rng) {
    add_linear(store, prefix + ".wq", d, d, rng);
    add_linear(store, prefix + ".wk", d, d, rng);
    add_linear(store, prefix + ".wv", d, d, rng);
    add_linear(store, prefix + ".wo", d, d, rng);
}

}  // namespace

void init_transformer_params(ParamStore& store, const ModelConfig& cfg, bool with_decoder,
                             bool with_decoder_self_attention, Rng& rng) {
    cfg.validate();
    init_gaussian(store.add("embed", {cfg.vocab_size, cfg.d_model}), rng,
                  1.0 / std::sqrt(static_cast<double>(cfg.d_model)));
    for (int i = 0; i < cfg.encoder_layers; ++i) {
        const std::string p = "enc." + std::to_string(i);
        add_attention_block(store, p + ".attn", cfg.d_model, rng);
        add_norm(store, p + ".attn_norm", cfg.d_model);
        add_linear(store, p + ".ffn.w1", cfg.d_model, cfg.d_ff, rng);
        add_linear(store, p + ".ffn.w2", cfg.d_ff, cfg.d_model, rng);
        add_norm(store, p + ".ffn_norm", cfg.d_model);
    }
    add_norm(store, "enc.final_norm", cfg.d_model);
    if (cfg.relative_bias) {
        store.add("enc.rel_bias", {cfg.num_buckets, cfg.num_heads});
    }
    if (!with_decoder) {
        return;
    }
    if (cfg.decoder_layers < 1) {
        throw ConfigError("decoder requested but decoder_layers is 0");
    }
    for (int i = 0; i < cfg.decoder_layers; ++i) {
        const std::string p = "dec." + std::to_string(i);
        if (with_decoder_self_attention) {
            add_attention_block(store, p + ".self", cfg.d_model, rng);
            add_norm(store, p + ".self_norm", cfg.d_model);
        }
        add_attention_block(store, p + ".cross", cfg.d_model, rng);
        add_norm(store, p + ".cross_norm", cfg.d_model);
        add_linear(store, p + ".ffn.w1", cfg.d_model, cfg.d_ff, rng);
        add_linear(store, p + ".ffn.w2", cfg.d_ff, cfg.d_model, rng);
        add_norm(store, p + ".ffn_norm", cfg.d_model);
    }
    add_norm(store, "dec.final_norm", cfg.d_model);
    if (cfg.relative_bias && cfg.decoder_relative_bias && with_decoder_self_attention) {
        store.add("dec.rel_bias", {cfg.num_buckets, cfg.num_heads});
    }
}

// ---- forward passes ----------------------------------------------------------------

namespace {

Tensor maybe_dropout(Tensor t, ForwardCtx& ctx) {
    if (ctx.training && ctx.cfg.dropout > 0.0 && ctx.dropout_rng != nullptr) {
        return dropout(t, ctx.cfg.dropout, *ctx.dropout_rng);
    }
    return t;
}

Tensor attention_sublayer(const Tensor& x, const Tensor& kv_source, const std::string& prefix,
                          const std::string& norm_name, const AttnMask& mask,
                          const std::vector<Tensor>* bias, bool self_attention, ForwardCtx& ctx) {
    ParamBinder& p = ctx.params;
    Tensor h = rms_norm(x, p(norm_name));
    Tensor kv_h = self_attention ? h : kv_source;
    Tensor q = matmul(h, p(prefix + ".wq"));
    Tensor k = matmul(kv_h, p(prefix + ".wk"));
    Tensor v = matmul(kv_h, p(prefix + ".wv"));
    Tensor a = attention(q, k, v, mask, bias, ctx.cfg.num_heads);
    return add(x, maybe_dropout(matmul(a, p(prefix + ".wo")), ctx));
}

Tensor ffn_sublayer(const Tensor& x, const std::string& prefix, const std::string& norm_name,
                    ForwardCtx& ctx) {
    ParamBinder& p = ctx.params;
    Tensor h = rms_norm(x, p(norm_name));
    Tensor f = matmul(relu(matmul(h, p(prefix + ".w1"))), p(prefix + ".w2"));
    return add(x, maybe_dropout(f, ctx));
}

}  // namespace

EncoderOutput encode(const std::vector<int>& tokens, ForwardCtx& ctx) {
    if (tokens.empty()) {
        throw ContractError("encode: empty token sequence");
    }
    std::vector<int> ids = tokens;
    if (static_cast<int>(ids.size()) > ctx.cfg.max_seq_len) {
        ids.resize(static_cast<std::size_t>(ctx.cfg.max_seq_len));
    }
    const int n = static_cast<int>(ids.size());
    std::vector<std::uint8_t> key_mask(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        key_mask[static_cast<std::size_t>(i)] = ids[static_cast<std::size_t>(i)] != 0 ? 1 : 0;
    }
    ParamBinder& p = ctx.params;
    Tensor x = embedding(p("embed"), ids);
    std::vector<Tensor> bias;
    if (ctx.cfg.relative_bias) {
        bias = relative_bias_matrices(p("enc.rel_bias"), n, n, /*bidirectional=*/true, ctx.cfg);
    }
    const AttnMask mask = AttnMask::from_key_mask(n, key_mask);
    for (int i = 0; i < ctx.cfg.encoder_layers; ++i) {
        const std::string prefix = "enc." + std::to_string(i);
        x = attention_sublayer(x, x, prefix + ".attn", prefix + ".attn_norm", mask,
                               bias.empty() ? nullptr : &bias, /*self_attention=*/true, ctx);
        x = ffn_sublayer(x, prefix + ".ffn", prefix + ".ffn_norm", ctx);
    }
    x = rms_norm(x, p("enc.final_norm"));
    return EncoderOutput{std::move(x), std::move(key_mask)};
}

Tensor decode(const std::vector<int>& decoder_tokens, const EncoderOutput& enc,
              AttentionScheme scheme, ForwardCtx& ctx) {
    if (ctx.cfg.decoder_layers < 1) {
        throw ContractError("decode: model has no decoder layers");
    }
    if (decoder_tokens.empty()) {
        throw ContractError("decode: empty decoder input");
    }
    const int m = static_cast<int>(decoder_tokens.size());
    ParamBinder& p = ctx.params;
    Tensor y = embedding(p("embed"), decoder_tokens);
    const bool self_attn = scheme != AttentionScheme::None;
    std::vector<Tensor> self_bias;
    if (self_attn && ctx.cfg.relative_bias && ctx.cfg.decoder_relative_bias) {
        self_bias = relative_bias_matrices(p("dec.rel_bias"), m, m,
                                           /*bidirectional=*/scheme == AttentionScheme::Full,
                                           ctx.cfg);
    }
    const AttnMask self_mask =
        scheme == AttentionScheme::Causal ? AttnMask::causal(m) : AttnMask::all(m, m);
    const AttnMask cross_mask = AttnMask::from_key_mask(m, enc.attention_mask);
    for (int i = 0; i < ctx.cfg.decoder_layers; ++i) {
        const std::string prefix = "dec." + std::to_string(i);
        if (self_attn) {
            y = attention_sublayer(y, y, prefix + ".self", prefix + ".self_norm", self_mask,
                                   self_bias.empty() ? nullptr : &self_bias,
                                   /*self_attention=*/true, ctx);
        }
        y = attention_sublayer(y, enc.hidden, prefix + ".cross", prefix + ".cross_norm",
                               cross_mask, nullptr, /*self_attention=*/false, ctx);
        y = ffn_sublayer(y, prefix + ".ffn", prefix + ".ffn_norm", ctx);
    }
    return rms_norm(y, p("dec.final_norm"));
}

// ---- checkpoint io ------------------------------------------------------------------

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) {
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_i32(std::ostream& os, std::int32_t v) { write_u32(os, static_cast<std::uint32_t>(v)); }

void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) {
        throw DataError("checkpoint: truncated file");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    }
    return v;
}

std::int32_t read_i32(std::istream& is) { return static_cast<std::int32_t>(read_u32(is)); }

double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) {
        throw DataError("checkpoint: truncated file");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string read_str(std::istream& is) {
    const std::uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) {
        throw DataError("checkpoint: truncated file");
    }
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params,
                     const std::vector<std::pair<std::string, std::string>>& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw DataError("cannot open checkpoint for writing: " + path);
    }
    write_u32(os, kCheckpointMagic);
    write_u32(os, kCheckpointVersion);
    write_i32(os, cfg.vocab_size);
    write_i32(os, cfg.d_model);
    write_i32(os, cfg.num_heads);
    write_i32(os, cfg.d_ff);
    write_i32(os, cfg.encoder_layers);
    write_i32(os, cfg.decoder_layers);
    write_i32(os, cfg.relative_bias ? 1 : 0);
    write_i32(os, cfg.num_buckets);
    write_i32(os, cfg.max_distance);
    write_i32(os, cfg.decoder_relative_bias ? 1 : 0);
    write_f64(os, cfg.dropout);
    write_i32(os, cfg.tie_embeddings ? 1 : 0);
    write_i32(os, cfg.max_seq_len);
    write_u32(os, static_cast<std::uint32_t>(meta.size()));
    for (const auto& [key, value] : meta) {
        write_str(os, key);
        write_str(os, value);
    }
    write_u32(os, static_cast<std::uint32_t>(params.entries().size()));
    for (const ParamEntry& e : params.entries()) {
        write_str(os, e.name);
        write_u32(os, static_cast<std::uint32_t>(e.shape.size()));
        for (int d : e.shape) {
            write_i32(os, d);
        }
        for (double v : e.values) {
            write_f64(os, v);
        }
    }
    if (!os) {
        throw DataError("checkpoint write failed: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw DataError("cannot open checkpoint: " + path);
    }
    if (read_u32(is) != kCheckpointMagic) {
        throw DataError("not a checkpoint file: " + path);
    }
    if (read_u32(is) != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version in " + path);
    }
    Checkpoint ckpt;
    ModelConfig& cfg = ckpt.cfg;
    cfg.vocab_size = read_i32(is);
    cfg.d_model = read_i32(is);
    cfg.num_heads = read_i32(is);
    cfg.d_ff = read_i32(is);
    cfg.encoder_layers = read_i32(is);
    cfg.decoder_layers = read_i32(is);
    cfg.relative_bias = read_i32(is) != 0;
    cfg.num_buckets = read_i32(is);
    cfg.max_distance = read_i32(is);
    cfg.decoder_relative_bias = read_i32(is) != 0;
    cfg.dropout = read_f64(is);
    cfg.tie_embeddings = read_i32(is) != 0;
    cfg.max_seq_len = read_i32(is);
    const std::uint32_t nmeta = read_u32(is);
    for (std::uint32_t i = 0; i < nmeta; ++i) {
        std::string key = read_str(is);
        std::string value = read_str(is);
        ckpt.meta.emplace_back(std::move(key), std::move(value));
    }
    const std::uint32_t nparams = read_u32(is);
    for (std::uint32_t i = 0; i < nparams; ++i) {
        std::string name = read_str(is);
        const std::uint32_t ndim = read_u32(is);
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            shape.push_back(read_i32(is));
        }
        ParamEntry& e = ckpt.params.add(std::move(name), std::move(shape));
        for (double& v : e.values) {
            v = read_f64(is);
        }
    }
    return ckpt;
}

}  // namespace mltc
