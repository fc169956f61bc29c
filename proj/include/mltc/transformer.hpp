#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mltc/rng.hpp"
#include "mltc/tensor.hpp"

namespace mltc {

// Decoder self-attention behaviour. None removes the self-attention sublayer
// entirely (residual passthrough), so decoder positions interact only through
// cross-attention.
enum class AttentionScheme { Causal, None, Full };

std::string to_string(AttentionScheme scheme);
AttentionScheme attention_scheme_from_string(const std::string& s);

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 64;
    int num_heads = 4;
    int d_ff = 128;
    int encoder_layers = 2;
    int decoder_layers = 2;
    bool relative_bias = true;
    int num_buckets = 32;
    int max_distance = 128;
    bool decoder_relative_bias = true;  // position bias over decoder self-attention
    double dropout = 0.1;
    bool tie_embeddings = true;
    int max_seq_len = 512;

    void validate() const;

    // Desk-scale presets: small {2+2, d=64, 4 heads, ff=128},
    // base {3+3, d=128, 4, 256}, large {4+4, d=256, 8, 512}.
    static ModelConfig size_preset(const std::string& name);
};

// Named parameter arrays. Registration order is fixed, so initialization and
// checkpoint layout are deterministic.
struct ParamEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;
};

class ParamStore {
public:
    ParamEntry& add(std::string name, std::vector<int> shape);
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    ParamEntry& entry(const std::string& name);
    const ParamEntry& entry(const std::string& name) const;
    std::vector<ParamEntry>& entries() { return entries_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }
    std::int64_t total_size() const;

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Binds store entries to a tape as differentiable leaves (training), or wraps
// them as constants (inference). Each parameter is bound at most once so
// gradients from repeated uses accumulate on a single node.
class ParamBinder {
public:
    ParamBinder(const ParamStore& store, Tape* tape) : store_(store), tape_(tape) {}

    const Tensor& operator()(const std::string& name);
    const std::unordered_map<std::string, int>& bound_nodes() const { return nodes_; }

private:
    const ParamStore& store_;
    Tape* tape_;
    std::unordered_map<std::string, Tensor> cache_;
    std::unordered_map<std::string, int> nodes_;
};

struct EncoderOutput {
    Tensor hidden;                          // [n x d_model]
    std::vector<std::uint8_t> attention_mask;  // 1 = attendable position
};

// Row-major binary attendance matrix; allow[i*cols + j] == 1 lets query i see
// key j.
struct AttnMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> allow;

    static AttnMask all(int rows, int cols);
    static AttnMask causal(int n);
    static AttnMask from_key_mask(int rows, const std::vector<std::uint8_t>& key_mask);
};

struct ForwardCtx {
    const ModelConfig& cfg;
    ParamBinder& params;
    bool training = false;
    Rng* dropout_rng = nullptr;
};

// Multi-head scaled dot-product attention core: softmax(q k^T / sqrt(d_head)
// + bias + mask) v per head, heads concatenated. Projections live in the
// caller. head_bias, when given, holds one [rows x cols] matrix per head.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttnMask& mask,
                 const std::vector<Tensor>* head_bias, int num_heads);

// T5 relative position bucketing.
int relative_bucket(int relative_position, bool bidirectional, int num_buckets,
                    int max_distance);

// Per-head [q_len x k_len] bias matrices gathered from a
// [num_buckets x num_heads] table.
std::vector<Tensor> relative_bias_matrices(const Tensor& table, int q_len, int k_len,
                                           bool bidirectional, const ModelConfig& cfg);

// Registers transformer parameters. The decoder is built only when
// `with_decoder` is set; self-attention projections are skipped for
// AttentionScheme::None.
void init_transformer_params(ParamStore& store, const ModelConfig& cfg, bool with_decoder,
                             bool with_decoder_self_attention, Rng& rng);

EncoderOutput encode(const std::vector<int>& tokens, ForwardCtx& ctx);

Tensor decode(const std::vector<int>& decoder_tokens, const EncoderOutput& enc,
              AttentionScheme scheme, ForwardCtx& ctx);

// ---- checkpoint io ---------------------------------------------------------

struct Checkpoint {
    ModelConfig cfg;
    ParamStore params;
    std::vector<std::pair<std::string, std::string>> meta;
};

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params,
                     const std::vector<std::pair<std::string, std::string>>& meta);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mltc
