#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mltc/errors.hpp"
#include "mltc/rng.hpp"

namespace mltc {

class Tape;

// Dense 64-bit tensor in row-major order. Values are immutable once built;
// ops always allocate fresh buffers, so sharing across tensors is safe. A
// tensor optionally refers to a node on a Tape, which records the backward
// rule of the op that produced it.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<int> shape, std::vector<double> values);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar_value(double value) { return Tensor({1}, {value}); }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const;
    const std::vector<double>& values() const { return *values_; }
    double at(std::int64_t i) const { return (*values_)[static_cast<std::size_t>(i)]; }
    double scalar() const;

    bool on_tape() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }

    static std::string shape_str(const std::vector<int>& shape);

private:
    friend class Tape;
    std::vector<int> shape_;
    std::shared_ptr<const std::vector<double>> values_ = std::make_shared<std::vector<double>>();
    Tape* tape_ = nullptr;
    int node_ = -1;
};

// Per-node gradient accumulation buffers used while walking the tape.
class GradSink {
public:
    std::vector<double>& buffer(int node, std::int64_t size);
    bool touched(int node) const { return !bufs_[static_cast<std::size_t>(node)].empty(); }
    const std::vector<double>& raw(int node) const { return bufs_[static_cast<std::size_t>(node)]; }

private:
    friend class Tape;
    explicit GradSink(std::size_t n) : bufs_(n) {}
    std::vector<std::vector<double>> bufs_;
};

// Result of Tape::backward. Nodes the loss does not depend on get zeros.
class Gradients {
public:
    const std::vector<double>& at(const Tensor& t) const;
    const std::vector<double>& at_node(int node) const;

private:
    friend class Tape;
    mutable std::vector<std::vector<double>> bufs_;
    std::vector<std::int64_t> sizes_;
};

// Reverse-mode tape. Operations append nodes in execution order, which is a
// topological order by construction; backward walks it once in reverse.
class Tape {
public:
    using BackwardFn = std::function<void(const std::vector<double>& dout, GradSink& sink)>;

    // Records a differentiable leaf (typically a model parameter). Named
    // leaves can be looked up after a forward pass to fetch gradients.
    Tensor leaf(std::vector<int> shape, const std::vector<double>& values,
                std::string name = {});

    const std::vector<std::pair<std::string, int>>& named_leaves() const {
        return named_leaves_;
    }

    // Records the output of an op. `inputs` lists tape node ids (-1 entries,
    // from constants, are allowed and ignored).
    Tensor record(std::vector<int> shape, std::vector<double> values, std::vector<int> inputs,
                  BackwardFn fn);

    Gradients backward(const Tensor& loss) const;

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        std::vector<int> inputs;
        std::int64_t size;
        BackwardFn fn;  // empty for leaves
    };
    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, int>> named_leaves_;
};

// ---- ops -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// Standard matrix product; backward accumulates dA = dC*B^T and dB = A^T*dC.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Row-wise softmax with max subtraction. Accepts [n] or [r x n].
Tensor softmax_rows(const Tensor& x);

// x / sqrt(mean(x^2) + eps) * gain per feature row; eps fixed at 1e-6.
Tensor rms_norm(const Tensor& x, const Tensor& gain);
inline constexpr double kRmsNormEps = 1e-6;

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// Gathers rows of `table` (shape [v x d]) at `ids`; backward scatter-adds.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

Tensor slice_rows(const Tensor& x, int start, int count);
Tensor slice_cols(const Tensor& x, int start, int count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& x, std::vector<int> shape);

Tensor row_sums(const Tensor& x);  // [r x c] -> [r]
Tensor sum(const Tensor& x);       // -> scalar [1]

// Mean binary cross-entropy over L logits, computed in the stable
// max(z,0) - z*t + log1p(exp(-|z|)) form.
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);

// Mean negative log-softmax probability of target ids over unmasked rows of
// [t x v] logits. `mask` selects counted positions; empty mask counts all.
Tensor cross_entropy_vocab(const Tensor& logits, const std::vector<int>& target_ids,
                           const std::vector<std::uint8_t>& mask = {});

}  // namespace mltc
