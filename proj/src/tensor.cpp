#include "mltc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mltc/kernels.hpp"

namespace mltc {

namespace {

std::int64_t shape_size(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        n *= d;
    }
    return n;
}

Tape* common_tape(std::initializer_list<const Tensor*> tensors) {
    Tape* tape = nullptr;
    for (const Tensor* t : tensors) {
        if (!t->on_tape()) {
            continue;
        }
        if (tape != nullptr && tape != t->tape()) {
            throw ContractError("tensors belong to different tapes");
        }
        tape = t->tape();
    }
    return tape;
}

// Wraps forward values into either a plain tensor or a recorded node.
Tensor emit(Tape* tape, std::vector<int> shape, std::vector<double> values,
            std::vector<int> inputs, Tape::BackwardFn fn) {
    if (tape == nullptr) {
        return Tensor(std::move(shape), std::move(values));
    }
    return tape->record(std::move(shape), std::move(values), std::move(inputs), std::move(fn));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " +
                         Tensor::shape_str(a.shape()) + " vs " + Tensor::shape_str(b.shape()));
    }
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.ndim() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got " +
                         Tensor::shape_str(t.shape()));
    }
}

using Values = std::shared_ptr<const std::vector<double>>;

Values share(const Tensor& t) {
    return std::make_shared<const std::vector<double>>(t.values());
}

}  // namespace

// ---- Tensor ------------------------------------------------------------

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)) {
    for (int d : shape_) {
        if (d <= 0) {
            throw ShapeError("non-positive dimension in " + shape_str(shape_));
        }
    }
    if (shape_size(shape_) != static_cast<std::int64_t>(values.size())) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape_));
    }
    values_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(std::vector<int> shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    const auto n = static_cast<std::size_t>(shape_size(shape));
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

std::int64_t Tensor::size() const { return shape_size(shape_); }

double Tensor::scalar() const {
    if (size() != 1) {
        throw ContractError("scalar() on tensor of shape " + shape_str(shape_));
    }
    return (*values_)[0];
}

std::string Tensor::shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            s += "x";
        }
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// ---- Tape ----------------------------------------------------------------

std::vector<double>& GradSink::buffer(int node, std::int64_t size) {
    auto& buf = bufs_[static_cast<std::size_t>(node)];
    if (buf.empty()) {
        buf.assign(static_cast<std::size_t>(size), 0.0);
    }
    return buf;
}

const std::vector<double>& Gradients::at(const Tensor& t) const {
    if (!t.on_tape()) {
        throw ContractError("gradient requested for a tensor that is not on the tape");
    }
    return at_node(t.node());
}

const std::vector<double>& Gradients::at_node(int node) const {
    auto& buf = bufs_[static_cast<std::size_t>(node)];
    if (buf.empty()) {
        buf.assign(static_cast<std::size_t>(sizes_[static_cast<std::size_t>(node)]), 0.0);
    }
    return buf;
}

Tensor Tape::leaf(std::vector<int> shape, const std::vector<double>& values, std::string name) {
    Tensor t = record(std::move(shape), values, {}, nullptr);
    if (!name.empty()) {
        named_leaves_.emplace_back(std::move(name), t.node());
    }
    return t;
}

Tensor Tape::record(std::vector<int> shape, std::vector<double> values, std::vector<int> inputs,
                    BackwardFn fn) {
    Tensor t(std::move(shape), std::move(values));
    t.tape_ = this;
    t.node_ = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{std::move(inputs), t.size(), std::move(fn)});
    return t;
}

Gradients Tape::backward(const Tensor& loss) const {
    if (loss.size() != 1) {
        throw ContractError("backward() requires a scalar loss, got shape " +
                            Tensor::shape_str(loss.shape()));
    }
    if (!loss.on_tape() || loss.tape() != this) {
        throw ContractError("backward() loss is not on this tape");
    }
    GradSink sink(nodes_.size());
    sink.buffer(loss.node(), 1)[0] = 1.0;
    for (int i = loss.node(); i >= 0; --i) {
        const Node& node = nodes_[static_cast<std::size_t>(i)];
        if (!node.fn || !sink.touched(i)) {
            continue;
        }
        node.fn(sink.raw(i), sink);
    }
    Gradients grads;
    grads.bufs_ = std::move(sink.bufs_);
    grads.sizes_.reserve(nodes_.size());
    for (const Node& node : nodes_) {
        grads.sizes_.push_back(node.size);
    }
    return grads;
}

// ---- elementwise ops -------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tape* tape = common_tape({&a, &b});
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += b.values()[i];
    }
    const int na = a.node(), nb = b.node();
    const std::int64_t sz = a.size();
    return emit(tape, a.shape(), std::move(out), {na, nb},
                [na, nb, sz](const std::vector<double>& dout, GradSink& sink) {
                    for (int target : {na, nb}) {
                        if (target < 0) {
                            continue;
                        }
                        auto& g = sink.buffer(target, sz);
                        for (std::size_t i = 0; i < dout.size(); ++i) {
                            g[i] += dout[i];
                        }
                    }
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tape* tape = common_tape({&a, &b});
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= b.values()[i];
    }
    const int na = a.node(), nb = b.node();
    const std::int64_t sz = a.size();
    return emit(tape, a.shape(), std::move(out), {na, nb},
                [na, nb, sz](const std::vector<double>& dout, GradSink& sink) {
                    if (na >= 0) {
                        auto& g = sink.buffer(na, sz);
                        for (std::size_t i = 0; i < dout.size(); ++i) {
                            g[i] += dout[i];
                        }
                    }
                    if (nb >= 0) {
                        auto& g = sink.buffer(nb, sz);
                        for (std::size_t i = 0; i < dout.size(); ++i) {
                            g[i] -= dout[i];
                        }
                    }
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tape* tape = common_tape({&a, &b});
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= b.values()[i];
    }
    const int na = a.node(), nb = b.node();
    const std::int64_t sz = a.size();
    Values va = (nb >= 0) ? share(a) : nullptr;
    Values vb = (na >= 0) ? share(b) : nullptr;
    return emit(tape, a.shape(), std::move(out), {na, nb},
                [na, nb, sz, va, vb](const std::vector<double>& dout, GradSink& sink) {
                    if (na >= 0) {
                        auto& g = sink.buffer(na, sz);
                        for (std::size_t i = 0; i < dout.size(); ++i) {
                            g[i] += dout[i] * (*vb)[i];
                        }
                    }
                    if (nb >= 0) {
                        auto& g = sink.buffer(nb, sz);
                        for (std::size_t i = 0; i < dout.size(); ++i) {
                            g[i] += dout[i] * (*va)[i];
                        }
                    }
                });
}

Tensor scale(const Tensor& a, double c) {
    Tape* tape = common_tape({&a});
    std::vector<double> out(a.values());
    for (double& v : out) {
        v *= c;
    }
    const int na = a.node();
    const std::int64_t sz = a.size();
    return emit(tape, a.shape(), std::move(out), {na},
                [na, c, sz](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(na, sz);
                    for (std::size_t i = 0; i < dout.size(); ++i) {
                        g[i] += c * dout[i];
                    }
                });
}

// ---- matrix ops ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner dimensions disagree, " + Tensor::shape_str(a.shape()) +
                         " vs " + Tensor::shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tape* tape = common_tape({&a, &b});
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    kernels::matmul(a.values().data(), b.values().data(), out.data(), m, k, n);
    const int na = a.node(), nb = b.node();
    Values va = (nb >= 0) ? share(a) : nullptr;
    Values vb = (na >= 0) ? share(b) : nullptr;
    return emit(tape, {m, n}, std::move(out), {na, nb},
                [na, nb, va, vb, m, k, n](const std::vector<double>& dout, GradSink& sink) {
                    if (na >= 0) {
                        auto& g = sink.buffer(na, static_cast<std::int64_t>(m) * k);
                        std::vector<double> da(g.size());
                        kernels::matmul_bt(dout.data(), vb->data(), da.data(), m, n, k);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            g[i] += da[i];
                        }
                    }
                    if (nb >= 0) {
                        auto& g = sink.buffer(nb, static_cast<std::int64_t>(k) * n);
                        std::vector<double> db(g.size());
                        kernels::matmul_at(va->data(), dout.data(), db.data(), m, k, n);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            g[i] += db[i];
                        }
                    }
                });
}

Tensor transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    const int r = a.dim(0), c = a.dim(1);
    std::vector<double> out(static_cast<std::size_t>(r) * c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            out[static_cast<std::size_t>(j) * r + i] = a.values()[static_cast<std::size_t>(i) * c + j];
        }
    }
    Tape* tape = common_tape({&a});
    const int na = a.node();
    return emit(tape, {c, r}, std::move(out), {na},
                [na, r, c](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(na, static_cast<std::int64_t>(r) * c);
                    for (int i = 0; i < c; ++i) {
                        for (int j = 0; j < r; ++j) {
                            g[static_cast<std::size_t>(j) * c + i] +=
                                dout[static_cast<std::size_t>(i) * r + j];
                        }
                    }
                });
}

// ---- normalization / activations ----------------------------------------

namespace {
std::pair<int, int> rows_cols(const Tensor& x, const char* op) {
    if (x.ndim() == 1) {
        return {1, x.dim(0)};
    }
    if (x.ndim() == 2) {
        return {x.dim(0), x.dim(1)};
    }
    throw ShapeError(std::string(op) + ": expected 1- or 2-d tensor, got " +
                     Tensor::shape_str(x.shape()));
}
}  // namespace

Tensor softmax_rows(const Tensor& x) {
    const auto [rows, n] = rows_cols(x, "softmax_rows");
    if (n < 1) {
        throw ShapeError("softmax_rows: empty rows");
    }
    std::vector<double> out(x.values());
    kernels::softmax_rows(out.data(), rows, n);
    Tape* tape = common_tape({&x});
    const int nx = x.node();
    const std::int64_t sz = x.size();
    auto vy = std::make_shared<const std::vector<double>>(out);
    return emit(tape, x.shape(), std::move(out), {nx},
                [nx, sz, vy, rows = rows, n = n](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nx, sz);
                    for (int r = 0; r < rows; ++r) {
                        const std::size_t off = static_cast<std::size_t>(r) * n;
                        double dot = 0.0;
                        for (int j = 0; j < n; ++j) {
                            dot += dout[off + j] * (*vy)[off + j];
                        }
                        for (int j = 0; j < n; ++j) {
                            g[off + j] += (*vy)[off + j] * (dout[off + j] - dot);
                        }
                    }
                });
}

Tensor rms_norm(const Tensor& x, const Tensor& gain) {
    const auto [rows, n] = rows_cols(x, "rms_norm");
    if (gain.ndim() != 1 || gain.dim(0) != n) {
        throw ShapeError("rms_norm: gain shape " + Tensor::shape_str(gain.shape()) +
                         " does not match feature dim " + std::to_string(n));
    }
    std::vector<double> out(static_cast<std::size_t>(rows) * n);
    kernels::rms_norm_rows(x.values().data(), gain.values().data(), out.data(), rows, n,
                           kRmsNormEps);
    Tape* tape = common_tape({&x, &gain});
    const int nx = x.node(), ng = gain.node();
    Values vx = share(x);
    Values vg = share(gain);
    return emit(tape, x.shape(), std::move(out), {nx, ng},
                [nx, ng, vx, vg, rows = rows, n = n](const std::vector<double>& dout,
                                                     GradSink& sink) {
                    for (int r = 0; r < rows; ++r) {
                        const std::size_t off = static_cast<std::size_t>(r) * n;
                        double ss = 0.0;
                        for (int j = 0; j < n; ++j) {
                            ss += (*vx)[off + j] * (*vx)[off + j];
                        }
                        const double inv = 1.0 / std::sqrt(ss / n + kRmsNormEps);
                        if (nx >= 0) {
                            auto& g = sink.buffer(nx, static_cast<std::int64_t>(rows) * n);
                            double dot = 0.0;
                            for (int j = 0; j < n; ++j) {
                                dot += dout[off + j] * (*vg)[j] * (*vx)[off + j];
                            }
                            const double k = inv * inv * inv / n * dot;
                            for (int j = 0; j < n; ++j) {
                                g[off + j] += dout[off + j] * (*vg)[j] * inv - (*vx)[off + j] * k;
                            }
                        }
                        if (ng >= 0) {
                            auto& g = sink.buffer(ng, n);
                            for (int j = 0; j < n; ++j) {
                                g[j] += dout[off + j] * (*vx)[off + j] * inv;
                            }
                        }
                    }
                });
}

Tensor relu(const Tensor& x) {
    Tape* tape = common_tape({&x});
    std::vector<double> out(x.values());
    for (double& v : out) {
        v = std::max(v, 0.0);
    }
    const int nx = x.node();
    const std::int64_t sz = x.size();
    Values vx = share(x);
    return emit(tape, x.shape(), std::move(out), {nx},
                [nx, sz, vx](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nx, sz);
                    for (std::size_t i = 0; i < dout.size(); ++i) {
                        if ((*vx)[i] > 0.0) {
                            g[i] += dout[i];
                        }
                    }
                });
}

Tensor sigmoid(const Tensor& x) {
    Tape* tape = common_tape({&x});
    std::vector<double> out(x.values());
    for (double& v : out) {
        v = 1.0 / (1.0 + std::exp(-v));
    }
    const int nx = x.node();
    const std::int64_t sz = x.size();
    auto vy = std::make_shared<const std::vector<double>>(out);
    return emit(tape, x.shape(), std::move(out), {nx},
                [nx, sz, vy](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nx, sz);
                    for (std::size_t i = 0; i < dout.size(); ++i) {
                        g[i] += dout[i] * (*vy)[i] * (1.0 - (*vy)[i]);
                    }
                });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ContractError("dropout rate must be in [0,1)");
    }
    if (rate == 0.0) {
        return x;
    }
    const double keep = 1.0 - rate;
    auto mask = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.size()));
    std::vector<double> out(x.values());
    for (std::size_t i = 0; i < out.size(); ++i) {
        (*mask)[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        out[i] *= (*mask)[i];
    }
    Tape* tape = common_tape({&x});
    const int nx = x.node();
    const std::int64_t sz = x.size();
    return emit(tape, x.shape(), std::move(out), {nx},
                [nx, sz, mask](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nx, sz);
                    for (std::size_t i = 0; i < dout.size(); ++i) {
                        g[i] += dout[i] * (*mask)[i];
                    }
                });
}

// ---- gather / layout ops ---------------------------------------------------

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
    require_matrix(table, "embedding");
    const int v = table.dim(0), d = table.dim(1);
    if (ids.empty()) {
        throw ContractError("embedding: empty id list");
    }
    for (int id : ids) {
        if (id < 0 || id >= v) {
            throw ShapeError("embedding: id " + std::to_string(id) + " out of range [0," +
                             std::to_string(v) + ")");
        }
    }
    const int n = static_cast<int>(ids.size());
    std::vector<double> out(static_cast<std::size_t>(n) * d);
    for (int i = 0; i < n; ++i) {
        const double* src = table.values().data() + static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d;
        std::copy(src, src + d, out.begin() + static_cast<std::size_t>(i) * d);
    }
    Tape* tape = common_tape({&table});
    const int nt = table.node();
    auto ids_copy = std::make_shared<const std::vector<int>>(ids);
    return emit(tape, {n, d}, std::move(out), {nt},
                [nt, ids_copy, v, d](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nt, static_cast<std::int64_t>(v) * d);
                    for (std::size_t i = 0; i < ids_copy->size(); ++i) {
                        double* dst = g.data() + static_cast<std::size_t>((*ids_copy)[i]) * d;
                        const double* src = dout.data() + i * static_cast<std::size_t>(d);
                        for (int j = 0; j < d; ++j) {
                            dst[j] += src[j];
                        }
                    }
                });
}

Tensor slice_rows(const Tensor& x, int start, int count) {
    require_matrix(x, "slice_rows");
    const int r = x.dim(0), c = x.dim(1);
    if (start < 0 || count < 1 || start + count > r) {
        throw ShapeError("slice_rows: range [" + std::to_string(start) + "," +
                         std::to_string(start + count) + ") out of " + std::to_string(r));
    }
    std::vector<double> out(x.values().begin() + static_cast<std::size_t>(start) * c,
                            x.values().begin() + static_cast<std::size_t>(start + count) * c);
    Tape* tape = common_tape({&x});
    const int nx = x.node();
    return emit(tape, {count, c}, std::move(out), {nx},
                [nx, start, r, c](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nx, static_cast<std::int64_t>(r) * c);
                    for (std::size_t i = 0; i < dout.size(); ++i) {
                        g[static_cast<std::size_t>(start) * c + i] += dout[i];
                    }
                });
}

Tensor slice_cols(const Tensor& x, int start, int count) {
    require_matrix(x, "slice_cols");
    const int r = x.dim(0), c = x.dim(1);
    if (start < 0 || count < 1 || start + count > c) {
        throw ShapeError("slice_cols: range [" + std::to_string(start) + "," +
                         std::to_string(start + count) + ") out of " + std::to_string(c));
    }
    std::vector<double> out(static_cast<std::size_t>(r) * count);
    for (int i = 0; i < r; ++i) {
        const double* src = x.values().data() + static_cast<std::size_t>(i) * c + start;
        std::copy(src, src + count, out.begin() + static_cast<std::size_t>(i) * count);
    }
    Tape* tape = common_tape({&x});
    const int nx = x.node();
    return emit(tape, {r, count}, std::move(out), {nx},
                [nx, start, count, r, c](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nx, static_cast<std::int64_t>(r) * c);
                    for (int i = 0; i < r; ++i) {
                        for (int j = 0; j < count; ++j) {
                            g[static_cast<std::size_t>(i) * c + start + j] +=
                                dout[static_cast<std::size_t>(i) * count + j];
                        }
                    }
                });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        throw ContractError("concat_cols: no inputs");
    }
    const int r = parts[0].dim(0);
    int total = 0;
    Tape* tape = nullptr;
    std::vector<int> inputs;
    std::vector<int> widths;
    for (const Tensor& p : parts) {
        require_matrix(p, "concat_cols");
        if (p.dim(0) != r) {
            throw ShapeError("concat_cols: row mismatch");
        }
        if (p.on_tape()) {
            if (tape != nullptr && tape != p.tape()) {
                throw ContractError("tensors belong to different tapes");
            }
            tape = p.tape();
        }
        inputs.push_back(p.node());
        widths.push_back(p.dim(1));
        total += p.dim(1);
    }
    std::vector<double> out(static_cast<std::size_t>(r) * total);
    int col = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const int w = widths[k];
        for (int i = 0; i < r; ++i) {
            const double* src = parts[k].values().data() + static_cast<std::size_t>(i) * w;
            std::copy(src, src + w, out.begin() + static_cast<std::size_t>(i) * total + col);
        }
        col += w;
    }
    return emit(tape, {r, total}, std::move(out), inputs,
                [inputs, widths, r, total](const std::vector<double>& dout, GradSink& sink) {
                    int col = 0;
                    for (std::size_t k = 0; k < inputs.size(); ++k) {
                        const int w = widths[k];
                        if (inputs[k] >= 0) {
                            auto& g = sink.buffer(inputs[k], static_cast<std::int64_t>(r) * w);
                            for (int i = 0; i < r; ++i) {
                                for (int j = 0; j < w; ++j) {
                                    g[static_cast<std::size_t>(i) * w + j] +=
                                        dout[static_cast<std::size_t>(i) * total + col + j];
                                }
                            }
                        }
                        col += w;
                    }
                });
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        n *= d;
    }
    if (n != x.size()) {
        throw ShapeError("reshape: size mismatch " + Tensor::shape_str(x.shape()) + " -> " +
                         Tensor::shape_str(shape));
    }
    Tape* tape = common_tape({&x});
    const int nx = x.node();
    const std::int64_t sz = x.size();
    return emit(tape, std::move(shape), std::vector<double>(x.values()), {nx},
                [nx, sz](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nx, sz);
                    for (std::size_t i = 0; i < dout.size(); ++i) {
                        g[i] += dout[i];
                    }
                });
}

// ---- reductions -------------------------------------------------------------

Tensor row_sums(const Tensor& x) {
    require_matrix(x, "row_sums");
    const int r = x.dim(0), c = x.dim(1);
    std::vector<double> out(static_cast<std::size_t>(r), 0.0);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            out[static_cast<std::size_t>(i)] += x.values()[static_cast<std::size_t>(i) * c + j];
        }
    }
    Tape* tape = common_tape({&x});
    const int nx = x.node();
    return emit(tape, {r}, std::move(out), {nx},
                [nx, r, c](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nx, static_cast<std::int64_t>(r) * c);
                    for (int i = 0; i < r; ++i) {
                        for (int j = 0; j < c; ++j) {
                            g[static_cast<std::size_t>(i) * c + j] += dout[static_cast<std::size_t>(i)];
                        }
                    }
                });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) {
        total += v;
    }
    Tape* tape = common_tape({&x});
    const int nx = x.node();
    const std::int64_t sz = x.size();
    return emit(tape, {1}, {total}, {nx},
                [nx, sz](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nx, sz);
                    for (double& v : g) {
                        v += dout[0];
                    }
                });
}

// ---- losses -----------------------------------------------------------------

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
    if (logits.ndim() != 1) {
        throw ShapeError("bce_with_logits: expected 1-d logits, got " +
                         Tensor::shape_str(logits.shape()));
    }
    const int n = logits.dim(0);
    if (static_cast<int>(targets.size()) != n) {
        throw ShapeError("bce_with_logits: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(n) + " logits");
    }
    for (double t : targets) {
        if (t != 0.0 && t != 1.0) {
            throw ContractError("bce_with_logits: targets must be 0 or 1");
        }
    }
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = logits.at(i);
        loss += std::max(z, 0.0) - z * targets[static_cast<std::size_t>(i)] +
                std::log1p(std::exp(-std::abs(z)));
    }
    loss /= n;
    Tape* tape = common_tape({&logits});
    const int nl = logits.node();
    Values vz = share(logits);
    auto vt = std::make_shared<const std::vector<double>>(targets);
    return emit(tape, {1}, {loss}, {nl},
                [nl, vz, vt, n](const std::vector<double>& dout, GradSink& sink) {
                    auto& g = sink.buffer(nl, n);
                    for (int i = 0; i < n; ++i) {
                        const double p = 1.0 / (1.0 + std::exp(-(*vz)[static_cast<std::size_t>(i)]));
                        g[static_cast<std::size_t>(i)] +=
                            dout[0] * (p - (*vt)[static_cast<std::size_t>(i)]) / n;
                    }
                });
}

Tensor cross_entropy_vocab(const Tensor& logits, const std::vector<int>& target_ids,
                           const std::vector<std::uint8_t>& mask) {
    require_matrix(logits, "cross_entropy_vocab");
    const int t = logits.dim(0), v = logits.dim(1);
    if (static_cast<int>(target_ids.size()) != t) {
        throw ShapeError("cross_entropy_vocab: " + std::to_string(target_ids.size()) +
                         " targets for " + std::to_string(t) + " positions");
    }
    if (!mask.empty() && static_cast<int>(mask.size()) != t) {
        throw ShapeError("cross_entropy_vocab: mask length mismatch");
    }
    for (int id : target_ids) {
        if (id < 0 || id >= v) {
            throw ShapeError("cross_entropy_vocab: target id " + std::to_string(id) +
                             " out of range [0," + std::to_string(v) + ")");
        }
    }
    int counted = 0;
    double loss = 0.0;
    for (int i = 0; i < t; ++i) {
        if (!mask.empty() && !mask[static_cast<std::size_t>(i)]) {
            continue;
        }
        ++counted;
        const double* row = logits.values().data() + static_cast<std::size_t>(i) * v;
        double mx = row[0];
        for (int j = 1; j < v; ++j) {
            mx = std::max(mx, row[j]);
        }
        double se = 0.0;
        for (int j = 0; j < v; ++j) {
            se += std::exp(row[j] - mx);
        }
        loss += mx + std::log(se) - row[target_ids[static_cast<std::size_t>(i)]];
    }
    if (counted > 0) {
        loss /= counted;
    }
    Tape* tape = common_tape({&logits});
    const int nl = logits.node();
    Values vz = share(logits);
    auto ids = std::make_shared<const std::vector<int>>(target_ids);
    auto msk = std::make_shared<const std::vector<std::uint8_t>>(mask);
    return emit(tape, {1}, {loss}, {nl},
                [nl, vz, ids, msk, t, v, counted](const std::vector<double>& dout, GradSink& sink) {
                    if (counted == 0) {
                        return;
                    }
                    auto& g = sink.buffer(nl, static_cast<std::int64_t>(t) * v);
                    for (int i = 0; i < t; ++i) {
                        if (!msk->empty() && !(*msk)[static_cast<std::size_t>(i)]) {
                            continue;
                        }
                        const double* row = vz->data() + static_cast<std::size_t>(i) * v;
                        double mx = row[0];
                        for (int j = 1; j < v; ++j) {
                            mx = std::max(mx, row[j]);
                        }
                        double se = 0.0;
                        for (int j = 0; j < v; ++j) {
                            se += std::exp(row[j] - mx);
                        }
                        double* grow = g.data() + static_cast<std::size_t>(i) * v;
                        const double w = dout[0] / counted;
                        for (int j = 0; j < v; ++j) {
                            grow[j] += w * std::exp(row[j] - mx) / se;
                        }
                        grow[(*ids)[static_cast<std::size_t>(i)]] -= w;
                    }
                });
}

}  // namespace mltc
