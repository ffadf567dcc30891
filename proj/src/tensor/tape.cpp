#include "delicate/tensor/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "delicate/error.hpp"

namespace delicate::tensor {

namespace {

void check_same_tape(Var a, Var b, const char* op) {
    if (a.tape == nullptr || a.tape != b.tape)
        throw dimension_error(std::string(op) + ": operands are not on the same tape");
}

// C[m,n] = A[m,k] * B[k,n]; C must arrive zeroed (fresh tensors are).
void mm(const double* __restrict a, const double* __restrict b, double* __restrict c,
        std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        double* __restrict crow = c + i * n;
        const double* arow = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            double av = arow[p];
            const double* __restrict brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,k] += A[m,n] * B^T where B is [k,n]
void mm_nt_acc(const double* __restrict a, const double* __restrict b, double* __restrict c,
               std::int64_t m, std::int64_t n, std::int64_t k) {
    for (std::int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * n;
        double* __restrict crow = c + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const double* __restrict brow = b + p * n;
            double s = 0.0;
            for (std::int64_t j = 0; j < n; ++j) s += arow[j] * brow[j];
            crow[p] += s;
        }
    }
}

// C[k,n] += A^T * B where A is [m,k], B is [m,n]. The product is formed in
// `scratch` and added to C element-by-element in one pass, so every call
// contributes exactly one rounded addend per element (the tying-equivalence
// gradient law relies on this).
void mm_tn_acc(const double* __restrict a, const double* __restrict b, double* __restrict c,
               double* __restrict scratch, std::int64_t m, std::int64_t k, std::int64_t n) {
    std::fill(scratch, scratch + k * n, 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* __restrict brow = b + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
            double av = arow[p];
            if (av == 0.0) continue;
            double* __restrict crow = scratch + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    for (std::int64_t e = 0; e < k * n; ++e) c[e] += scratch[e];
}

struct AxisSplit {
    std::int64_t outer, len, inner;
};

AxisSplit split_at(const Shape& shape, int axis) {
    AxisSplit s{1, shape[axis], 1};
    for (int i = 0; i < axis; ++i) s.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

int normalize_axis(int axis, int rank, const char* op) {
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank)
        throw dimension_error(std::string(op) + ": axis out of range for rank " + std::to_string(rank));
    return axis;
}

constexpr double kMaskBias = -1e30;
constexpr double kGeluCoeff = 0.044715;
const double kGeluScale = std::sqrt(2.0 / 3.14159265358979323846);

}  // namespace

Tape::Tape(Precision precision, bool training, Rng* dropout_rng, bool grad_enabled)
    : precision_(precision), training_(training), grad_enabled_(grad_enabled), dropout_rng_(dropout_rng) {}

Var Tape::push(Tensor value, const char* op_name) {
    value.round_to(precision_);
    if (!value.all_finite())
        throw numeric_error(std::string("non-finite value produced by op '") + op_name + "'");
    Node node;
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::set_backprop(Var v, std::function<void()> backprop) {
    if (!grad_enabled_) return;
    nodes_[v.id].backprop = std::move(backprop);
}

Var Tape::leaf(Tensor value) { return push(std::move(value), "leaf"); }

Var Tape::param(Param& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var{this, it->second};
    Var v = push(p.value, "param");
    nodes_[v.id].param = &p;
    param_nodes_.emplace(&p, v.id);
    return v;
}

void Tape::backward(Var loss) {
    if (!grad_enabled_) throw dimension_error("backward() on a tape recorded with gradients disabled");
    if (loss.tape != this) throw dimension_error("backward(): loss is not on this tape");
    if (nodes_[loss.id].value.numel() != 1)
        throw dimension_error("backward() requires a scalar loss, got shape " +
                              shape_str(nodes_[loss.id].value.shape()));
    for (int i = 0; i <= loss.id; ++i) nodes_[i].grad = Tensor::zeros(nodes_[i].value.shape());
    nodes_[loss.id].grad.fill(1.0);
    for (int i = loss.id; i >= 0; --i)
        if (nodes_[i].backprop) nodes_[i].backprop();
    for (auto [p, id] : param_nodes_) {
        if (id > loss.id) continue;
        Param* param = nodes_[id].param;
        const Tensor& g = nodes_[id].grad;
        double* dst = param->grad.data();
        const double* src = g.data();
        for (std::int64_t j = 0; j < g.numel(); ++j) dst[j] += src[j];
    }
}

Var matmul(Var a, Var b) {
    check_same_tape(a, b, "matmul");
    Tape* t = a.tape;
    const Tensor& ta = t->value(a);
    const Tensor& tb = t->value(b);
    if (ta.rank() < 2 || tb.rank() < 2 || ta.rank() != tb.rank())
        throw dimension_error("matmul: incompatible ranks " + shape_str(ta.shape()) + " vs " +
                              shape_str(tb.shape()));
    int r = ta.rank();
    std::int64_t m = ta.dim(r - 2), k = ta.dim(r - 1);
    std::int64_t k2 = tb.dim(r - 2), n = tb.dim(r - 1);
    std::int64_t batch = 1;
    for (int i = 0; i < r - 2; ++i) {
        if (ta.dim(i) != tb.dim(i))
            throw dimension_error("matmul: batch dims differ, " + shape_str(ta.shape()) + " vs " +
                                  shape_str(tb.shape()));
        batch *= ta.dim(i);
    }
    if (k != k2)
        throw dimension_error("matmul: inner dims differ, " + shape_str(ta.shape()) + " vs " +
                              shape_str(tb.shape()));
    Shape out_shape(ta.shape());
    out_shape[r - 2] = m;
    out_shape[r - 1] = n;
    Tensor out(out_shape);
    for (std::int64_t bi = 0; bi < batch; ++bi)
        mm(ta.data() + bi * m * k, tb.data() + bi * k * n, out.data() + bi * m * n, m, k, n);
    Var o = t->push(std::move(out), "matmul");
    t->set_backprop(o, [t, a, b, o, batch, m, k, n]() {
        const Tensor& go = t->grad(o);
        const Tensor& va = t->value(a);
        const Tensor& vb = t->value(b);
        Tensor& ga = t->grad(a);
        Tensor& gb = t->grad(b);
        std::vector<double> scratch(k * n);
        for (std::int64_t bi = 0; bi < batch; ++bi) {
            mm_nt_acc(go.data() + bi * m * n, vb.data() + bi * k * n, ga.data() + bi * m * k, m, n, k);
            mm_tn_acc(va.data() + bi * m * k, go.data() + bi * m * n, gb.data() + bi * k * n,
                      scratch.data(), m, k, n);
        }
    });
    return o;
}

Var add(Var a, Var b) {
    check_same_tape(a, b, "add");
    Tape* t = a.tape;
    const Tensor& ta = t->value(a);
    const Tensor& tb = t->value(b);
    if (!ta.same_shape(tb))
        throw dimension_error("add: shape mismatch " + shape_str(ta.shape()) + " vs " +
                              shape_str(tb.shape()));
    Tensor out(ta.shape());
    for (std::int64_t i = 0; i < ta.numel(); ++i) out.data()[i] = ta.data()[i] + tb.data()[i];
    Var o = t->push(std::move(out), "add");
    t->set_backprop(o, [t, a, b, o]() {
        const Tensor& go = t->grad(o);
        Tensor& ga = t->grad(a);
        Tensor& gb = t->grad(b);
        for (std::int64_t i = 0; i < go.numel(); ++i) {
            ga.data()[i] += go.data()[i];
            gb.data()[i] += go.data()[i];
        }
    });
    return o;
}

Var add_bias(Var x, Var bias) {
    check_same_tape(x, bias, "add_bias");
    Tape* t = x.tape;
    const Tensor& tx = t->value(x);
    const Tensor& tb = t->value(bias);
    if (tb.rank() != 1 || tx.rank() < 1 || tx.dim(tx.rank() - 1) != tb.dim(0))
        throw dimension_error("add_bias: shape mismatch " + shape_str(tx.shape()) + " vs " +
                              shape_str(tb.shape()));
    std::int64_t n = tb.dim(0);
    std::int64_t rows = tx.numel() / n;
    Tensor out(tx.shape());
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < n; ++j) out.data()[r * n + j] = tx.data()[r * n + j] + tb.data()[j];
    Var o = t->push(std::move(out), "add_bias");
    t->set_backprop(o, [t, x, bias, o, rows, n]() {
        const Tensor& go = t->grad(o);
        Tensor& gx = t->grad(x);
        Tensor& gb = t->grad(bias);
        std::vector<double> bias_sum(n, 0.0);  // one rounded addend per element per call
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < n; ++j) {
                gx.data()[r * n + j] += go.data()[r * n + j];
                bias_sum[j] += go.data()[r * n + j];
            }
        for (std::int64_t j = 0; j < n; ++j) gb.data()[j] += bias_sum[j];
    });
    return o;
}

Var mul(Var a, Var b) {
    check_same_tape(a, b, "mul");
    Tape* t = a.tape;
    const Tensor& ta = t->value(a);
    const Tensor& tb = t->value(b);
    if (!ta.same_shape(tb))
        throw dimension_error("mul: shape mismatch " + shape_str(ta.shape()) + " vs " +
                              shape_str(tb.shape()));
    Tensor out(ta.shape());
    for (std::int64_t i = 0; i < ta.numel(); ++i) out.data()[i] = ta.data()[i] * tb.data()[i];
    Var o = t->push(std::move(out), "mul");
    t->set_backprop(o, [t, a, b, o]() {
        const Tensor& go = t->grad(o);
        const Tensor& va = t->value(a);
        const Tensor& vb = t->value(b);
        Tensor& ga = t->grad(a);
        Tensor& gb = t->grad(b);
        for (std::int64_t i = 0; i < go.numel(); ++i) {
            ga.data()[i] += go.data()[i] * vb.data()[i];
            gb.data()[i] += go.data()[i] * va.data()[i];
        }
    });
    return o;
}

Var scale(Var a, double c) {
    Tape* t = a.tape;
    const Tensor& ta = t->value(a);
    Tensor out(ta.shape());
    for (std::int64_t i = 0; i < ta.numel(); ++i) out.data()[i] = ta.data()[i] * c;
    Var o = t->push(std::move(out), "scale");
    t->set_backprop(o, [t, a, o, c]() {
        const Tensor& go = t->grad(o);
        Tensor& ga = t->grad(a);
        for (std::int64_t i = 0; i < go.numel(); ++i) ga.data()[i] += go.data()[i] * c;
    });
    return o;
}

Var transpose_last2(Var a) {
    Tape* t = a.tape;
    const Tensor& ta = t->value(a);
    if (ta.rank() < 2) throw dimension_error("transpose_last2: rank < 2");
    int r = ta.rank();
    std::int64_t m = ta.dim(r - 2), n = ta.dim(r - 1);
    std::int64_t batch = ta.numel() / (m * n);
    Shape out_shape(ta.shape());
    std::swap(out_shape[r - 2], out_shape[r - 1]);
    Tensor out(out_shape);
    for (std::int64_t bi = 0; bi < batch; ++bi) {
        const double* src = ta.data() + bi * m * n;
        double* dst = out.data() + bi * m * n;
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
    }
    Var o = t->push(std::move(out), "transpose_last2");
    t->set_backprop(o, [t, a, o, batch, m, n]() {
        const Tensor& go = t->grad(o);  // [.., n, m]
        Tensor& ga = t->grad(a);
        for (std::int64_t bi = 0; bi < batch; ++bi) {
            const double* src = go.data() + bi * m * n;
            double* dst = ga.data() + bi * m * n;
            for (std::int64_t j = 0; j < n; ++j)
                for (std::int64_t i = 0; i < m; ++i) dst[i * n + j] += src[j * m + i];
        }
    });
    return o;
}

namespace {

std::vector<std::int64_t> row_major_strides(const Shape& shape) {
    std::vector<std::int64_t> strides(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
        strides[i] = strides[i + 1] * shape[i + 1];
    return strides;
}

// out[i0,..] = in[axes[0] of i, ..]; returns mapping out_linear -> in_linear.
// Walks an odometer over the output index instead of dividing per element.
std::vector<std::int64_t> permute_index_map(const Shape& in_shape, const std::vector<int>& axes) {
    const int rank = static_cast<int>(axes.size());
    Shape out_shape(rank);
    for (int i = 0; i < rank; ++i) out_shape[i] = in_shape[axes[i]];
    auto in_strides = row_major_strides(in_shape);
    std::vector<std::int64_t> step(rank);
    for (int d = 0; d < rank; ++d) step[d] = in_strides[axes[d]];
    std::int64_t n = shape_numel(in_shape);
    std::vector<std::int64_t> map(n);
    std::vector<std::int64_t> idx(rank, 0);
    std::int64_t src = 0;
    for (std::int64_t lin = 0; lin < n; ++lin) {
        map[lin] = src;
        for (int d = rank - 1; d >= 0; --d) {
            src += step[d];
            if (++idx[d] < out_shape[d]) break;
            src -= step[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    return map;
}

}  // namespace

Var permute(Var a, const std::vector<int>& axes) {
    Tape* t = a.tape;
    const Tensor& ta = t->value(a);
    if (static_cast<int>(axes.size()) != ta.rank())
        throw dimension_error("permute: axes length does not match rank");
    std::vector<bool> seen(axes.size(), false);
    for (int ax : axes) {
        if (ax < 0 || ax >= ta.rank() || seen[ax]) throw dimension_error("permute: invalid axes");
        seen[ax] = true;
    }
    Shape out_shape(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = ta.dim(axes[i]);
    auto map = permute_index_map(ta.shape(), axes);
    Tensor out(out_shape);
    for (std::int64_t i = 0; i < ta.numel(); ++i) out.data()[i] = ta.data()[map[i]];
    Var o = t->push(std::move(out), "permute");
    t->set_backprop(o, [t, a, o, map]() {
        const Tensor& go = t->grad(o);
        Tensor& ga = t->grad(a);
        for (std::int64_t i = 0; i < go.numel(); ++i) ga.data()[map[i]] += go.data()[i];
    });
    return o;
}

Var reshape(Var a, Shape shape) {
    Tape* t = a.tape;
    const Tensor& ta = t->value(a);
    if (shape_numel(shape) != ta.numel())
        throw dimension_error("reshape: cannot reshape " + shape_str(ta.shape()) + " to " +
                              shape_str(shape));
    Tensor out(shape, ta.vec());
    Var o = t->push(std::move(out), "reshape");
    t->set_backprop(o, [t, a, o]() {
        const Tensor& go = t->grad(o);
        Tensor& ga = t->grad(a);
        for (std::int64_t i = 0; i < go.numel(); ++i) ga.data()[i] += go.data()[i];
    });
    return o;
}

Var concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw dimension_error("concat: no inputs");
    Tape* t = parts[0].tape;
    for (const Var& p : parts) check_same_tape(parts[0], p, "concat");
    const Tensor& first = t->value(parts[0]);
    int ax = normalize_axis(axis, first.rank(), "concat");
    std::int64_t total_len = 0;
    for (const Var& p : parts) {
        const Tensor& tp = t->value(p);
        if (tp.rank() != first.rank()) throw dimension_error("concat: rank mismatch");
        for (int d = 0; d < first.rank(); ++d)
            if (d != ax && tp.dim(d) != first.dim(d))
                throw dimension_error("concat: shape mismatch " + shape_str(tp.shape()) + " vs " +
                                      shape_str(first.shape()));
        total_len += tp.dim(ax);
    }
    Shape out_shape(first.shape());
    out_shape[ax] = total_len;
    Tensor out(out_shape);
    AxisSplit os = split_at(out_shape, ax);
    std::int64_t offset = 0;
    for (const Var& p : parts) {
        const Tensor& tp = t->value(p);
        AxisSplit ps = split_at(tp.shape(), ax);
        for (std::int64_t oi = 0; oi < ps.outer; ++oi)
            std::memcpy(out.data() + (oi * os.len + offset) * os.inner,
                        tp.data() + oi * ps.len * ps.inner,
                        sizeof(double) * ps.len * ps.inner);
        offset += ps.len;
    }
    Var o = t->push(std::move(out), "concat");
    std::vector<Var> inputs(parts);
    t->set_backprop(o, [t, inputs, o, ax, os]() {
        const Tensor& go = t->grad(o);
        std::int64_t offset = 0;
        for (const Var& p : inputs) {
            Tensor& gp = t->grad(p);
            AxisSplit ps = split_at(t->value(p).shape(), ax);
            for (std::int64_t oi = 0; oi < ps.outer; ++oi) {
                const double* src = go.data() + (oi * os.len + offset) * os.inner;
                double* dst = gp.data() + oi * ps.len * ps.inner;
                for (std::int64_t j = 0; j < ps.len * ps.inner; ++j) dst[j] += src[j];
            }
            offset += ps.len;
        }
    });
    return o;
}

Var slice(Var a, int axis, std::int64_t start, std::int64_t len) {
    Tape* t = a.tape;
    const Tensor& ta = t->value(a);
    int ax = normalize_axis(axis, ta.rank(), "slice");
    if (start < 0 || len <= 0 || start + len > ta.dim(ax))
        throw dimension_error("slice: range [" + std::to_string(start) + ", " +
                              std::to_string(start + len) + ") out of bounds for axis size " +
                              std::to_string(ta.dim(ax)));
    Shape out_shape(ta.shape());
    out_shape[ax] = len;
    Tensor out(out_shape);
    AxisSplit is = split_at(ta.shape(), ax);
    for (std::int64_t oi = 0; oi < is.outer; ++oi)
        std::memcpy(out.data() + oi * len * is.inner,
                    ta.data() + (oi * is.len + start) * is.inner,
                    sizeof(double) * len * is.inner);
    Var o = t->push(std::move(out), "slice");
    t->set_backprop(o, [t, a, o, is, start, len]() {
        const Tensor& go = t->grad(o);
        Tensor& ga = t->grad(a);
        for (std::int64_t oi = 0; oi < is.outer; ++oi) {
            const double* src = go.data() + oi * len * is.inner;
            double* dst = ga.data() + (oi * is.len + start) * is.inner;
            for (std::int64_t j = 0; j < len * is.inner; ++j) dst[j] += src[j];
        }
    });
    return o;
}

Var embedding(Var table, const std::vector<int>& ids, const Shape& leading) {
    Tape* t = table.tape;
    const Tensor& tt = t->value(table);
    if (tt.rank() != 2) throw dimension_error("embedding: table must be rank 2");
    if (shape_numel(leading) != static_cast<std::int64_t>(ids.size()))
        throw dimension_error("embedding: leading shape does not match id count");
    std::int64_t v = tt.dim(0), h = tt.dim(1);
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] < 0 || ids[i] >= v)
            throw dimension_error("embedding: id " + std::to_string(ids[i]) + " out of range at position " +
                                  std::to_string(i));
    Shape out_shape(leading);
    out_shape.push_back(h);
    Tensor out(out_shape);
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::memcpy(out.data() + static_cast<std::int64_t>(i) * h, tt.data() + ids[i] * h,
                    sizeof(double) * h);
    Var o = t->push(std::move(out), "embedding");
    t->set_backprop(o, [t, table, o, ids, h]() {
        const Tensor& go = t->grad(o);
        Tensor& gt = t->grad(table);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double* src = go.data() + static_cast<std::int64_t>(i) * h;
            double* dst = gt.data() + ids[i] * h;
            for (std::int64_t j = 0; j < h; ++j) dst[j] += src[j];
        }
    });
    return o;
}

Var gather_rows(Var x, const std::vector<std::int64_t>& rows) {
    Tape* t = x.tape;
    const Tensor& tx = t->value(x);
    if (tx.rank() != 2) throw dimension_error("gather_rows: input must be rank 2");
    std::int64_t n = tx.dim(0), d = tx.dim(1);
    for (auto r : rows)
        if (r < 0 || r >= n) throw dimension_error("gather_rows: row index out of range");
    Tensor out({static_cast<std::int64_t>(rows.size()), d});
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::memcpy(out.data() + static_cast<std::int64_t>(i) * d, tx.data() + rows[i] * d,
                    sizeof(double) * d);
    Var o = t->push(std::move(out), "gather_rows");
    t->set_backprop(o, [t, x, o, rows, d]() {
        const Tensor& go = t->grad(o);
        Tensor& gx = t->grad(x);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double* src = go.data() + static_cast<std::int64_t>(i) * d;
            double* dst = gx.data() + rows[i] * d;
            for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
    return o;
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    check_same_tape(x, gamma, "layer_norm");
    check_same_tape(x, beta, "layer_norm");
    Tape* t = x.tape;
    const Tensor& tx = t->value(x);
    const Tensor& tg = t->value(gamma);
    const Tensor& tb = t->value(beta);
    std::int64_t h = tx.dim(tx.rank() - 1);
    if (tg.rank() != 1 || tb.rank() != 1 || tg.dim(0) != h || tb.dim(0) != h)
        throw dimension_error("layer_norm: gamma/beta must be rank 1 of size " + std::to_string(h));
    std::int64_t rows = tx.numel() / h;
    Tensor out(tx.shape());
    // Cache per-row inverse std and normalized values for backward.
    auto xhat = std::make_shared<std::vector<double>>(tx.numel());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = tx.data() + r * h;
        double mean = 0.0;
        for (std::int64_t j = 0; j < h; ++j) mean += row[j];
        mean /= h;
        double var = 0.0;
        for (std::int64_t j = 0; j < h; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= h;
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::int64_t j = 0; j < h; ++j) {
            double xh = (row[j] - mean) * is;
            (*xhat)[r * h + j] = xh;
            out.data()[r * h + j] = tg.data()[j] * xh + tb.data()[j];
        }
    }
    Var o = t->push(std::move(out), "layer_norm");
    t->set_backprop(o, [t, x, gamma, beta, o, rows, h, xhat, inv_std]() {
        const Tensor& go = t->grad(o);
        const Tensor& tg = t->value(gamma);
        Tensor& gx = t->grad(x);
        Tensor& gg = t->grad(gamma);
        Tensor& gb = t->grad(beta);
        std::vector<double> gamma_sum(h, 0.0), beta_sum(h, 0.0);
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* g = go.data() + r * h;
            const double* xh = xhat->data() + r * h;
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::int64_t j = 0; j < h; ++j) {
                gamma_sum[j] += g[j] * xh[j];
                beta_sum[j] += g[j];
                double dxh = g[j] * tg.data()[j];
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xh[j];
            }
            double is = (*inv_std)[r];
            for (std::int64_t j = 0; j < h; ++j) {
                double dxh = g[j] * tg.data()[j];
                gx.data()[r * h + j] +=
                    is * (dxh - sum_dxhat / h - xh[j] * sum_dxhat_xhat / h);
            }
        }
        for (std::int64_t j = 0; j < h; ++j) {
            gg.data()[j] += gamma_sum[j];
            gb.data()[j] += beta_sum[j];
        }
    });
    return o;
}

Var gelu(Var x) {
    Tape* t = x.tape;
    const Tensor& tx = t->value(x);
    Tensor out(tx.shape());
    for (std::int64_t i = 0; i < tx.numel(); ++i) {
        double v = tx.data()[i];
        double u = kGeluScale * (v + kGeluCoeff * v * v * v);
        out.data()[i] = 0.5 * v * (1.0 + std::tanh(u));
    }
    Var o = t->push(std::move(out), "gelu");
    t->set_backprop(o, [t, x, o]() {
        const Tensor& go = t->grad(o);
        const Tensor& vx = t->value(x);
        Tensor& gx = t->grad(x);
        for (std::int64_t i = 0; i < go.numel(); ++i) {
            double v = vx.data()[i];
            double u = kGeluScale * (v + kGeluCoeff * v * v * v);
            double th = std::tanh(u);
            double du = kGeluScale * (1.0 + 3.0 * kGeluCoeff * v * v);
            double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
            gx.data()[i] += go.data()[i] * d;
        }
    });
    return o;
}

Var tanh_act(Var x) {
    Tape* t = x.tape;
    const Tensor& tx = t->value(x);
    Tensor out(tx.shape());
    for (std::int64_t i = 0; i < tx.numel(); ++i) out.data()[i] = std::tanh(tx.data()[i]);
    Var o = t->push(std::move(out), "tanh");
    t->set_backprop(o, [t, x, o]() {
        const Tensor& go = t->grad(o);
        const Tensor& vo = t->value(o);
        Tensor& gx = t->grad(x);
        for (std::int64_t i = 0; i < go.numel(); ++i)
            gx.data()[i] += go.data()[i] * (1.0 - vo.data()[i] * vo.data()[i]);
    });
    return o;
}

Var softmax(Var x, int axis) {
    Tape* t = x.tape;
    const Tensor& tx = t->value(x);
    int ax = normalize_axis(axis, tx.rank(), "softmax");
    AxisSplit s = split_at(tx.shape(), ax);
    Tensor out(tx.shape());
    for (std::int64_t oi = 0; oi < s.outer; ++oi)
        for (std::int64_t ii = 0; ii < s.inner; ++ii) {
            std::int64_t base = oi * s.len * s.inner + ii;
            double mx = tx.data()[base];
            for (std::int64_t p = 1; p < s.len; ++p)
                mx = std::max(mx, tx.data()[base + p * s.inner]);
            double z = 0.0;
            for (std::int64_t p = 0; p < s.len; ++p) {
                double e = std::exp(tx.data()[base + p * s.inner] - mx);
                out.data()[base + p * s.inner] = e;
                z += e;
            }
            for (std::int64_t p = 0; p < s.len; ++p) out.data()[base + p * s.inner] /= z;
        }
    Var o = t->push(std::move(out), "softmax");
    t->set_backprop(o, [t, x, o, s]() {
        const Tensor& go = t->grad(o);
        const Tensor& y = t->value(o);
        Tensor& gx = t->grad(x);
        for (std::int64_t oi = 0; oi < s.outer; ++oi)
            for (std::int64_t ii = 0; ii < s.inner; ++ii) {
                std::int64_t base = oi * s.len * s.inner + ii;
                double dot = 0.0;
                for (std::int64_t p = 0; p < s.len; ++p)
                    dot += go.data()[base + p * s.inner] * y.data()[base + p * s.inner];
                for (std::int64_t p = 0; p < s.len; ++p)
                    gx.data()[base + p * s.inner] +=
                        y.data()[base + p * s.inner] * (go.data()[base + p * s.inner] - dot);
            }
    });
    return o;
}

Var dropout(Var x, double p) {
    Tape* t = x.tape;
    if (!t->training() || p <= 0.0) return x;
    if (p >= 1.0) throw config_error("dropout probability must be < 1");
    if (t->dropout_rng() == nullptr)
        throw config_error("dropout requires a tape constructed with a dropout RNG stream");
    const Tensor& tx = t->value(x);
    auto mask = std::make_shared<std::vector<double>>(tx.numel());
    double keep_scale = 1.0 / (1.0 - p);
    Rng* rng = t->dropout_rng();
    // 32-bit threshold draw; plenty of resolution for a keep/drop decision
    std::uint32_t threshold = static_cast<std::uint32_t>(p * 4294967296.0);
    Tensor out(tx.shape());
    for (std::int64_t i = 0; i < tx.numel(); ++i) {
        double m = rng->next_u32() < threshold ? 0.0 : keep_scale;
        (*mask)[i] = m;
        out.data()[i] = tx.data()[i] * m;
    }
    Var o = t->push(std::move(out), "dropout");
    t->set_backprop(o, [t, x, o, mask]() {
        const Tensor& go = t->grad(o);
        Tensor& gx = t->grad(x);
        for (std::int64_t i = 0; i < go.numel(); ++i) gx.data()[i] += go.data()[i] * (*mask)[i];
    });
    return o;
}

Var mask_attention_scores(Var scores, const std::vector<std::uint8_t>& key_real) {
    Tape* t = scores.tape;
    const Tensor& ts = t->value(scores);
    if (ts.rank() != 4) throw dimension_error("mask_attention_scores: scores must be rank 4");
    std::int64_t b = ts.dim(0), heads = ts.dim(1), q = ts.dim(2), k = ts.dim(3);
    if (static_cast<std::int64_t>(key_real.size()) != b * k)
        throw dimension_error("mask_attention_scores: key mask length " +
                              std::to_string(key_real.size()) + " != batch*keys " +
                              std::to_string(b * k));
    Tensor out(ts.shape());
    std::int64_t idx = 0;
    for (std::int64_t bi = 0; bi < b; ++bi)
        for (std::int64_t hi = 0; hi < heads; ++hi)
            for (std::int64_t qi = 0; qi < q; ++qi)
                for (std::int64_t ki = 0; ki < k; ++ki, ++idx)
                    out.data()[idx] = ts.data()[idx] + (key_real[bi * k + ki] ? 0.0 : kMaskBias);
    Var o = t->push(std::move(out), "mask_attention_scores");
    t->set_backprop(o, [t, scores, o]() {
        const Tensor& go = t->grad(o);
        Tensor& gs = t->grad(scores);
        for (std::int64_t i = 0; i < go.numel(); ++i) gs.data()[i] += go.data()[i];
    });
    return o;
}

Var sum_all(Var x) {
    Tape* t = x.tape;
    const Tensor& tx = t->value(x);
    double s = 0.0;
    for (std::int64_t i = 0; i < tx.numel(); ++i) s += tx.data()[i];
    Var o = t->push(Tensor::scalar(s), "sum_all");
    t->set_backprop(o, [t, x, o]() {
        double g = t->grad(o).data()[0];
        Tensor& gx = t->grad(x);
        for (std::int64_t i = 0; i < gx.numel(); ++i) gx.data()[i] += g;
    });
    return o;
}

Var masked_cross_entropy(Var logits, const std::vector<int>& targets) {
    Tape* t = logits.tape;
    const Tensor& tl = t->value(logits);
    if (tl.rank() != 2) throw dimension_error("masked_cross_entropy: logits must be [rows, classes]");
    std::int64_t n = tl.dim(0), v = tl.dim(1);
    if (static_cast<std::int64_t>(targets.size()) != n)
        throw dimension_error("masked_cross_entropy: target count " + std::to_string(targets.size()) +
                              " != rows " + std::to_string(n));
    std::int64_t labeled = 0;
    for (int tgt : targets) {
        if (tgt >= static_cast<int>(v))
            throw dimension_error("masked_cross_entropy: target id out of range");
        if (tgt >= 0) ++labeled;
    }
    if (labeled == 0) throw data_error("masked_cross_entropy: empty mask, no labeled positions");
    auto probs = std::make_shared<std::vector<double>>(n * v, 0.0);
    double loss = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        if (targets[i] < 0) continue;
        const double* row = tl.data() + i * v;
        double mx = row[0];
        for (std::int64_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
        double lse = std::log(z) + mx;
        loss += lse - row[targets[i]];
        for (std::int64_t j = 0; j < v; ++j) (*probs)[i * v + j] = std::exp(row[j] - lse);
    }
    loss /= static_cast<double>(labeled);
    Var o = t->push(Tensor::scalar(loss), "masked_cross_entropy");
    t->set_backprop(o, [t, logits, o, targets, probs, n, v, labeled]() {
        double g = t->grad(o).data()[0] / static_cast<double>(labeled);
        Tensor& gl = t->grad(logits);
        for (std::int64_t i = 0; i < n; ++i) {
            if (targets[i] < 0) continue;
            double* grow = gl.data() + i * v;
            const double* prow = probs->data() + i * v;
            for (std::int64_t j = 0; j < v; ++j) grow[j] += g * prow[j];
            grow[targets[i]] -= g;
        }
    });
    return o;
}

Var mse(Var a, Var b) {
    check_same_tape(a, b, "mse");
    Tape* t = a.tape;
    const Tensor& ta = t->value(a);
    const Tensor& tb = t->value(b);
    if (!ta.same_shape(tb))
        throw dimension_error("mse: shape mismatch " + shape_str(ta.shape()) + " vs " +
                              shape_str(tb.shape()));
    std::int64_t n = ta.numel();
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        double d = ta.data()[i] - tb.data()[i];
        s += d * d;
    }
    Var o = t->push(Tensor::scalar(s / static_cast<double>(n)), "mse");
    t->set_backprop(o, [t, a, b, o, n]() {
        double g = t->grad(o).data()[0] * 2.0 / static_cast<double>(n);
        const Tensor& va = t->value(a);
        const Tensor& vb = t->value(b);
        Tensor& ga = t->grad(a);
        Tensor& gb = t->grad(b);
        for (std::int64_t i = 0; i < n; ++i) {
            double d = g * (va.data()[i] - vb.data()[i]);
            ga.data()[i] += d;
            gb.data()[i] -= d;
        }
    });
    return o;
}

Var bce_with_logits(Var logits, const std::vector<double>& targets) {
    Tape* t = logits.tape;
    const Tensor& tl = t->value(logits);
    std::int64_t n = tl.numel();
    if (static_cast<std::int64_t>(targets.size()) != n)
        throw dimension_error("bce_with_logits: target count mismatch");
    double loss = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        double z = tl.data()[i], y = targets[i];
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
    }
    Var o = t->push(Tensor::scalar(loss / static_cast<double>(n)), "bce_with_logits");
    t->set_backprop(o, [t, logits, o, targets, n]() {
        double g = t->grad(o).data()[0] / static_cast<double>(n);
        const Tensor& vl = t->value(logits);
        Tensor& gl = t->grad(logits);
        for (std::int64_t i = 0; i < n; ++i) {
            double sig = 1.0 / (1.0 + std::exp(-vl.data()[i]));
            gl.data()[i] += g * (sig - targets[i]);
        }
    });
    return o;
}

}  // namespace delicate::tensor
